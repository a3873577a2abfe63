#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "klab/errors.hpp"

namespace klab {

// S^1-invariant geometry on the projective line in moment coordinates.
// Symplectic potentials live on [-1, 1] and are written u = u0 + h with
//   u0(x) = ((1-x)log(1-x) + (1+x)log(1+x)) / 2,
// the round reference, and h a smooth correction sampled at Chebyshev-Gauss
// nodes.  Admissibility is u'' > 0, equivalently 1 + (1-x^2) h'' > 0.

// Quad-precision scalar for the collocation engine.  Chained fourth-order
// spectral differentiation at K ~ 128 amplifies rounding noise by ten or
// more digits; the identity checks downstream ask for 1e-10 absolute
// residuals, which double (or x87 long double) cannot deliver.
using qreal = __float128;

// Chebyshev-Gauss collocation on [-1, 1].
class ChebEngine {
 public:
  using vec = std::vector<qreal>;

  explicit ChebEngine(int K);

  int size() const { return K_; }
  const vec& nodes() const { return x_; }      // increasing, interior
  const vec& weights() const { return w_; }    // Fejer first rule, dx measure

  vec to_coeffs(const vec& vals) const;
  vec to_values(const vec& coeffs) const;
  vec derivative(const vec& vals) const;
  qreal quad(const vec& vals) const;

  static vec diff_coeffs(const vec& coeffs);
  static qreal clenshaw(const vec& coeffs, qreal x);

 private:
  int K_;
  vec theta_, x_, w_;
  vec ct_;  // cos(j theta_k) table, row j
};

// Shared per-K engine.
std::shared_ptr<const ChebEngine> cheb_engine(int K);

struct MomentGrid {
  int K = 64;

  MomentGrid() = default;
  explicit MomentGrid(int K_);

  friend bool operator==(const MomentGrid&, const MomentGrid&) = default;
};

// The smooth part h of a symplectic potential, by node values.
struct ToricPotential {
  MomentGrid grid;
  std::vector<double> h;

  ToricPotential() = default;
  explicit ToricPotential(MomentGrid g);
  ToricPotential(MomentGrid g, std::vector<double> values);
};

using Profile = std::vector<double>;

// Node-wise derived data for one admissible potential.
struct ToricGeometry {
  int K = 0;
  std::shared_ptr<const ChebEngine> eng;

  Profile x, w;
  Profile h, hx, hxx;
  Profile d;          // 1 + (1-x^2) h'', the admissibility margin density
  Profile upp;        // u''
  Profile Phi;        // 1/u''
  Profile Phix;
  Profile S;          // scalar curvature = -(1/u'')''
  Profile Sx;
  Profile s;          // log coordinate s(x) = atanh(x) + h'(x)
  double margin = 0.0;

  // long double working copies / interpolation tables
  ChebEngine::vec lx, lw, lPhi, lS, lSx;
  ChebEngine::vec ch, chx, chxx, cPhi;
};

// Throws NonConvexPotential when 1 + (1-x^2) h'' fails to stay positive.
ToricGeometry toric_geometry(const ToricPotential& u);
// Same from an extended-precision nodal profile; double rounding of the
// input feeds fourth-order coefficient chains and would put a ~1e-10 floor
// under the residual of states assembled from chart coordinates.
ToricGeometry toric_geometry(MomentGrid grid, const ChebEngine::vec& h);

ToricPotential round_potential(MomentGrid g);  // h = 0

Profile abreu_scalar(const ToricGeometry& g);

// Operators act on test functions p(x) e^{i m theta}; the returned profile
// is the x-dependence of the image.  m = 0 is the invariant sector.
Profile toric_laplacian(const ToricGeometry& g, const Profile& p, int m = 0);
Profile toric_lichnerowicz(const ToricGeometry& g, const Profile& p, int m = 0);
Profile toric_lichnerowicz_bar(const ToricGeometry& g, const Profile& p, int m = 0);
// Independent route for the invariant sector: D p = ((1/u'')^2 p_xx)_xx.
Profile toric_lichnerowicz_divform(const ToricGeometry& g, const Profile& p);

double toric_commutator_residual(const ToricGeometry& g, const Profile& p, int m);
// m = 0; requires v in the kernel of D (span of 1, x) up to the kernel
// tolerance, else throws KernelPreconditionViolated.
double toric_leibniz_residual(const ToricGeometry& g, const Profile& v,
                              const Profile& xi, double eps_override = -1.0);

// 1e-8 times a largest-eigenvalue reference taken over low Chebyshev probes
// (the raw discrete operator norm grows like K^8 and would swamp the
// kernel/spectrum separation the tolerance is meant to express).
double toric_epsilon_ker(const ToricGeometry& g);

Eigen::MatrixXd lichnerowicz_matrix(const ToricGeometry& g, int m = 0);

// Eigenvalues of Dbar restricted to the kernel basis {1, x} (orthonormalized
// in the quadrature measure).  Throws NotExtremal unless S is affine to tol.
std::vector<double> eigensplit_kernel_bar(const ToricGeometry& g,
                                          double extremal_tol = 1e-8);

// Legendre transform machinery.  s = u'(x) is the log coordinate.
double symplectic_value(const ToricGeometry& g, double x);  // u(x)
double log_from_moment(const ToricGeometry& g, double x);   // u'(x)
double moment_from_log(const ToricGeometry& g, double s);   // inverse of u'
double legendre_value(const ToricGeometry& g, double s);    // u*(s)

// Interpolated Legendre dual on s([-xmax, xmax]) supporting a second dual.
class LegendreDual {
 public:
  LegendreDual(const ToricGeometry& g, double xmax = 0.95, int K = 160);
  double value(double s) const;
  double slope(double s) const;       // d u*/ds = x(s)
  double dual_value(double x) const;  // u**(x) = sup_s (x s - u*(s))
  double s_min() const { return static_cast<double>(a_); }
  double s_max() const { return static_cast<double>(b_); }

 private:
  std::shared_ptr<const ChebEngine> eng_;
  qreal a_ = 0, b_ = 0;        // s interval
  ChebEngine::vec cf_, cfs_;   // coefficients of u* and d u*/ds in mapped s
};

// Pullback along the one-parameter orbit: in Legendre form f(s) -> f(s+c),
// which is u -> u - c x on the symplectic side.  The returned h is
// renormalized to quadrature mean zero.
ToricPotential orbit_action(const ToricPotential& u, double c);

// tr_u omega_ref as a profile at the nodes of u.
Profile toric_trace(const ToricGeometry& u, const ToricGeometry& ref);

// Holomorphy potential data for the S^1 factor: the pair (a, b) stands for
// the function a x + b on the moment interval.
struct Twist {
  double a = 0.0;
  double b = 0.0;
};

// Normalized holomorphy potential of the twist at u: a x (mean zero).
Profile rho_potential(const ToricGeometry& g, const Twist& X);
// Max deviation between the moment-coordinate route and the
// reference-plus-correction route for rho, evaluated through the inverse
// moment maps of u and u1.  Also checks the imaginary part vanishes.
double rho_crosscheck(const ToricGeometry& u, const ToricGeometry& u1,
                      const Twist& X);

// Relative ray functional of u against ref by Simpson quadrature along the
// linear segment of potentials (samples odd, >= 3).
double toric_iota(const ToricPotential& u, const ToricPotential& ref,
                  int samples = 33);
// Stationary parameter c* of c -> iota(orbit_action(u, c), ref).
double minimize_iota_on_orbit(const ToricPotential& u, const ToricPotential& ref);
// d iota / dc at c = 0: the pairing of tr_u omega_ref - 1 with x.
double orbit_derivative(const ToricPotential& u, const ToricPotential& ref);

std::string toric_to_json(const ToricPotential& u);
ToricPotential toric_from_json(const std::string& text);
// CSV with header x,h,upp,S
std::string toric_profile_csv(const ToricGeometry& g);

}  // namespace klab

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "klab/kahler.hpp"
#include "klab/toric.hpp"

namespace klab {

// Energy functionals defined through their first variations
//   dF/ds = int G phi_dot vol_phi
// and evaluated by composite Simpson quadrature along potential paths.
// All implemented kinds are exact one-forms, so values are path independent
// up to quadrature error.

enum class FunctionalTag { I, Jchi, Iota, KEnergy, Et, EK };

struct FunctionalKind {
  FunctionalTag tag = FunctionalTag::I;
  double t = 1.0;  // parameter of Et, in [0, 1]
  Twist X{};       // twist data of EK (torus backend requires zero)

  static FunctionalKind i() { return {FunctionalTag::I}; }
  static FunctionalKind jchi() { return {FunctionalTag::Jchi}; }
  static FunctionalKind iota() { return {FunctionalTag::Iota}; }
  static FunctionalKind k_energy() { return {FunctionalTag::KEnergy}; }
  static FunctionalKind e_t(double t);
  static FunctionalKind e_k(const Twist& X) { return {FunctionalTag::EK, 1.0, X}; }
};

// A twisted solution R - Rbar = (1-t)(tr - n) is a critical point of E_t'
// with the matched parameter t' = 1/(2 - t).
double matching_energy_parameter(double t);

// ---------------------------------------------------------------------------
// torus backend

// Smooth path of potentials phi_s over a fixed background.  Sample
// parameters must be strictly increasing from 0 to 1 and uniformly spaced
// with an odd count (composite Simpson).  Velocities are supplied
// analytically when known; otherwise they are filled by centered finite
// differences in s.
struct TorusPath {
  KahlerBackground bg;
  std::vector<double> s;
  std::vector<Field> phi;
  std::vector<Field> phidot;   // optional, same length as phi when present
  std::vector<Field> phiddot;  // optional, used by the second variation

  explicit TorusPath(KahlerBackground b) : bg(std::move(b)) {}
};

// Straight segment phi_a -> phi_b with exact velocity, default 65 samples.
TorusPath linear_path(const KahlerBackground& bg, const Field& a, const Field& b,
                      int samples = 65);
// Same endpoints traversed with the smooth reparameterization
// sigma(s) = 3s^2 - 2s^3 (velocity vanishes at the endpoints).
TorusPath reparameterized_path(const KahlerBackground& bg, const Field& a,
                               const Field& b, int samples = 65);

// Gradient density G with respect to the volume vol_phi = omega_phi^n/n!:
//   G_I = 1, G_Jchi = tr_phi chi, G_iota = tr_phi omega - n,
//   G_nu = -(R - Rbar), G_Et = -t(R - Rbar) + (1-t)(tr - n),
//   G_EK = -(R - Rbar) + rho_phi(X).
// chi and omega are both the background reference form.  Throws
// UnsupportedTwist for EK with X != 0 (the torus has no nonzero holomorphy
// potentials).
Field functional_gradient(const FunctionalKind& kind, const MetricState& s);

double functional_value(const FunctionalKind& kind, const TorusPath& path);

// d^2/ds^2 of iota along the path at sample index j:
//   int (phi_dd - |grad phi_d|^2)(tr - n) vol + int phi_d_a phi_d_bbar
//   omega^{raised} vol,
// the second term computed as g^{a m} g^{v b} phi_d_{,m} phi_d_{,v}
// omega_{a b}.  Needs phiddot (supplied or differenced).
double iota_second_derivative(const TorusPath& path, int index);

// The nonnegative second Hessian term alone, at a state with velocity v.
double iota_hessian_positive_term(const MetricState& s,
                                  const KahlerBackground& bg, const Field& v);

// L2(vol_phi) norm of the gradient density after projecting out constants.
double criticality_residual(const FunctionalKind& kind, const MetricState& s);

// CSV with header s,I,J_chi,iota,K-energy,E_t,E_K; one row per path sample
// with cumulative values from the path start.
std::string energy_scan_csv(const TorusPath& path, double t, const Twist& X);

// ---------------------------------------------------------------------------
// toric backend (n = 1, invariant potentials on the moment interval)

// Path of symplectic potentials against a fixed reference ref; the Kahler
// velocity at fixed spatial point is phi_dot = -u_dot in moment coordinates.
struct ToricPath {
  ToricPotential ref;
  std::vector<double> s;
  std::vector<ToricPotential> u;
  std::vector<Profile> udot;  // optional analytic velocities

  explicit ToricPath(ToricPotential r) : ref(std::move(r)) {}
};

ToricPath toric_linear_path(const ToricPotential& ref, const ToricPotential& a,
                            const ToricPotential& b, int samples = 65);
ToricPath toric_reparameterized_path(const ToricPotential& ref,
                                     const ToricPotential& a,
                                     const ToricPotential& b, int samples = 65);

// Gradient density at the nodes of g, against the dx measure (the invariant
// volume of the fibration is dx dtheta; the angular factor is common to all
// kinds and dropped).
Profile toric_functional_gradient(const FunctionalKind& kind,
                                  const ToricGeometry& g,
                                  const ToricGeometry& ref);

double toric_functional_value(const FunctionalKind& kind, const ToricPath& path);

double toric_criticality_residual(const FunctionalKind& kind,
                                  const ToricGeometry& g,
                                  const ToricGeometry& ref);

std::string toric_energy_scan_csv(const ToricPath& path, double t, const Twist& X);

}  // namespace klab

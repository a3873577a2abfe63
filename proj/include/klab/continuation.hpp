#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "klab/kahler.hpp"
#include "klab/toric.hpp"

namespace klab {

// Solver for the continuity-path equation
//   F(phi, t) = R_phi - Rbar - (1-t)(tr_phi omega - n) - rho_phi(X) = 0
// with Newton at fixed t, kernel detection at t = 1, a finite-dimensional
// reduction over the kernel, and path tracking t: 1 -> t_end.
//
// Both backends expose the same Euclidean coordinate chart contract: the
// unknown vector q holds coefficients of the potential in an L2-orthonormal
// mean-zero basis (trigonometric modes on the torus in the flat measure;
// orthonormalized Chebyshev profiles on the moment interval in dx), so the
// coordinate inner product is the plain dot product.

struct SolverOptions {
  double tol = 1e-11;      // coordinate-norm and sup targets for Newton
  int max_iter = 40;
  double fd_step = 1e-6;   // directional step for dense Jacobians
  double trust_u = 0.1;    // reduced-coordinate trust region
  double trust_t = 0.2;    // largest 1 - t
  double dt_min = 1e-4;    // smallest bisected step in track_path
};

struct ContinuationRecord {
  double t = 1.0;
  double residual = 0.0;     // sup norm of the mean-projected residual
  double mean_defect = 0.0;  // removed mean component
  std::vector<double> reduced;  // kernel coordinates u
  int newton_iters = 0;
  double iota = 0.0;
  double orthogonality = 0.0;  // |<e_1, tr omega - n>| at the anchor
  std::vector<double> q;       // full coordinates of the accepted potential
};

class ContinuationProblem {
 public:
  virtual ~ContinuationProblem() = default;

  virtual int dim() const = 0;
  // Coordinates of the mean-projected residual at potential q.
  virtual Eigen::VectorXd residual(const Eigen::VectorXd& q, double t) const = 0;
  virtual double sup_residual(const Eigen::VectorXd& q, double t) const = 0;
  virtual double mean_defect(const Eigen::VectorXd& q, double t) const = 0;
  // Lichnerowicz operator of the state at q, applied to the coordinate
  // vector v (used for kernel detection at t = 1).
  virtual Eigen::VectorXd lichnerowicz_coords(const Eigen::VectorXd& q,
                                              const Eigen::VectorXd& v) const = 0;
  virtual double kernel_tolerance(const Eigen::VectorXd& q) const = 0;
  // First-order holomorphy energy int |L v|^2 of the direction v at the
  // state q.  D v = 0 alone does not characterize holomorphy potentials on
  // the collocation grid: the fourth-order equation has extra solutions that
  // the continuum excludes through boundary regularity, and those appear as
  // near-null directions of the discrete operator.  The energy form carries
  // the boundary information and is zero only on true kernel members.
  virtual double holomorphy_energy(const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& v) const = 0;
  virtual double iota_of(const Eigen::VectorXd& q) const = 0;
  // Coordinates of the mean-projected trace defect tr_q(omega) - n, for the
  // orthogonality diagnostics.
  virtual Eigen::VectorXd trace_defect(const Eigen::VectorXd& q) const = 0;
  // +1 when q parameterizes the Kahler potential directly, -1 when it
  // parameterizes the symplectic side (d phi = -d h); the residual Jacobian
  // at an anchor equals chart_sign() * (-D).
  virtual double chart_sign() const = 0;
};

// Flat torus backend over a fixed background; the twist must be zero.
class TorusProblem : public ContinuationProblem {
 public:
  explicit TorusProblem(KahlerBackground bg, Twist X = {});

  int dim() const override { return static_cast<int>(modes_.size()); }
  Eigen::VectorXd residual(const Eigen::VectorXd& q, double t) const override;
  double sup_residual(const Eigen::VectorXd& q, double t) const override;
  double mean_defect(const Eigen::VectorXd& q, double t) const override;
  Eigen::VectorXd lichnerowicz_coords(const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& v) const override;
  double kernel_tolerance(const Eigen::VectorXd& q) const override;
  double holomorphy_energy(const Eigen::VectorXd& q,
                           const Eigen::VectorXd& v) const override;
  double iota_of(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd trace_defect(const Eigen::VectorXd& q) const override;
  double chart_sign() const override { return 1.0; }

  const KahlerBackground& background() const { return bg_; }
  Field potential(const Eigen::VectorXd& q) const;
  Eigen::VectorXd coordinates(const Field& phi) const;
  // Dealiased, mean-projected residual field.
  Field residual_field(const Field& phi, double t) const;

 private:
  struct Mode {
    std::array<int, 4> k{0, 0, 0, 0};
    bool sine = false;
  };
  KahlerBackground bg_;
  Twist X_;
  std::vector<Mode> modes_;
};

// S^1-invariant CP^1 backend against a fixed reference potential.
class ToricProblem : public ContinuationProblem {
 public:
  explicit ToricProblem(ToricPotential ref, Twist X = {});

  int dim() const override { return static_cast<int>(B_.cols()); }
  Eigen::VectorXd residual(const Eigen::VectorXd& q, double t) const override;
  double sup_residual(const Eigen::VectorXd& q, double t) const override;
  double mean_defect(const Eigen::VectorXd& q, double t) const override;
  Eigen::VectorXd lichnerowicz_coords(const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& v) const override;
  double kernel_tolerance(const Eigen::VectorXd& q) const override;
  double holomorphy_energy(const Eigen::VectorXd& q,
                           const Eigen::VectorXd& v) const override;
  double iota_of(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd trace_defect(const Eigen::VectorXd& q) const override;
  double chart_sign() const override { return -1.0; }

  const ToricPotential& reference() const { return ref_; }
  ToricPotential potential(const Eigen::VectorXd& q) const;
  Eigen::VectorXd coordinates(const ToricPotential& u) const;
  Profile residual_profile(const ToricGeometry& g, double t) const;
  // extended-precision nodal profile / geometry of the chart point q
  ChebEngine::vec profile_of(const Eigen::VectorXd& q) const;
  ToricGeometry geometry_of(const Eigen::VectorXd& q) const;

 private:
  ToricPotential ref_;
  ToricGeometry refg_;
  Twist X_;
  Eigen::MatrixXd B_;  // K x (K/2), w-orthonormal, mean-zero columns
  std::vector<ChebEngine::vec> lB_;  // the same columns in extended precision
  Eigen::VectorXd w_;
};

// Dense Jacobian of the residual coordinates by central differences; the
// step shrinks once if a probe leaves the admissible cone.
Eigen::MatrixXd linearize(const ContinuationProblem& p, const Eigen::VectorXd& q,
                          double t, double fd_step = 1e-6);

struct KernelBasis {
  Eigen::MatrixXd basis;       // dim x m, orthonormal columns
  Eigen::MatrixXd complement;  // dim x (dim - m), orthonormal columns
  double eps_ker = 0.0;
  std::vector<double> defects;   // ||D e_i|| for the kept columns
  std::vector<double> energies;  // holomorphy energies for the kept columns
  int rejected = 0;  // near-null directions failing the holomorphy test
};

// Eigen-decomposition of the discretized D at the anchor q1.  A direction
// enters the kernel when its singular value AND its holomorphy energy both
// fall below eps_ker; near-null directions failing the energy test stay in
// the complement (they are solvable for t < 1 and are skipped by the
// threshold pseudo-inverse at t = 1).
KernelBasis kernel_basis(const ContinuationProblem& p, const Eigen::VectorXd& q1);

// Solve pi_2 F(q1 + basis u + complement y, t) = 0 for y; returns the full
// coordinate vector.  Throws NoConvergence / NonPositiveMetric.
Eigen::VectorXd orthogonal_solve(const ContinuationProblem& p,
                                 const KernelBasis& kb,
                                 const Eigen::VectorXd& q1,
                                 const Eigen::VectorXd& u, double t,
                                 const SolverOptions& opts = {},
                                 int* iters = nullptr,
                                 const Eigen::VectorXd* warm = nullptr);

// P(u,t) = pi_1 F at the orthogonally solved state.
Eigen::VectorXd reduced_map(const ContinuationProblem& p, const KernelBasis& kb,
                            const Eigen::VectorXd& q1, const Eigen::VectorXd& u,
                            double t, const SolverOptions& opts = {});
// P / (t-1); at t = 1 a one-sided limit with steps 1-t in {1e-2,1e-3,1e-4}
// and Richardson extrapolation.
Eigen::VectorXd reduced_map_tilde(const ContinuationProblem& p,
                                  const KernelBasis& kb,
                                  const Eigen::VectorXd& q1,
                                  const Eigen::VectorXd& u, double t,
                                  const SolverOptions& opts = {});

// dP~/du at (0,1) by central differences in u (Richardson in t inside).
Eigen::MatrixXd reduced_jacobian_fd(const ContinuationProblem& p,
                                    const KernelBasis& kb,
                                    const Eigen::VectorXd& q1,
                                    const SolverOptions& opts = {});

// Analytic route at the anchor: entries <e_i, -<dv, dbar(tr omega - n)> -
// <del delbar v, omega>> for v = e_j, evaluated in the toric calculus.
Eigen::MatrixXd toric_reduced_jacobian_analytic(const ToricProblem& p,
                                                const Eigen::VectorXd& q1,
                                                const KernelBasis& kb);
// Independent quadrature of the paper display: int v_x^2 Phi_ref(y(x)) dx
// for the normalized kernel direction v.
double toric_kernel_pairing_quadrature(const ToricProblem& p,
                                       const Eigen::VectorXd& q1,
                                       const KernelBasis& kb);

ContinuationRecord solve_at(const ContinuationProblem& p, const KernelBasis& kb,
                            const Eigen::VectorXd& q1, double t,
                            const Eigen::VectorXd& initial,
                            const SolverOptions& opts = {});

// Warm-started path t: 1 -> t_end over `steps` uniform grid points
// (including both ends) with step bisection down to opts.dt_min.  On a dead
// end the partial path is written to *partial when given and PathTruncated
// is thrown either way.
std::vector<ContinuationRecord> track_path(const ContinuationProblem& p,
                                           const Eigen::VectorXd& q1,
                                           double t_end, int steps,
                                           const SolverOptions& opts = {},
                                           std::vector<ContinuationRecord>* partial = nullptr);

std::string records_to_jsonl(const std::vector<ContinuationRecord>& recs);
std::string records_to_csv(const std::vector<ContinuationRecord>& recs);

}  // namespace klab

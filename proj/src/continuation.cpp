#include "klab/continuation.hpp"

#include <quadmath.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "klab/functionals.hpp"

namespace klab {

// ---------------------------------------------------------------------------
// torus backend

TorusProblem::TorusProblem(KahlerBackground bg, Twist X)
    : bg_(std::move(bg)), X_(X) {
  if (X_.a != 0.0 || X_.b != 0.0) throw UnsupportedTwist();
  const int n = bg_.grid.n;
  const int cut = bg_.grid.N / 3;
  // representatives: first nonzero frequency component positive
  std::array<int, 4> k{0, 0, 0, 0};
  const int dims = 2 * n;
  std::vector<std::array<int, 4>> reps;
  std::function<void(int)> rec = [&](int d) {
    if (d == dims) {
      for (int i = 0; i < dims; ++i) {
        if (k[i] > 0) {
          reps.push_back(k);
          return;
        }
        if (k[i] < 0) return;
      }
      return;  // zero frequency excluded (gauge)
    }
    for (int f = -cut; f <= cut; ++f) {
      k[d] = f;
      rec(d + 1);
    }
    k[d] = 0;
  };
  rec(0);
  for (const auto& r : reps) {
    modes_.push_back({r, false});
    modes_.push_back({r, true});
  }
}

Field TorusProblem::potential(const Eigen::VectorXd& q) const {
  const TorusGrid& grid = bg_.grid;
  const double vol = std::pow(kTwoPi, 2 * grid.n);
  const double scale = 1.0 / std::sqrt(2.0 * vol);
  std::vector<cd> coeffs(grid.points(), cd(0.0, 0.0));
  // flattened spectral index of an integer frequency vector
  auto index_of = [&](const std::array<int, 4>& k) {
    std::size_t idx = 0;
    for (int d = 0; d < 2 * grid.n; ++d)
      idx = idx * grid.N + static_cast<std::size_t>((k[d] % grid.N + grid.N) % grid.N);
    return idx;
  };
  for (std::size_t j = 0; j < modes_.size(); ++j) {
    const auto& m = modes_[j];
    const cd c = m.sine ? cd(0.0, -q[j] * scale) : cd(q[j] * scale, 0.0);
    std::array<int, 4> neg{};
    for (int d = 0; d < 4; ++d) neg[d] = -m.k[d];
    coeffs[index_of(m.k)] += c;
    coeffs[index_of(neg)] += std::conj(c);
  }
  return ifft(grid, coeffs, Purity::Real);
}

Eigen::VectorXd TorusProblem::coordinates(const Field& phi) const {
  const TorusGrid& grid = bg_.grid;
  const double vol = std::pow(kTwoPi, 2 * grid.n);
  const double scale = std::sqrt(2.0 * vol);
  const std::vector<cd> coeffs = fft(phi);
  auto index_of = [&](const std::array<int, 4>& k) {
    std::size_t idx = 0;
    for (int d = 0; d < 2 * grid.n; ++d)
      idx = idx * grid.N + static_cast<std::size_t>((k[d] % grid.N + grid.N) % grid.N);
    return idx;
  };
  Eigen::VectorXd q(dim());
  for (std::size_t j = 0; j < modes_.size(); ++j) {
    const cd c = coeffs[index_of(modes_[j].k)];
    q[j] = modes_[j].sine ? -c.imag() * scale : c.real() * scale;
  }
  return q;
}

Field TorusProblem::residual_field(const Field& phi, double t) const {
  const MetricState st = assemble_metric(bg_, phi);
  const MetricState ref = assemble_metric(bg_, constant_field(bg_.grid, 0.0));
  Field f = st.scalar - (1.0 - t) * (trace_of(st, ref) -
                                     constant_field(bg_.grid, double(st.n())));
  f = dealias(f).real_part();
  const double mean = std::real(integrate(f)) / std::pow(kTwoPi, 2 * bg_.grid.n);
  return f - constant_field(bg_.grid, mean);
}

Eigen::VectorXd TorusProblem::residual(const Eigen::VectorXd& q, double t) const {
  return coordinates(residual_field(potential(q), t));
}

double TorusProblem::sup_residual(const Eigen::VectorXd& q, double t) const {
  return residual_field(potential(q), t).max_abs();
}

double TorusProblem::mean_defect(const Eigen::VectorXd& q, double t) const {
  const MetricState st = assemble_metric(bg_, potential(q));
  const Field f = st.scalar - (1.0 - t) * (trace_of(st, assemble_metric(
                                               bg_, constant_field(bg_.grid, 0.0))) -
                                           constant_field(bg_.grid, double(st.n())));
  const double vol = std::real(integrate(constant_field(bg_.grid, 1.0), st.density()));
  return std::abs(std::real(integrate(f, st.density())) / vol);
}

Eigen::VectorXd TorusProblem::lichnerowicz_coords(const Eigen::VectorXd& q,
                                                  const Eigen::VectorXd& v) const {
  const MetricState st = assemble_metric(bg_, potential(q));
  return coordinates(dealias(lichnerowicz(st, potential(v))).real_part());
}

double TorusProblem::kernel_tolerance(const Eigen::VectorXd& q) const {
  return epsilon_ker(assemble_metric(bg_, potential(q)));
}

double TorusProblem::holomorphy_energy(const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& v) const {
  const MetricState st = assemble_metric(bg_, potential(q));
  const Field f = potential(v);
  return std::real(
      integrate(tensor_norm_sq(st, l_operator(st, f)), st.density()));
}

double TorusProblem::iota_of(const Eigen::VectorXd& q) const {
  return functional_value(
      FunctionalKind::iota(),
      linear_path(bg_, constant_field(bg_.grid, 0.0), potential(q), 33));
}

Eigen::VectorXd TorusProblem::trace_defect(const Eigen::VectorXd& q) const {
  const MetricState st = assemble_metric(bg_, potential(q));
  const MetricState ref = assemble_metric(bg_, constant_field(bg_.grid, 0.0));
  return coordinates(
      dealias(trace_of(st, ref) - constant_field(bg_.grid, double(st.n())))
          .real_part());
}

// ---------------------------------------------------------------------------
// toric backend

ToricProblem::ToricProblem(ToricPotential ref, Twist X)
    : ref_(std::move(ref)), refg_(toric_geometry(ref_)), X_(X) {
  const int K = ref_.grid.K;
  w_.resize(K);
  for (int k = 0; k < K; ++k) w_[k] = refg_.w[k];
  // w-orthonormal mean-zero columns from the resolved coefficient band
  // T_1 .. T_{K/2}.  Modes past the 2K/3 derivative cutoff are dropped by
  // the spectral derivative and would contribute singular Jacobian
  // directions; the guard band below the cutoff keeps the curvature of
  // chart states fully resolved (products with the rational profiles spread
  // coefficients upward).
  const int m = K / 2;
  // the whole chart map q -> h is kept in extended precision so assembled
  // states carry no node-level rounding into the curvature chains
  auto eng = refg_.eng;
  const ChebEngine::vec& lw = refg_.lw;
  auto qdot = [&](const ChebEngine::vec& a, const ChebEngine::vec& b) {
    qreal acc = 0.0Q;
    for (int k = 0; k < K; ++k) acc += lw[k] * a[k] * b[k];
    return acc;
  };
  lB_.clear();
  for (int j = 1; j <= m; ++j) {
    ChebEngine::vec c(K, 0.0Q);
    c[j] = 1.0Q;
    ChebEngine::vec col = eng->to_values(c);
    const qreal mean = qdot(col, ChebEngine::vec(K, 1.0Q)) / 2.0Q;
    for (int k = 0; k < K; ++k) col[k] -= mean;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& prev : lB_) {
        const qreal d = qdot(col, prev);
        for (int k = 0; k < K; ++k) col[k] -= d * prev[k];
      }
    const qreal nrm = sqrtq(qdot(col, col));
    for (int k = 0; k < K; ++k) col[k] /= nrm;
    lB_.push_back(col);
  }
  B_.resize(K, m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < K; ++k) B_(k, j) = static_cast<double>(lB_[j][k]);
}

ChebEngine::vec ToricProblem::profile_of(const Eigen::VectorXd& q) const {
  const int K = ref_.grid.K;
  ChebEngine::vec h(K, 0.0Q);
  for (std::size_t j = 0; j < lB_.size(); ++j) {
    const qreal c = q[static_cast<long>(j)];
    for (int k = 0; k < K; ++k) h[k] += c * lB_[j][k];
  }
  return h;
}

ToricGeometry ToricProblem::geometry_of(const Eigen::VectorXd& q) const {
  return toric_geometry(ref_.grid, profile_of(q));
}

ToricPotential ToricProblem::potential(const Eigen::VectorXd& q) const {
  const Eigen::VectorXd h = B_ * q;
  return ToricPotential(ref_.grid,
                        std::vector<double>(h.data(), h.data() + h.size()));
}

Eigen::VectorXd ToricProblem::coordinates(const ToricPotential& u) const {
  Eigen::VectorXd h(u.grid.K);
  for (int k = 0; k < u.grid.K; ++k) h[k] = u.h[k];
  return B_.transpose() * (w_.array() * h.array()).matrix();
}

Profile ToricProblem::residual_profile(const ToricGeometry& g, double t) const {
  const Profile tr = toric_trace(g, refg_);
  const Profile rho = rho_potential(g, X_);
  Profile f(g.K);
  for (int k = 0; k < g.K; ++k)
    f[k] = (g.S[k] - 2.0) - (1.0 - t) * (tr[k] - 1.0) - rho[k];
  return f;
}

Eigen::VectorXd ToricProblem::residual(const Eigen::VectorXd& q, double t) const {
  const ToricGeometry g = geometry_of(q);
  const Profile f = residual_profile(g, t);
  Eigen::VectorXd fv(g.K);
  for (int k = 0; k < g.K; ++k) fv[k] = f[k];
  return B_.transpose() * (w_.array() * fv.array()).matrix();
}

double ToricProblem::sup_residual(const Eigen::VectorXd& q, double t) const {
  const ToricGeometry g = geometry_of(q);
  const Profile f = residual_profile(g, t);
  double mean = 0.0;
  for (int k = 0; k < g.K; ++k) mean += w_[k] * f[k];
  mean /= 2.0;
  double sup = 0.0;
  for (int k = 0; k < g.K; ++k) sup = std::max(sup, std::abs(f[k] - mean));
  return sup;
}

double ToricProblem::mean_defect(const Eigen::VectorXd& q, double t) const {
  const ToricGeometry g = geometry_of(q);
  const Profile f = residual_profile(g, t);
  double mean = 0.0;
  for (int k = 0; k < g.K; ++k) mean += w_[k] * f[k];
  return std::abs(mean / 2.0);
}

Eigen::VectorXd ToricProblem::lichnerowicz_coords(const Eigen::VectorXd& q,
                                                  const Eigen::VectorXd& v) const {
  const ToricGeometry g = geometry_of(q);
  const Eigen::VectorXd vn = B_ * v;
  Profile p(g.K);
  for (int k = 0; k < g.K; ++k) p[k] = vn[k];
  const Profile dp = toric_lichnerowicz(g, p);
  Eigen::VectorXd out(g.K);
  for (int k = 0; k < g.K; ++k) out[k] = dp[k];
  return B_.transpose() * (w_.array() * out.array()).matrix();
}

double ToricProblem::kernel_tolerance(const Eigen::VectorXd& q) const {
  return toric_epsilon_ker(geometry_of(q));
}

double ToricProblem::holomorphy_energy(const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& v) const {
  // int Phi^2 v_xx^2 dx: zero exactly on affine profiles (the invariant
  // holomorphy potentials), order one on the log-singular solutions of
  // D v = 0 that the boundary conditions exclude.
  const ToricGeometry g = geometry_of(q);
  const Eigen::VectorXd vn = B_ * v;
  ChebEngine::vec lv(g.K);
  for (int k = 0; k < g.K; ++k) lv[k] = vn[k];
  const ChebEngine::vec vxx = g.eng->derivative(g.eng->derivative(lv));
  qreal acc = 0.0Q;
  for (int k = 0; k < g.K; ++k)
    acc += g.lw[k] * g.lPhi[k] * g.lPhi[k] * vxx[k] * vxx[k];
  return static_cast<double>(acc);
}

double ToricProblem::iota_of(const Eigen::VectorXd& q) const {
  return toric_iota(potential(q), ref_, 33);
}

Eigen::VectorXd ToricProblem::trace_defect(const Eigen::VectorXd& q) const {
  const ToricGeometry g = geometry_of(q);
  const Profile tr = toric_trace(g, refg_);
  Eigen::VectorXd f(g.K);
  for (int k = 0; k < g.K; ++k) f[k] = tr[k] - 1.0;
  return B_.transpose() * (w_.array() * f.array()).matrix();
}

// ---------------------------------------------------------------------------
// generic machinery

Eigen::MatrixXd linearize(const ContinuationProblem& p, const Eigen::VectorXd& q,
                          double t, double fd_step) {
  const int n = p.dim();
  Eigen::MatrixXd J(n, n);
  for (int j = 0; j < n; ++j) {
    double h = fd_step * std::max(1.0, q.norm());
    for (int attempt = 0;; ++attempt) {
      try {
        Eigen::VectorXd qp = q, qm = q;
        qp[j] += h;
        qm[j] -= h;
        J.col(j) = (p.residual(qp, t) - p.residual(qm, t)) / (2.0 * h);
        break;
      } catch (const NonPositiveMetric&) {
        if (attempt > 0) throw;
        h *= 0.1;
      } catch (const NonConvexPotential&) {
        if (attempt > 0) throw;
        h *= 0.1;
      }
    }
  }
  return J;
}

KernelBasis kernel_basis(const ContinuationProblem& p, const Eigen::VectorXd& q1) {
  const int n = p.dim();
  Eigen::MatrixXd D(n, n);
  for (int j = 0; j < n; ++j)
    D.col(j) = p.lichnerowicz_coords(q1, Eigen::VectorXd::Unit(n, j));
  KernelBasis kb;
  kb.eps_ker = p.kernel_tolerance(q1);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  std::vector<int> kernel_ix, complement_ix;
  for (int i = 0; i < n; ++i) {
    bool keep = sv[i] <= kb.eps_ker;
    if (keep) {
      const double e = p.holomorphy_energy(q1, svd.matrixV().col(i));
      if (e > kb.eps_ker) {
        keep = false;
        ++kb.rejected;
      } else {
        kb.energies.push_back(e);
      }
    }
    (keep ? kernel_ix : complement_ix).push_back(i);
  }
  kb.basis.resize(n, static_cast<int>(kernel_ix.size()));
  kb.complement.resize(n, static_cast<int>(complement_ix.size()));
  for (std::size_t i = 0; i < kernel_ix.size(); ++i) {
    Eigen::VectorXd v = svd.matrixV().col(kernel_ix[i]);
    int big = 0;
    for (int r = 1; r < n; ++r)
      if (std::abs(v[r]) > std::abs(v[big])) big = r;
    if (v[big] < 0.0) v = -v;
    kb.basis.col(static_cast<int>(i)) = v;
    kb.defects.push_back((D * v).norm());
  }
  for (std::size_t i = 0; i < complement_ix.size(); ++i)
    kb.complement.col(static_cast<int>(i)) = svd.matrixV().col(complement_ix[i]);
  return kb;
}

namespace {

// Newton with lazy Jacobian refresh on the subspace spanned by C.  The
// linear solves use a pseudo-inverse with the absolute cut `null_threshold`
// on the singular values: near-null directions of the Jacobian (present in
// the complement at t = 1, where the boundary-singular solutions of D v = 0
// live) receive no update instead of a runaway step.  For t < 1 those
// directions regain a Jacobian of size (1-t) and are solved normally, and
// the residual components skipped at t = 1 vanish by structure at the
// anchor states the solver is pointed at.
Eigen::VectorXd subspace_newton(const ContinuationProblem& p,
                                const Eigen::MatrixXd& C,
                                const Eigen::VectorXd& q0, double t,
                                double null_threshold,
                                const SolverOptions& opts, int* iters) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(C.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd;
  bool have_jac = false;
  double prev = -1.0;
  int used = 0;
  auto residual_in = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r = C.transpose() * p.residual(q, t);
    if (have_jac) {
      // measure convergence on the solvable part only
      const int nc = static_cast<int>(svd.singularValues().size());
      Eigen::VectorXd rc = svd.matrixU().transpose() * r;
      for (int i = 0; i < nc; ++i)
        if (svd.singularValues()[i] <= null_threshold) rc[i] = 0.0;
      r = svd.matrixU() * rc;
    }
    return r;
  };
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::VectorXd q = q0 + C * y;
    Eigen::VectorXd r = residual_in(q);
    double rn = r.norm();
    // before the first Jacobian the raw norm bounds the filtered one
    if (rn <= opts.tol) {
      if (iters) *iters = used;
      return q;
    }
    if (!have_jac || (prev >= 0.0 && rn > 0.5 * prev)) {
      const Eigen::MatrixXd A =
          C.transpose() * linearize(p, q, t, opts.fd_step) * C;
      svd.compute(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (!have_jac) {
        have_jac = true;
        r = residual_in(q);
        rn = r.norm();
        if (rn <= opts.tol) {
          if (iters) *iters = used;
          return q;
        }
      }
    }
    const int nc = static_cast<int>(svd.singularValues().size());
    Eigen::VectorXd step = svd.matrixU().transpose() * r;
    for (int i = 0; i < nc; ++i)
      step[i] = svd.singularValues()[i] > null_threshold
                    ? step[i] / svd.singularValues()[i]
                    : 0.0;
    y -= svd.matrixV() * step;
    prev = rn;
    ++used;
  }
  const Eigen::VectorXd q = q0 + C * y;
  throw NoConvergence(opts.max_iter, residual_in(q).norm());
}

}  // namespace

Eigen::VectorXd orthogonal_solve(const ContinuationProblem& p,
                                 const KernelBasis& kb,
                                 const Eigen::VectorXd& q1,
                                 const Eigen::VectorXd& u, double t,
                                 const SolverOptions& opts, int* iters,
                                 const Eigen::VectorXd* warm) {
  if (u.norm() > opts.trust_u || (1.0 - t) > opts.trust_t + 1e-14)
    throw NoConvergence(0, u.norm());
  // u is oriented on the Kahler-potential side; chart_sign maps it into the
  // chart coordinate (the reduced Jacobian positivity is a statement about
  // the potential-side parameterization).
  Eigen::VectorXd q0 = q1 + p.chart_sign() * (kb.basis * u);
  if (warm) q0 += kb.complement * (kb.complement.transpose() * (*warm - q0));
  return subspace_newton(p, kb.complement, q0, t, kb.eps_ker, opts, iters);
}

Eigen::VectorXd reduced_map(const ContinuationProblem& p, const KernelBasis& kb,
                            const Eigen::VectorXd& q1, const Eigen::VectorXd& u,
                            double t, const SolverOptions& opts) {
  const Eigen::VectorXd q = orthogonal_solve(p, kb, q1, u, t, opts);
  return kb.basis.transpose() * p.residual(q, t);
}

Eigen::VectorXd reduced_map_tilde(const ContinuationProblem& p,
                                  const KernelBasis& kb,
                                  const Eigen::VectorXd& q1,
                                  const Eigen::VectorXd& u, double t,
                                  const SolverOptions& opts) {
  if (t < 1.0 - 1e-12)
    return reduced_map(p, kb, q1, u, t, opts) / (t - 1.0);
  // one-sided limit with Richardson extrapolation over 1-t = 1e-2..1e-4
  const double eps[3] = {1e-2, 1e-3, 1e-4};
  std::array<Eigen::VectorXd, 3> v;
  for (int i = 0; i < 3; ++i)
    v[i] = reduced_map(p, kb, q1, u, 1.0 - eps[i], opts) / (-eps[i]);
  const Eigen::VectorXd n1 = (10.0 * v[1] - v[0]) / 9.0;
  const Eigen::VectorXd n2 = (10.0 * v[2] - v[1]) / 9.0;
  return (100.0 * n2 - n1) / 99.0;
}

Eigen::MatrixXd reduced_jacobian_fd(const ContinuationProblem& p,
                                    const KernelBasis& kb,
                                    const Eigen::VectorXd& q1,
                                    const SolverOptions& opts) {
  const int m = static_cast<int>(kb.basis.cols());
  Eigen::MatrixXd M(m, m);
  const double du = 1e-3;
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd plus =
        reduced_map_tilde(p, kb, q1, du * Eigen::VectorXd::Unit(m, j), 1.0, opts);
    const Eigen::VectorXd minus =
        reduced_map_tilde(p, kb, q1, -du * Eigen::VectorXd::Unit(m, j), 1.0, opts);
    M.col(j) = (plus - minus) / (2.0 * du);
  }
  return M;
}

Eigen::MatrixXd toric_reduced_jacobian_analytic(const ToricProblem& p,
                                                const Eigen::VectorXd& q1,
                                                const KernelBasis& kb) {
  const ToricGeometry g = toric_geometry(p.potential(q1));
  const ToricGeometry refg = toric_geometry(p.reference());
  const Profile tr = toric_trace(g, refg);
  auto eng = g.eng;
  ChebEngine::vec ltr(g.K);
  for (int k = 0; k < g.K; ++k) ltr[k] = tr[k];
  const ChebEngine::vec trx = eng->derivative(ltr);

  const int m = static_cast<int>(kb.basis.cols());
  const int n = p.dim();
  Eigen::MatrixXd M(m, m);
  for (int j = 0; j < m; ++j) {
    // node profile of the kernel direction
    Eigen::VectorXd vq(n);
    vq = kb.basis.col(j);
    const ToricPotential vpot = p.potential(vq);
    ChebEngine::vec v(g.K);
    for (int k = 0; k < g.K; ++k) v[k] = vpot.h[k];
    const ChebEngine::vec vx = eng->derivative(v);
    ChebEngine::vec flux(g.K);
    for (int k = 0; k < g.K; ++k) flux[k] = g.lPhi[k] * vx[k];
    const ChebEngine::vec lap = eng->derivative(flux);
    // A = -<dv, dbar(tr - n)> - <del delbar v, omega> = -Phi v_x tr_x -
    // (Lap v) tr
    Eigen::VectorXd A(g.K);
    for (int k = 0; k < g.K; ++k)
      A[k] = -static_cast<double>(g.lPhi[k] * vx[k] * trx[k]) -
             static_cast<double>(lap[k]) * tr[k];
    for (int i = 0; i < m; ++i) {
      const ToricPotential ei = p.potential(Eigen::VectorXd(kb.basis.col(i)));
      long double acc = 0.0L;
      for (int k = 0; k < g.K; ++k) acc += g.w[k] * ei.h[k] * A[k];
      M(i, j) = static_cast<double>(acc);
    }
  }
  return M;
}

double toric_kernel_pairing_quadrature(const ToricProblem& p,
                                       const Eigen::VectorXd& q1,
                                       const KernelBasis& kb) {
  const ToricGeometry g = toric_geometry(p.potential(q1));
  const ToricGeometry refg = toric_geometry(p.reference());
  const Profile tr = toric_trace(g, refg);
  const ToricPotential vpot =
      p.potential(Eigen::VectorXd(kb.basis.col(0)));
  ChebEngine::vec v(g.K);
  for (int k = 0; k < g.K; ++k) v[k] = vpot.h[k];
  const ChebEngine::vec vx = g.eng->derivative(v);
  // Phi_ref(y(x)) = Phi_u(x) tr(x)
  long double acc = 0.0L;
  for (int k = 0; k < g.K; ++k)
    acc += g.w[k] * static_cast<double>(vx[k] * vx[k]) * g.Phi[k] * tr[k];
  return static_cast<double>(acc);
}

ContinuationRecord solve_at(const ContinuationProblem& p, const KernelBasis& kb,
                            const Eigen::VectorXd& q1, double t,
                            const Eigen::VectorXd& initial,
                            const SolverOptions& opts) {
  const int m = static_cast<int>(kb.basis.cols());
  ContinuationRecord rec;
  rec.t = t;
  Eigen::VectorXd q;
  int iters = 0;
  if (m == 0) {
    q = subspace_newton(p, Eigen::MatrixXd::Identity(p.dim(), p.dim()), initial,
                        t, kb.eps_ker, opts, &iters);
  } else {
    Eigen::VectorXd u = p.chart_sign() * (kb.basis.transpose() * (initial - q1));
    if (t >= 1.0 - 1e-14) {
      q = orthogonal_solve(p, kb, q1, u, t, opts, &iters, &initial);
    } else {
      // outer Newton on the kernel coordinates
      Eigen::VectorXd warm = initial;
      for (int it = 0;; ++it) {
        int inner = 0;
        q = orthogonal_solve(p, kb, q1, u, t, opts, &inner, &warm);
        iters += inner + 1;
        warm = q;
        const Eigen::VectorXd P = kb.basis.transpose() * p.residual(q, t);
        if (P.norm() <= opts.tol) break;
        if (it >= opts.max_iter) throw NoConvergence(it, P.norm());
        Eigen::MatrixXd Ju(m, m);
        const double du = 1e-6 * std::max(1.0, u.norm());
        for (int j = 0; j < m; ++j) {
          const Eigen::VectorXd up =
              orthogonal_solve(p, kb, q1, u + du * Eigen::VectorXd::Unit(m, j),
                               t, opts, nullptr, &warm);
          const Eigen::VectorXd um =
              orthogonal_solve(p, kb, q1, u - du * Eigen::VectorXd::Unit(m, j),
                               t, opts, nullptr, &warm);
          Ju.col(j) = (kb.basis.transpose() *
                       (p.residual(up, t) - p.residual(um, t))) /
                      (2.0 * du);
        }
        u -= Ju.partialPivLu().solve(P);
        if (u.norm() > opts.trust_u) throw NoConvergence(it, u.norm());
      }
    }
    rec.reduced.assign(m, 0.0);
    const Eigen::VectorXd uq =
        p.chart_sign() * (kb.basis.transpose() * (q - q1));
    for (int j = 0; j < m; ++j) rec.reduced[j] = uq[j];
    const Eigen::VectorXd orth = kb.basis.transpose() * p.trace_defect(q1);
    rec.orthogonality = orth.cwiseAbs().maxCoeff();
  }
  rec.newton_iters = iters;
  rec.residual = p.sup_residual(q, t);
  rec.mean_defect = p.mean_defect(q, t);
  rec.iota = p.iota_of(q);
  rec.q.assign(q.data(), q.data() + q.size());
  return rec;
}

std::vector<ContinuationRecord> track_path(const ContinuationProblem& p,
                                           const Eigen::VectorXd& q1,
                                           double t_end, int steps,
                                           const SolverOptions& opts,
                                           std::vector<ContinuationRecord>* partial) {
  if (steps < 2) throw ConfigError("track_path needs at least 2 steps");
  if (!(t_end >= 0.5 && t_end < 1.0))
    throw ConfigError("t_end must lie in [0.5, 1)");
  const KernelBasis kb = kernel_basis(p, q1);
  std::vector<ContinuationRecord> recs;
  Eigen::VectorXd warm = q1;
  double t_cur = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double t_target =
        1.0 + (t_end - 1.0) * static_cast<double>(i) / (steps - 1);
    // bisect toward the grid point when Newton fails
    while (t_cur > t_target + 1e-15) {
      double t_try = t_target;
      for (;;) {
        try {
          const ContinuationRecord r = solve_at(p, kb, q1, t_try, warm, opts);
          warm = Eigen::Map<const Eigen::VectorXd>(r.q.data(),
                                                   static_cast<long>(r.q.size()));
          t_cur = t_try;
          if (std::abs(t_try - t_target) < 1e-15) recs.push_back(r);
          break;
        } catch (const NoConvergence&) {
          if (t_cur - t_try <= opts.dt_min) {
            if (partial) *partial = recs;
            throw PathTruncated(t_cur);
          }
          t_try = 0.5 * (t_cur + t_try);
        }
      }
    }
    if (i == 0 && recs.empty()) {
      const ContinuationRecord r = solve_at(p, kb, q1, 1.0, warm, opts);
      warm = Eigen::Map<const Eigen::VectorXd>(r.q.data(),
                                               static_cast<long>(r.q.size()));
      recs.push_back(r);
    }
  }
  return recs;
}

std::string records_to_jsonl(const std::vector<ContinuationRecord>& recs) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& r : recs) {
    out << "{\"t\":" << r.t << ",\"residual\":" << r.residual
        << ",\"mean-defect\":" << r.mean_defect << ",\"newton-iters\":"
        << r.newton_iters << ",\"iota\":" << r.iota
        << ",\"orthogonality\":" << r.orthogonality << ",\"reduced\":[";
    for (std::size_t j = 0; j < r.reduced.size(); ++j)
      out << (j ? "," : "") << r.reduced[j];
    out << "],\"q\":[";
    for (std::size_t j = 0; j < r.q.size(); ++j) out << (j ? "," : "") << r.q[j];
    out << "]}\n";
  }
  return out.str();
}

std::string records_to_csv(const std::vector<ContinuationRecord>& recs) {
  std::ostringstream out;
  out.precision(17);
  out << "t,residual,iota,newton-iters\n";
  for (const auto& r : recs)
    out << r.t << "," << r.residual << "," << r.iota << "," << r.newton_iters
        << "\n";
  return out.str();
}

}  // namespace klab

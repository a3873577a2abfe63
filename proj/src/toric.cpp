#include "klab/toric.hpp"

#include <quadmath.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <mutex>

#include "json.hpp"

namespace klab {

namespace {

const qreal kPiQ = 3.14159265358979323846264338327950288Q;

using vec = ChebEngine::vec;

vec lift(const Profile& p) { return vec(p.begin(), p.end()); }

Profile lower(const vec& p) {
  Profile out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<double>(p[i]);
  return out;
}

vec hadamard(const vec& a, const vec& b) {
  vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

qreal qmax(qreal a, qreal b) { return a > b ? a : b; }

qreal u0_value(qreal x) {
  const qreal p = 1.0Q + x, q = 1.0Q - x;
  qreal acc = 0.0Q;
  if (p > 0.0Q) acc += p * logq(p);
  if (q > 0.0Q) acc += q * logq(q);
  return 0.5Q * acc;
}

}  // namespace

ChebEngine::ChebEngine(int K) : K_(K), theta_(K), x_(K), w_(K) {
  if (K < 8) throw Error("collocation order too small");
  for (int k = 0; k < K; ++k) {
    // node order chosen so x_ is increasing
    theta_[k] = (2.0Q * (K - 1 - k) + 1.0Q) * kPiQ / (2.0Q * K);
    x_[k] = cosq(theta_[k]);
    // Fejer's first rule for the plain dx measure
    qreal s = 1.0Q;
    for (int m = 1; m <= K / 2; ++m)
      s -= 2.0Q * cosq(2.0Q * m * theta_[k]) / (4.0Q * m * m - 1.0Q);
    w_[k] = 2.0Q * s / K;
  }
  ct_.resize(static_cast<std::size_t>(K) * K);
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < K; ++k) ct_[j * K + k] = cosq(j * theta_[k]);
}

ChebEngine::vec ChebEngine::to_coeffs(const vec& vals) const {
  if (static_cast<int>(vals.size()) != K_) throw Error("profile size mismatch");
  vec c(K_, 0.0Q);
  for (int j = 0; j < K_; ++j) {
    qreal acc = 0.0Q;
    for (int k = 0; k < K_; ++k) acc += vals[k] * ct_[j * K_ + k];
    c[j] = (j == 0 ? 1.0Q : 2.0Q) * acc / K_;
  }
  return c;
}

ChebEngine::vec ChebEngine::to_values(const vec& coeffs) const {
  if (static_cast<int>(coeffs.size()) != K_) throw Error("coefficient size mismatch");
  vec vals(K_, 0.0Q);
  for (int k = 0; k < K_; ++k) {
    qreal acc = 0.0Q;
    for (int j = 0; j < K_; ++j) acc += coeffs[j] * ct_[j * K_ + k];
    vals[k] = acc;
  }
  return vals;
}

ChebEngine::vec ChebEngine::diff_coeffs(const vec& c) {
  const int K = static_cast<int>(c.size());
  vec b(K, 0.0Q);
  for (int j = K - 2; j >= 0; --j)
    b[j] = (j + 2 <= K - 1 ? b[j + 2] : 0.0Q) + 2.0Q * (j + 1) * c[j + 1];
  b[0] *= 0.5Q;
  return b;
}

ChebEngine::vec ChebEngine::derivative(const vec& vals) const {
  // Input profiles arrive double-rounded; that quantization noise is white
  // across the coefficient spectrum and fourth-order chains amplify the top
  // modes past the identity tolerances.  Smooth signal content above 2K/3 is
  // negligible at the orders used here, so drop it before differentiating.
  vec c = to_coeffs(vals);
  for (int j = (2 * K_) / 3 + 1; j < K_; ++j) c[j] = 0.0Q;
  return to_values(diff_coeffs(c));
}

qreal ChebEngine::quad(const vec& vals) const {
  qreal acc = 0.0Q;
  for (int k = 0; k < K_; ++k) acc += w_[k] * vals[k];
  return acc;
}

qreal ChebEngine::clenshaw(const vec& c, qreal x) {
  qreal b1 = 0.0Q, b2 = 0.0Q;
  for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j) {
    const qreal b0 = 2.0Q * x * b1 - b2 + c[j];
    b2 = b1;
    b1 = b0;
  }
  return x * b1 - b2 + c[0];
}

std::shared_ptr<const ChebEngine> cheb_engine(int K) {
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const ChebEngine>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[K];
  if (!slot) slot = std::make_shared<const ChebEngine>(K);
  return slot;
}

MomentGrid::MomentGrid(int K_) : K(K_) {
  if (K < 32 || K > 256) throw Error("collocation order must lie in [32, 256]");
}

ToricPotential::ToricPotential(MomentGrid g) : grid(g), h(g.K, 0.0) {}

ToricPotential::ToricPotential(MomentGrid g, std::vector<double> values)
    : grid(g), h(std::move(values)) {
  if (static_cast<int>(h.size()) != grid.K) throw Error("profile size mismatch");
}

ToricPotential round_potential(MomentGrid g) { return ToricPotential(g); }

ToricGeometry toric_geometry(MomentGrid grid, const ChebEngine::vec& lh) {
  ToricGeometry g;
  g.K = grid.K;
  if (static_cast<int>(lh.size()) != g.K) throw Error("profile size mismatch");
  g.eng = cheb_engine(g.K);
  g.lx = g.eng->nodes();
  g.lw = g.eng->weights();

  g.ch = g.eng->to_coeffs(lh);
  g.chx = ChebEngine::diff_coeffs(g.ch);
  g.chxx = ChebEngine::diff_coeffs(g.chx);
  const vec lhx = g.eng->to_values(g.chx);
  const vec lhxx = g.eng->to_values(g.chxx);

  vec ld(g.K), lupp(g.K), lPhi(g.K);
  qreal margin = 1e300Q;
  int worst = 0;
  for (int k = 0; k < g.K; ++k) {
    const qreal om = 1.0Q - g.lx[k] * g.lx[k];
    ld[k] = 1.0Q + om * lhxx[k];
    if (ld[k] < margin) {
      margin = ld[k];
      worst = k;
    }
    lupp[k] = ld[k] / om;
    lPhi[k] = om / ld[k];
  }
  if (margin <= 0.0Q)
    throw NonConvexPotential(static_cast<double>(g.lx[worst]),
                             static_cast<double>(margin));

  g.cPhi = g.eng->to_coeffs(lPhi);
  const vec cPhix = ChebEngine::diff_coeffs(g.cPhi);
  const vec cPhixx = ChebEngine::diff_coeffs(cPhix);
  const vec cPhixxx = ChebEngine::diff_coeffs(cPhixx);
  const vec lPhix = g.eng->to_values(cPhix);
  const vec lPhixx = g.eng->to_values(cPhixx);
  const vec lPhixxx = g.eng->to_values(cPhixxx);

  g.lPhi = lPhi;
  g.lS.resize(g.K);
  g.lSx.resize(g.K);
  vec lst(g.K);
  for (int k = 0; k < g.K; ++k) {
    g.lS[k] = -lPhixx[k];
    g.lSx[k] = -lPhixxx[k];
    lst[k] = atanhq(g.lx[k]) + lhx[k];
  }

  g.x = lower(g.lx);
  g.w = lower(g.lw);
  g.h = lower(lh);
  g.hx = lower(lhx);
  g.hxx = lower(lhxx);
  g.d = lower(ld);
  g.upp = lower(lupp);
  g.Phi = lower(lPhi);
  g.Phix = lower(lPhix);
  g.S = lower(g.lS);
  g.Sx = lower(g.lSx);
  g.s = lower(lst);
  g.margin = static_cast<double>(margin);
  return g;
}

ToricGeometry toric_geometry(const ToricPotential& u) {
  return toric_geometry(u.grid, lift(u.h));
}

Profile abreu_scalar(const ToricGeometry& g) { return g.S; }

namespace {

vec lap_m(const ToricGeometry& g, const vec& p, int m) {
  vec flux = g.eng->derivative(p);
  for (int k = 0; k < g.K; ++k) flux[k] *= g.lPhi[k];
  vec out = g.eng->derivative(flux);
  if (m != 0) {
    const qreal mm = static_cast<qreal>(m) * m;
    for (int k = 0; k < g.K; ++k) out[k] -= mm * p[k] / g.lPhi[k];
  }
  return out;
}

// sign = -1 gives D, +1 gives Dbar; they differ by 2 m S_x.
vec lich_m(const ToricGeometry& g, const vec& p, int m, int sign) {
  const vec l1 = lap_m(g, p, m);
  vec out = lap_m(g, l1, m);
  const vec px = g.eng->derivative(p);
  for (int k = 0; k < g.K; ++k) {
    out[k] += g.lS[k] * l1[k] + g.lPhi[k] * g.lSx[k] * px[k];
    out[k] += sign * m * g.lSx[k] * p[k];
  }
  return out;
}

qreal sup_abs(const vec& p) {
  qreal m = 0.0Q;
  for (qreal v : p) m = qmax(m, fabsq(v));
  return m;
}

qreal wnorm(const ToricGeometry& g, const vec& p) {
  qreal acc = 0.0Q;
  for (int k = 0; k < g.K; ++k) acc += g.lw[k] * p[k] * p[k];
  return sqrtq(acc);
}

}  // namespace

Profile toric_laplacian(const ToricGeometry& g, const Profile& p, int m) {
  return lower(lap_m(g, lift(p), m));
}

Profile toric_lichnerowicz(const ToricGeometry& g, const Profile& p, int m) {
  return lower(lich_m(g, lift(p), m, -1));
}

Profile toric_lichnerowicz_bar(const ToricGeometry& g, const Profile& p, int m) {
  return lower(lich_m(g, lift(p), m, +1));
}

Profile toric_lichnerowicz_divform(const ToricGeometry& g, const Profile& p) {
  vec pxx = g.eng->derivative(g.eng->derivative(lift(p)));
  for (int k = 0; k < g.K; ++k) pxx[k] *= g.lPhi[k] * g.lPhi[k];
  return lower(g.eng->derivative(g.eng->derivative(pxx)));
}

double toric_commutator_residual(const ToricGeometry& g, const Profile& p, int m) {
  const vec lp = lift(p);
  const vec a = lich_m(g, lich_m(g, lp, m, +1), m, -1);
  const vec b = lich_m(g, lich_m(g, lp, m, -1), m, +1);
  qreal r = 0.0Q;
  for (int k = 0; k < g.K; ++k) r = qmax(r, fabsq(a[k] - b[k]));
  return static_cast<double>(r);
}

double toric_epsilon_ker(const ToricGeometry& g) {
  qreal lam = 0.0Q;
  for (int j = 1; j <= 8; ++j) {
    vec p(g.K);
    for (int k = 0; k < g.K; ++k) p[k] = cosq(j * acosq(g.lx[k]));
    const qreal mean = g.eng->quad(p) / g.eng->quad(vec(g.K, 1.0Q));
    for (auto& v : p) v -= mean;
    lam = qmax(lam, wnorm(g, lich_m(g, p, 0, -1)) / wnorm(g, p));
  }
  return static_cast<double>(1e-8Q * lam);
}

double toric_leibniz_residual(const ToricGeometry& g, const Profile& v,
                              const Profile& xi, double eps_override) {
  const double eps = eps_override > 0.0 ? eps_override : toric_epsilon_ker(g);
  const vec lv = lift(v), lxi = lift(xi);
  const qreal defect = sup_abs(lich_m(g, lv, 0, -1));
  const qreal scale = qmax(1.0Q, sup_abs(lv));
  if (defect > 10.0Q * static_cast<qreal>(eps) * scale)
    throw KernelPreconditionViolated(static_cast<double>(defect));

  const vec vx = g.eng->derivative(lv);
  const vec xix = g.eng->derivative(lxi);
  auto pairing = [&](const vec& ax, const vec& bx) {
    vec out(g.K);
    for (int k = 0; k < g.K; ++k) out[k] = g.lPhi[k] * ax[k] * bx[k];
    return out;
  };

  const vec lhs = lich_m(g, pairing(vx, xix), 0, -1);
  const vec dxi = lich_m(g, lxi, 0, -1);
  const vec rhs1 = pairing(vx, g.eng->derivative(dxi));

  const vec lapv = lap_m(g, lv, 0);
  const vec lapxi = lap_m(g, lxi, 0);
  const vec laplapv = lap_m(g, lapv, 0);
  const vec laplapxi = lap_m(g, lapxi, 0);
  const vec mid = lap_m(g, hadamard(lapv, lapxi), 0);
  qreal r = 0.0Q;
  for (int k = 0; k < g.K; ++k) {
    const qreal b = lapxi[k] * laplapv[k] + mid[k] + laplapxi[k] * lapv[k] +
                    2.0Q * g.lS[k] * lapv[k] * lapxi[k];
    r = qmax(r, fabsq(lhs[k] - rhs1[k] - b));
  }
  return static_cast<double>(r);
}

Eigen::MatrixXd lichnerowicz_matrix(const ToricGeometry& g, int m) {
  Eigen::MatrixXd A(g.K, g.K);
  vec e(g.K, 0.0Q);
  for (int j = 0; j < g.K; ++j) {
    e[j] = 1.0Q;
    const vec col = lich_m(g, e, m, -1);
    for (int i = 0; i < g.K; ++i) A(i, j) = static_cast<double>(col[i]);
    e[j] = 0.0Q;
  }
  return A;
}

std::vector<double> eigensplit_kernel_bar(const ToricGeometry& g,
                                          double extremal_tol) {
  // weighted affine fit of S; extremality means the residual vanishes
  qreal m0 = 0, m1 = 0, m2 = 0, r0 = 0, r1 = 0;
  for (int k = 0; k < g.K; ++k) {
    m0 += g.lw[k];
    m1 += g.lw[k] * g.lx[k];
    m2 += g.lw[k] * g.lx[k] * g.lx[k];
    r0 += g.lw[k] * g.lS[k];
    r1 += g.lw[k] * g.lS[k] * g.lx[k];
  }
  const qreal det = m0 * m2 - m1 * m1;
  const qreal alpha = (m2 * r0 - m1 * r1) / det;
  const qreal beta = (m0 * r1 - m1 * r0) / det;
  qreal dev = 0.0Q;
  for (int k = 0; k < g.K; ++k)
    dev = qmax(dev, fabsq(g.lS[k] - alpha - beta * g.lx[k]));
  if (dev > static_cast<qreal>(extremal_tol))
    throw NotExtremal(static_cast<double>(dev));

  // orthonormal kernel basis {1, x} in the quadrature measure
  vec e0(g.K), e1(g.K);
  const qreal xbar = m1 / m0;
  qreal nx = 0.0Q;
  for (int k = 0; k < g.K; ++k) nx += g.lw[k] * (g.lx[k] - xbar) * (g.lx[k] - xbar);
  nx = sqrtq(nx);
  for (int k = 0; k < g.K; ++k) {
    e0[k] = 1.0Q / sqrtq(m0);
    e1[k] = (g.lx[k] - xbar) / nx;
  }
  const vec de0 = lich_m(g, e0, 0, +1);
  const vec de1 = lich_m(g, e1, 0, +1);
  qreal a = 0, b = 0, c = 0, d = 0;
  for (int k = 0; k < g.K; ++k) {
    a += g.lw[k] * e0[k] * de0[k];
    b += g.lw[k] * e0[k] * de1[k];
    c += g.lw[k] * e1[k] * de0[k];
    d += g.lw[k] * e1[k] * de1[k];
  }
  const qreal off = 0.5Q * (b + c);
  const qreal tr = a + d;
  const qreal disc = sqrtq(0.25Q * (a - d) * (a - d) + off * off);
  return {static_cast<double>(0.5Q * tr - disc),
          static_cast<double>(0.5Q * tr + disc)};
}

double symplectic_value(const ToricGeometry& g, double x) {
  return static_cast<double>(u0_value(x) + ChebEngine::clenshaw(g.ch, x));
}

double log_from_moment(const ToricGeometry& g, double x) {
  return static_cast<double>(atanhq(static_cast<qreal>(x)) +
                             ChebEngine::clenshaw(g.chx, x));
}

double moment_from_log(const ToricGeometry& g, double s) {
  // Newton in tau = atanh(x); the map tau -> u'(tanh tau) - s has derivative
  // 1 + (1 - x^2) h'' >= margin > 0, so the iteration is monotone-safe.
  qreal tau = s;
  for (int it = 0; it < 300; ++it) {
    const qreal x = tanhq(tau);
    const qreal om = 1.0Q - x * x;
    const qreal f = tau + ChebEngine::clenshaw(g.chx, x) - s;
    const qreal fp = 1.0Q + om * ChebEngine::clenshaw(g.chxx, x);
    qreal step = f / fp;
    if (fabsq(step) > 2.0Q) step = step > 0 ? 2.0Q : -2.0Q;
    tau -= step;
    if (fabsq(step) < 1e-32Q * qmax(1.0Q, fabsq(tau)))
      return static_cast<double>(tanhq(tau));
  }
  throw NoConvergence(300, static_cast<double>(tanhq(tau)));
}

double legendre_value(const ToricGeometry& g, double s) {
  const double x = moment_from_log(g, s);
  return s * x - symplectic_value(g, x);
}

namespace {

// inverse moment map in quad precision, for internal consumers
qreal moment_from_log_q(const ToricGeometry& g, qreal s) {
  qreal tau = s;
  for (int it = 0; it < 300; ++it) {
    const qreal x = tanhq(tau);
    const qreal om = 1.0Q - x * x;
    const qreal f = tau + ChebEngine::clenshaw(g.chx, x) - s;
    const qreal fp = 1.0Q + om * ChebEngine::clenshaw(g.chxx, x);
    qreal step = f / fp;
    if (fabsq(step) > 2.0Q) step = step > 0 ? 2.0Q : -2.0Q;
    tau -= step;
    if (fabsq(step) < 1e-32Q * qmax(1.0Q, fabsq(tau))) return tanhq(tau);
  }
  throw NoConvergence(300, static_cast<double>(tanhq(tau)));
}

}  // namespace

LegendreDual::LegendreDual(const ToricGeometry& g, double xmax, int K)
    : eng_(cheb_engine(K)) {
  a_ = log_from_moment(g, -xmax);
  b_ = log_from_moment(g, xmax);
  vec f(K);
  for (int k = 0; k < K; ++k) {
    const qreal s = 0.5Q * (a_ + b_) + 0.5Q * (b_ - a_) * eng_->nodes()[k];
    const qreal x = moment_from_log_q(g, s);
    f[k] = s * x - (u0_value(x) + ChebEngine::clenshaw(g.ch, x));
  }
  cf_ = eng_->to_coeffs(f);
  cfs_ = ChebEngine::diff_coeffs(cf_);
  for (auto& c : cfs_) c *= 2.0Q / (b_ - a_);
}

double LegendreDual::value(double s) const {
  const qreal xi = (2.0Q * s - a_ - b_) / (b_ - a_);
  return static_cast<double>(ChebEngine::clenshaw(cf_, xi));
}

double LegendreDual::slope(double s) const {
  const qreal xi = (2.0Q * s - a_ - b_) / (b_ - a_);
  return static_cast<double>(ChebEngine::clenshaw(cfs_, xi));
}

double LegendreDual::dual_value(double x) const {
  // slope is increasing; bisect on slope(s) = x
  qreal lo = a_, hi = b_;
  auto slope_q = [&](qreal s) {
    return ChebEngine::clenshaw(cfs_, (2.0Q * s - a_ - b_) / (b_ - a_));
  };
  if (slope_q(lo) > static_cast<qreal>(x) || slope_q(hi) < static_cast<qreal>(x))
    throw RootBracketFailure(x);
  for (int it = 0; it < 180; ++it) {
    const qreal mid = 0.5Q * (lo + hi);
    if (slope_q(mid) < static_cast<qreal>(x))
      lo = mid;
    else
      hi = mid;
  }
  const qreal s = 0.5Q * (lo + hi);
  const qreal f = ChebEngine::clenshaw(cf_, (2.0Q * s - a_ - b_) / (b_ - a_));
  return static_cast<double>(static_cast<qreal>(x) * s - f);
}

ToricPotential orbit_action(const ToricPotential& u, double c) {
  auto eng = cheb_engine(u.grid.K);
  vec h(u.grid.K);
  for (int k = 0; k < u.grid.K; ++k)
    h[k] = static_cast<qreal>(u.h[k]) - static_cast<qreal>(c) * eng->nodes()[k];
  const qreal mean = eng->quad(h) / eng->quad(vec(u.grid.K, 1.0Q));
  for (auto& v : h) v -= mean;
  return ToricPotential(u.grid, lower(h));
}

Profile toric_trace(const ToricGeometry& u, const ToricGeometry& ref) {
  Profile out(u.K);
  for (int k = 0; k < u.K; ++k) {
    const qreal y = moment_from_log_q(ref, atanhq(u.lx[k]) +
                                               ChebEngine::clenshaw(u.chx, u.lx[k]));
    const qreal omy = 1.0Q - y * y;
    const qreal dref = 1.0Q + omy * ChebEngine::clenshaw(ref.chxx, y);
    const qreal omx = 1.0Q - u.lx[k] * u.lx[k];
    const qreal du = 1.0Q + omx * ChebEngine::clenshaw(u.chxx, u.lx[k]);
    out[k] = static_cast<double>(du * omy / (omx * dref));
  }
  return out;
}

Profile rho_potential(const ToricGeometry& g, const Twist& X) {
  Profile out(g.K);
  vec p(g.K);
  for (int k = 0; k < g.K; ++k) p[k] = static_cast<qreal>(X.a) * g.lx[k];
  const qreal mean = g.eng->quad(p) / g.eng->quad(vec(g.K, 1.0Q));
  for (int k = 0; k < g.K; ++k) out[k] = static_cast<double>(p[k] - mean);
  return out;
}

double rho_crosscheck(const ToricGeometry& u, const ToricGeometry& u1,
                      const Twist& X) {
  // moment route: a x at the nodes of u.  reference route: the potential at
  // u1 plus the twist derivative of the relative potential, both read through
  // the log coordinate and renormalized.
  std::vector<std::complex<double>> alt(u.K);
  for (int k = 0; k < u.K; ++k) {
    const double y = moment_from_log(u1, u.s[k]);
    alt[k] = std::complex<double>(X.a * y, 0.0) +
             std::complex<double>(X.a * (u.x[k] - y), 0.0);
  }
  std::complex<double> mean{0.0, 0.0};
  double wsum = 0.0;
  for (int k = 0; k < u.K; ++k) {
    mean += u.w[k] * alt[k];
    wsum += u.w[k];
  }
  mean /= wsum;
  const Profile direct = rho_potential(u, X);
  double r = 0.0;
  for (int k = 0; k < u.K; ++k) {
    const std::complex<double> v = alt[k] - mean;
    r = std::max(r, std::abs(v.real() - direct[k]));
    r = std::max(r, std::abs(v.imag()));
  }
  return r;
}

double toric_iota(const ToricPotential& u, const ToricPotential& ref,
                  int samples) {
  if (!(u.grid == ref.grid)) throw GridMismatch();
  if (samples < 3 || samples % 2 == 0) throw Error("samples must be odd and >= 3");
  const int K = u.grid.K;
  const ToricGeometry gref = toric_geometry(ref);
  std::vector<double> delta(K);
  for (int k = 0; k < K; ++k) delta[k] = u.h[k] - ref.h[k];

  auto integrand = [&](double t) {
    std::vector<double> h(K);
    for (int k = 0; k < K; ++k) h[k] = ref.h[k] + t * delta[k];
    const ToricGeometry gt = toric_geometry(ToricPotential(u.grid, h));
    const Profile tr = toric_trace(gt, gref);
    long double acc = 0.0L;
    for (int k = 0; k < K; ++k) acc += gt.w[k] * (tr[k] - 1.0) * (-delta[k]);
    return static_cast<double>(acc);
  };

  const double dt = 1.0 / (samples - 1);
  long double acc = integrand(0.0) + integrand(1.0);
  for (int j = 1; j < samples - 1; ++j)
    acc += (j % 2 == 1 ? 4.0L : 2.0L) * integrand(j * dt);
  return static_cast<double>(acc * dt / 3.0L);
}

double orbit_derivative(const ToricPotential& u, const ToricPotential& ref) {
  const ToricGeometry gu = toric_geometry(u);
  const ToricGeometry gref = toric_geometry(ref);
  const Profile tr = toric_trace(gu, gref);
  long double acc = 0.0L;
  for (int k = 0; k < gu.K; ++k) acc += gu.w[k] * (tr[k] - 1.0) * gu.x[k];
  return static_cast<double>(acc);
}

double minimize_iota_on_orbit(const ToricPotential& u, const ToricPotential& ref) {
  auto G = [&](double c) { return orbit_derivative(orbit_action(u, c), ref); };
  // G is the derivative of a convex function of c; bracket a sign change
  double lo = -0.5, hi = 0.5;
  double glo = G(lo), ghi = G(hi);
  int guard = 0;
  while (glo > 0.0 && lo > -40.0) {
    lo *= 2.0;
    glo = G(lo);
    if (++guard > 60) break;
  }
  while (ghi < 0.0 && hi < 40.0) {
    hi *= 2.0;
    ghi = G(hi);
    if (++guard > 60) break;
  }
  if (glo > 0.0 || ghi < 0.0) throw RootBracketFailure(0.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = G(mid);
    if (gm < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * std::max(1.0, std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

std::string toric_to_json(const ToricPotential& u) {
  nlohmann::json j;
  j["K"] = u.grid.K;
  j["h"] = u.h;
  return j.dump();
}

ToricPotential toric_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MomentGrid g(j.at("K").get<int>());
  return ToricPotential(g, j.at("h").get<std::vector<double>>());
}

std::string toric_profile_csv(const ToricGeometry& g) {
  std::string out = "x,h,upp,S\n";
  char buf[160];
  for (int k = 0; k < g.K; ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", g.x[k], g.h[k],
                  g.upp[k], g.S[k]);
    out += buf;
  }
  return out;
}

}  // namespace klab

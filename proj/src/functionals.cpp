#include "klab/functionals.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <utility>

namespace klab {

namespace {

constexpr double kTorusRbar = 0.0;
constexpr double kToricRbar = 2.0;

void check_samples(const std::vector<double>& s, std::size_t count) {
  if (count < 3 || count % 2 == 0)
    throw ConfigError("path needs an odd sample count >= 3");
  if (s.size() != count) throw ConfigError("path parameter/sample size mismatch");
  if (std::abs(s.front()) > 1e-12 || std::abs(s.back() - 1.0) > 1e-12)
    throw ConfigError("path parameter must run from 0 to 1");
  const double h = 1.0 / static_cast<double>(count - 1);
  for (std::size_t j = 0; j < count; ++j) {
    if (std::abs(s[j] - h * static_cast<double>(j)) > 1e-12)
      throw ConfigError("path parameter samples must be uniform");
  }
}

// Composite Simpson weights times the uniform step.
std::vector<double> simpson_weights(std::size_t count) {
  const double h = 1.0 / static_cast<double>(count - 1);
  std::vector<double> w(count, 0.0);
  for (std::size_t j = 0; j + 2 < count; j += 2) {
    w[j] += h / 3.0;
    w[j + 1] += 4.0 * h / 3.0;
    w[j + 2] += h / 3.0;
  }
  return w;
}

// Cumulative integral at every sample: even prefixes by composite Simpson,
// odd prefixes close with a quadratic fit through the last three samples.
std::vector<double> cumulative_simpson(const std::vector<double>& f) {
  const std::size_t count = f.size();
  const double h = 1.0 / static_cast<double>(count - 1);
  std::vector<double> acc(count, 0.0);
  for (std::size_t j = 2; j < count; j += 2)
    acc[j] = acc[j - 2] + h / 3.0 * (f[j - 2] + 4.0 * f[j - 1] + f[j]);
  for (std::size_t j = 1; j < count; j += 2) {
    if (j + 1 < count)
      acc[j] = acc[j - 1] + h / 12.0 * (5.0 * f[j - 1] + 8.0 * f[j] - f[j + 1]);
    else
      acc[j] = acc[j - 1] + h / 12.0 * (-f[j - 2] + 8.0 * f[j - 1] + 5.0 * f[j]);
  }
  return acc;
}

std::vector<double> uniform_params(int samples) {
  std::vector<double> s(samples);
  for (int j = 0; j < samples; ++j)
    s[j] = static_cast<double>(j) / static_cast<double>(samples - 1);
  return s;
}

}  // namespace

FunctionalKind FunctionalKind::e_t(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("E_t parameter must lie in [0, 1]");
  return {FunctionalTag::Et, t};
}

double matching_energy_parameter(double t) { return 1.0 / (2.0 - t); }

// ---------------------------------------------------------------------------
// torus backend

TorusPath linear_path(const KahlerBackground& bg, const Field& a, const Field& b,
                      int samples) {
  TorusPath p(bg);
  p.s = uniform_params(samples);
  const Field step = b - a;
  const Field zero = constant_field(bg.grid, 0.0);
  for (double s : p.s) {
    p.phi.push_back(a + s * step);
    p.phidot.push_back(step);
    p.phiddot.push_back(zero);
  }
  return p;
}

TorusPath reparameterized_path(const KahlerBackground& bg, const Field& a,
                               const Field& b, int samples) {
  TorusPath p(bg);
  p.s = uniform_params(samples);
  const Field step = b - a;
  for (double s : p.s) {
    const double sig = s * s * (3.0 - 2.0 * s);
    p.phi.push_back(a + sig * step);
    p.phidot.push_back((6.0 * s * (1.0 - s)) * step);
    p.phiddot.push_back((6.0 - 12.0 * s) * step);
  }
  return p;
}

namespace {

void fill_velocities(TorusPath& p) {
  if (!p.phidot.empty()) return;
  const std::size_t count = p.phi.size();
  const double h = 1.0 / static_cast<double>(count - 1);
  p.phidot.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    if (j == 0)
      p.phidot.push_back((1.0 / (2.0 * h)) *
                         (-3.0 * p.phi[0] + 4.0 * p.phi[1] - p.phi[2]));
    else if (j + 1 == count)
      p.phidot.push_back((1.0 / (2.0 * h)) *
                         (3.0 * p.phi[j] - 4.0 * p.phi[j - 1] + p.phi[j - 2]));
    else
      p.phidot.push_back((1.0 / (2.0 * h)) * (p.phi[j + 1] - p.phi[j - 1]));
  }
}

const MetricState& reference_state(const KahlerBackground& bg) {
  // Cached per call site instead: assembling is cheap at desk scale, but the
  // reference is reused heavily inside path loops, so hold one static copy
  // keyed by nothing and rebuild when the background changes.
  thread_local std::unique_ptr<MetricState> cache;
  thread_local std::string key;
  std::string k = to_json(bg.psi_ref);
  if (!cache || key != k) {
    cache = std::make_unique<MetricState>(
        assemble_metric(bg, constant_field(bg.grid, 0.0)));
    key = std::move(k);
  }
  return *cache;
}

}  // namespace

Field functional_gradient(const FunctionalKind& kind, const MetricState& s) {
  const TorusGrid& grid = s.grid();
  const double n = static_cast<double>(s.n());
  switch (kind.tag) {
    case FunctionalTag::I:
      return constant_field(grid, 1.0);
    case FunctionalTag::Jchi:
      return trace_of(s, reference_state(s.background));
    case FunctionalTag::Iota:
      return trace_of(s, reference_state(s.background)) - constant_field(grid, n);
    case FunctionalTag::KEnergy:
      return -1.0 * (s.scalar - constant_field(grid, kTorusRbar));
    case FunctionalTag::Et: {
      const Field tr = trace_of(s, reference_state(s.background));
      return (-kind.t) * (s.scalar - constant_field(grid, kTorusRbar)) +
             (1.0 - kind.t) * (tr - constant_field(grid, n));
    }
    case FunctionalTag::EK: {
      if (kind.X.a != 0.0 || kind.X.b != 0.0) throw UnsupportedTwist();
      return -1.0 * (s.scalar - constant_field(grid, kTorusRbar));
    }
  }
  throw ConfigError("unknown functional kind");
}

double functional_value(const FunctionalKind& kind, const TorusPath& path) {
  check_samples(path.s, path.phi.size());
  TorusPath p = path;
  fill_velocities(p);
  const auto w = simpson_weights(p.s.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < p.s.size(); ++j) {
    const MetricState st = assemble_metric(p.bg, p.phi[j]);
    const Field g = functional_gradient(kind, st);
    acc += w[j] * std::real(integrate(g * p.phidot[j], st.density()));
  }
  return acc;
}

double iota_hessian_positive_term(const MetricState& s,
                                  const KahlerBackground& bg, const Field& v) {
  const MetricState& chi = reference_state(bg);
  const int n = s.n();
  std::array<Field, 2> raised;  // A^a = g^{a m} v_{,m-bar}
  for (int a = 0; a < n; ++a) {
    Field acc = constant_field(s.grid(), 0.0);
    for (int m = 0; m < n; ++m)
      acc += s.ginv[a * n + m] * spectral_derivative(v, m, DBar::Antiholomorphic);
    raised[a] = acc;
  }
  Field t = constant_field(s.grid(), 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      t += chi.g[a * n + b] * raised[a] * raised[b].conj();
  return std::real(integrate(t, s.density()));
}

double iota_second_derivative(const TorusPath& path, int index) {
  check_samples(path.s, path.phi.size());
  const std::size_t count = path.phi.size();
  if (index < 0 || static_cast<std::size_t>(index) >= count)
    throw ConfigError("path sample index out of range");
  TorusPath p = path;
  fill_velocities(p);

  Field acc2;
  if (!p.phiddot.empty()) {
    acc2 = p.phiddot[index];
  } else {
    if (index == 0 || static_cast<std::size_t>(index) + 1 == count)
      throw ConfigError("second variation needs an interior sample");
    const double h = 1.0 / static_cast<double>(count - 1);
    acc2 = (1.0 / (h * h)) *
           (p.phi[index + 1] - 2.0 * p.phi[index] + p.phi[index - 1]);
  }

  const MetricState st = assemble_metric(p.bg, p.phi[index]);
  const Field tr = trace_of(st, reference_state(p.bg));
  const Field grad2 = grad_pairing(st, p.phidot[index], p.phidot[index]);
  const Field defect = tr - constant_field(st.grid(), static_cast<double>(st.n()));
  const double first =
      std::real(integrate((acc2 - grad2) * defect, st.density()));
  return first + iota_hessian_positive_term(st, p.bg, p.phidot[index]);
}

double criticality_residual(const FunctionalKind& kind, const MetricState& s) {
  const Field g = functional_gradient(kind, s);
  const Field one = constant_field(s.grid(), 1.0);
  const double vol = std::real(integrate(one, s.density()));
  const double mean = std::real(integrate(g, s.density())) / vol;
  return l2_norm(g - constant_field(s.grid(), mean), s.density());
}

std::string energy_scan_csv(const TorusPath& path, double t, const Twist& X) {
  check_samples(path.s, path.phi.size());
  TorusPath p = path;
  fill_velocities(p);
  const std::vector<FunctionalKind> kinds = {
      FunctionalKind::i(),        FunctionalKind::jchi(),
      FunctionalKind::iota(),     FunctionalKind::k_energy(),
      FunctionalKind::e_t(t),     FunctionalKind::e_k(X)};
  std::vector<std::vector<double>> f(kinds.size(),
                                     std::vector<double>(p.s.size()));
  for (std::size_t j = 0; j < p.s.size(); ++j) {
    const MetricState st = assemble_metric(p.bg, p.phi[j]);
    for (std::size_t q = 0; q < kinds.size(); ++q)
      f[q][j] = std::real(
          integrate(functional_gradient(kinds[q], st) * p.phidot[j], st.density()));
  }
  std::ostringstream out;
  out << "s,I,J_chi,iota,K-energy,E_t,E_K\n";
  out.precision(17);
  std::vector<std::vector<double>> acc;
  for (auto& fq : f) acc.push_back(cumulative_simpson(fq));
  for (std::size_t j = 0; j < p.s.size(); ++j) {
    out << p.s[j];
    for (std::size_t q = 0; q < kinds.size(); ++q) out << "," << acc[q][j];
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// toric backend

namespace {

ToricPath build_toric_path(const ToricPotential& ref, const ToricPotential& a,
                           const ToricPotential& b, int samples, bool reparam) {
  if (a.grid.K != b.grid.K || a.grid.K != ref.grid.K)
    throw ConfigError("path endpoints live on different moment grids");
  ToricPath p(ref);
  p.s = uniform_params(samples);
  const int K = a.grid.K;
  for (double s : p.s) {
    const double sig = reparam ? s * s * (3.0 - 2.0 * s) : s;
    const double vel = reparam ? 6.0 * s * (1.0 - s) : 1.0;
    std::vector<double> h(K), hd(K);
    for (int k = 0; k < K; ++k) {
      h[k] = a.h[k] + sig * (b.h[k] - a.h[k]);
      hd[k] = vel * (b.h[k] - a.h[k]);
    }
    p.u.emplace_back(a.grid, std::move(h));
    p.udot.push_back(std::move(hd));
  }
  return p;
}

void fill_toric_velocities(ToricPath& p) {
  if (!p.udot.empty()) return;
  const std::size_t count = p.u.size();
  const double h = 1.0 / static_cast<double>(count - 1);
  const int K = p.u.front().grid.K;
  for (std::size_t j = 0; j < count; ++j) {
    std::vector<double> v(K);
    for (int k = 0; k < K; ++k) {
      if (j == 0)
        v[k] = (-3.0 * p.u[0].h[k] + 4.0 * p.u[1].h[k] - p.u[2].h[k]) / (2.0 * h);
      else if (j + 1 == count)
        v[k] = (3.0 * p.u[j].h[k] - 4.0 * p.u[j - 1].h[k] + p.u[j - 2].h[k]) /
               (2.0 * h);
      else
        v[k] = (p.u[j + 1].h[k] - p.u[j - 1].h[k]) / (2.0 * h);
    }
    p.udot.push_back(std::move(v));
  }
}

}  // namespace

ToricPath toric_linear_path(const ToricPotential& ref, const ToricPotential& a,
                            const ToricPotential& b, int samples) {
  return build_toric_path(ref, a, b, samples, false);
}

ToricPath toric_reparameterized_path(const ToricPotential& ref,
                                     const ToricPotential& a,
                                     const ToricPotential& b, int samples) {
  return build_toric_path(ref, a, b, samples, true);
}

Profile toric_functional_gradient(const FunctionalKind& kind,
                                  const ToricGeometry& g,
                                  const ToricGeometry& ref) {
  Profile out(g.K, 0.0);
  switch (kind.tag) {
    case FunctionalTag::I:
      for (int k = 0; k < g.K; ++k) out[k] = 1.0;
      return out;
    case FunctionalTag::Jchi:
      return toric_trace(g, ref);
    case FunctionalTag::Iota: {
      Profile tr = toric_trace(g, ref);
      for (int k = 0; k < g.K; ++k) out[k] = tr[k] - 1.0;
      return out;
    }
    case FunctionalTag::KEnergy:
      for (int k = 0; k < g.K; ++k) out[k] = -(g.S[k] - kToricRbar);
      return out;
    case FunctionalTag::Et: {
      Profile tr = toric_trace(g, ref);
      for (int k = 0; k < g.K; ++k)
        out[k] = -kind.t * (g.S[k] - kToricRbar) + (1.0 - kind.t) * (tr[k] - 1.0);
      return out;
    }
    case FunctionalTag::EK: {
      Profile rho = rho_potential(g, kind.X);
      for (int k = 0; k < g.K; ++k) out[k] = -(g.S[k] - kToricRbar) + rho[k];
      return out;
    }
  }
  throw ConfigError("unknown functional kind");
}

namespace {

double toric_pairing(const FunctionalKind& kind, const ToricGeometry& g,
                     const ToricGeometry& ref, const Profile& udot) {
  // phi_dot = -u_dot at fixed spatial point; the volume is dx in moment
  // coordinates.
  const Profile grad = toric_functional_gradient(kind, g, ref);
  long double acc = 0.0L;
  for (int k = 0; k < g.K; ++k) acc -= g.w[k] * grad[k] * udot[k];
  return static_cast<double>(acc);
}

}  // namespace

double toric_functional_value(const FunctionalKind& kind, const ToricPath& path) {
  check_samples(path.s, path.u.size());
  ToricPath p = path;
  fill_toric_velocities(p);
  const ToricGeometry ref = toric_geometry(p.ref);
  const auto w = simpson_weights(p.s.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < p.s.size(); ++j) {
    const ToricGeometry g = toric_geometry(p.u[j]);
    acc += w[j] * toric_pairing(kind, g, ref, p.udot[j]);
  }
  return acc;
}

double toric_criticality_residual(const FunctionalKind& kind,
                                  const ToricGeometry& g,
                                  const ToricGeometry& ref) {
  const Profile grad = toric_functional_gradient(kind, g, ref);
  long double mean = 0.0L;
  for (int k = 0; k < g.K; ++k) mean += g.w[k] * grad[k];
  mean /= 2.0L;
  long double acc = 0.0L;
  for (int k = 0; k < g.K; ++k) {
    const long double d = grad[k] - mean;
    acc += g.w[k] * d * d;
  }
  return static_cast<double>(sqrtl(acc));
}

std::string toric_energy_scan_csv(const ToricPath& path, double t,
                                  const Twist& X) {
  check_samples(path.s, path.u.size());
  ToricPath p = path;
  fill_toric_velocities(p);
  const ToricGeometry ref = toric_geometry(p.ref);
  const std::vector<FunctionalKind> kinds = {
      FunctionalKind::i(),        FunctionalKind::jchi(),
      FunctionalKind::iota(),     FunctionalKind::k_energy(),
      FunctionalKind::e_t(t),     FunctionalKind::e_k(X)};
  std::vector<std::vector<double>> f(kinds.size(),
                                     std::vector<double>(p.s.size()));
  for (std::size_t j = 0; j < p.s.size(); ++j) {
    const ToricGeometry g = toric_geometry(p.u[j]);
    for (std::size_t q = 0; q < kinds.size(); ++q)
      f[q][j] = toric_pairing(kinds[q], g, ref, p.udot[j]);
  }
  std::ostringstream out;
  out << "s,I,J_chi,iota,K-energy,E_t,E_K\n";
  out.precision(17);
  std::vector<std::vector<double>> acc;
  for (auto& fq : f) acc.push_back(cumulative_simpson(fq));
  for (std::size_t j = 0; j < p.s.size(); ++j) {
    out << p.s[j];
    for (std::size_t q = 0; q < kinds.size(); ++q) out << "," << acc[q][j];
    out << "\n";
  }
  return out.str();
}

}  // namespace klab

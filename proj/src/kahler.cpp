#include "klab/kahler.hpp"

#include <cmath>
#include <cstdint>
#include <functional>

#include "json.hpp"

namespace klab {

namespace {

// d_a dbar_b h for all index pairs; exact on band-limited h.
std::array<Field, 4> mixed_hessian(const Field& h) {
  const int n = h.grid().n;
  std::array<Field, 4> out;
  for (int a = 0; a < n; ++a) {
    Field da = spectral_derivative(h, a, DBar::Holomorphic);
    for (int b = 0; b < n; ++b)
      out[a * n + b] = spectral_derivative(da, b, DBar::Antiholomorphic);
  }
  return out;
}

}  // namespace

KahlerBackground::KahlerBackground(TorusGrid g)
    : grid(g), psi_ref(constant_field(g, 0.0)) {}

KahlerBackground::KahlerBackground(TorusGrid g, Field psi)
    : grid(g), psi_ref(std::move(psi)) {
  if (!(psi_ref.grid() == grid)) throw GridMismatch();
  if (!psi_ref.check_real()) throw Error("psi_ref must be real");
  assemble_metric(*this, constant_field(grid, 0.0));  // positivity check
}

MetricState assemble_metric(const KahlerBackground& bg, const Field& phi) {
  if (!(phi.grid() == bg.grid)) throw GridMismatch();
  const int n = bg.grid.n;
  const std::size_t m = bg.grid.points();

  Field h = bg.psi_ref + phi;
  std::array<Field, 4> hess = mixed_hessian(h);

  MetricState s{bg, phi, {}, {}, Field(bg.grid, Purity::Real), {},
                Field(bg.grid, Purity::Real), 0.0, 0.0};
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      s.g[a * n + b] = Field(bg.grid, Purity::Complex);
      s.ginv[a * n + b] = Field(bg.grid, Purity::Complex);
    }

  double min_ev = 1e300;
  std::size_t min_pt = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (n == 1) {
      const double g11 = 1.0 + hess[0][i].real();
      s.g[0][i] = g11;
      min_ev = std::min(min_ev, g11);
      if (g11 == min_ev) min_pt = i;
      s.det[i] = g11;
      s.ginv[0][i] = g11 > 0.0 ? 1.0 / g11 : 0.0;
    } else {
      const cd g00 = 1.0 + hess[0][i];
      const cd g01 = hess[1][i];
      const cd g10 = hess[2][i];
      const cd g11 = 1.0 + hess[3][i];
      // Hermitian 2x2: eigenvalues from trace and determinant.
      const double tr = g00.real() + g11.real();
      const double det = (g00 * g11 - g01 * g10).real();
      const double disc = std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
      const double ev = 0.5 * tr - disc;
      if (ev < min_ev) {
        min_ev = ev;
        min_pt = i;
      }
      s.g[0][i] = g00;
      s.g[1][i] = g01;
      s.g[2][i] = g10;
      s.g[3][i] = g11;
      s.det[i] = det;
      if (det != 0.0) {
        // ginv = conj(G^{-1}) so that g^{a bbar} g_{c bbar} = delta
        const cd i00 = g11 / det, i01 = -g01 / det;
        const cd i10 = -g10 / det, i11 = g00 / det;
        s.ginv[0][i] = std::conj(i00);
        s.ginv[1][i] = std::conj(i01);
        s.ginv[2][i] = std::conj(i10);
        s.ginv[3][i] = std::conj(i11);
      }
    }
  }
  s.min_eigenvalue = min_ev;
  if (min_ev <= 0.0) throw NonPositiveMetric(min_pt, min_ev);

  Field logdet(bg.grid, Purity::Real);
  for (std::size_t i = 0; i < m; ++i) logdet[i] = std::log(s.det[i].real());
  logdet = dealias(logdet);
  std::array<Field, 4> ric_hess = mixed_hessian(logdet);
  Field R(bg.grid, Purity::Complex);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      s.ric[a * n + b] = -1.0 * ric_hess[a * n + b];
      for (std::size_t i = 0; i < m; ++i)
        R[i] += s.ginv[a * n + b][i] * s.ric[a * n + b][i];
    }
  s.scalar = dealias(R.real_part());
  s.mean_scalar =
      integrate(s.scalar, s.det).real() / integrate(s.det).real();
  return s;
}

Field laplacian(const MetricState& s, const Field& f) {
  const int n = s.n();
  std::array<Field, 4> hess = mixed_hessian(f);
  Field out(s.grid(), Purity::Complex);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += s.ginv[a * n + b][i] * hess[a * n + b][i];
  return dealias(out);
}

Field trace_of(const MetricState& s, const MetricState& chi) {
  if (!(s.grid() == chi.grid())) throw GridMismatch();
  const int n = s.n();
  Field out(s.grid(), Purity::Complex);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += s.ginv[a * n + b][i] * chi.g[a * n + b][i];
  return dealias(out.real_part());
}

Field grad_pairing(const MetricState& s, const Field& v1, const Field& v2) {
  const int n = s.n();
  Field out(s.grid(), Purity::Complex);
  for (int a = 0; a < n; ++a) {
    Field da = spectral_derivative(v1, a, DBar::Holomorphic);
    for (int b = 0; b < n; ++b) {
      Field db = spectral_derivative(v2, b, DBar::Antiholomorphic);
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += s.ginv[a * n + b][i] * da[i] * db[i];
    }
  }
  return dealias(out);
}

TensorField l_operator(const MetricState& s, const Field& f) {
  const int n = s.n();
  TensorField t{s.grid(), n, {}};
  for (int a = 0; a < n; ++a) {
    Field raised(s.grid(), Purity::Complex);
    for (int m = 0; m < n; ++m) {
      Field dm = spectral_derivative(f, m, DBar::Antiholomorphic);
      for (std::size_t i = 0; i < raised.size(); ++i)
        raised[i] += s.ginv[a * n + m][i] * dm[i];
    }
    raised = dealias(raised);
    for (int b = 0; b < n; ++b)
      t.comp[a * n + b] = dealias(spectral_derivative(raised, b, DBar::Antiholomorphic));
  }
  return t;
}

Field tensor_norm_sq(const MetricState& s, const TensorField& t) {
  const int n = s.n();
  Field out(s.grid(), Purity::Real);
  for (std::size_t i = 0; i < out.size(); ++i) {
    cd acc{0.0, 0.0};
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d)
            acc += s.g[a * n + c][i] * s.ginv[d * n + b][i] * t.comp[a * n + b][i] *
                   std::conj(t.comp[c * n + d][i]);
    out[i] = acc.real();
  }
  return out;
}

Field hessian_pairing(const MetricState& s, const Field& a_fn, const Field& b_fn) {
  const int n = s.n();
  std::array<Field, 4> ha = mixed_hessian(a_fn);
  std::array<Field, 4> hb = mixed_hessian(b_fn);
  Field out(s.grid(), Purity::Complex);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += s.ginv[a * n + b][i] * s.ginv[c * n + d][i] * ha[a * n + d][i] *
                      hb[c * n + b][i];
  return dealias(out);
}

Field hessian_ricci_pairing(const MetricState& s, const Field& f) {
  const int n = s.n();
  std::array<Field, 4> hf = mixed_hessian(f);
  Field out(s.grid(), Purity::Complex);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += s.ginv[a * n + b][i] * s.ginv[c * n + d][i] * hf[a * n + d][i] *
                      s.ric[c * n + b][i];
  return dealias(out);
}

Field lichnerowicz(const MetricState& s, const Field& f) {
  return laplacian(s, laplacian(s, f)) + hessian_ricci_pairing(s, f) +
         grad_pairing(s, s.scalar, f);
}

Field lichnerowicz_bar(const MetricState& s, const Field& f) {
  return lichnerowicz(s, f.conj()).conj();
}

Field b_operator(const MetricState& s, const Field& u, const Field& v) {
  const int n = s.n();
  Field lu = laplacian(s, u);
  Field lv = laplacian(s, v);
  Field out = hessian_pairing(s, v, lu) + laplacian(s, hessian_pairing(s, v, u)) +
              hessian_pairing(s, lv, u);

  std::array<Field, 4> hu = mixed_hessian(u);
  std::array<Field, 4> hv = mixed_hessian(v);
  // term4: u_{,abar p} v_{,b pbar} Ric_{a bbar}
  // term5: u_{,pbar b} v_{,p abar} Ric_{a bbar}
  Field ricci_terms(s.grid(), Purity::Complex);
  for (std::size_t i = 0; i < ricci_terms.size(); ++i) {
    cd t4{0.0, 0.0}, t5{0.0, 0.0};
    for (int a = 0; a < n; ++a)
      for (int a2 = 0; a2 < n; ++a2)
        for (int b = 0; b < n; ++b)
          for (int b2 = 0; b2 < n; ++b2)
            for (int p = 0; p < n; ++p)
              for (int q = 0; q < n; ++q) {
                const cd ric = s.ric[a * n + b][i];
                t4 += s.ginv[a * n + a2][i] * s.ginv[b2 * n + b][i] *
                      s.ginv[p * n + q][i] * hu[p * n + a2][i] * hv[b2 * n + q][i] * ric;
                t5 += s.ginv[q * n + p][i] * s.ginv[b2 * n + b][i] *
                      s.ginv[a * n + a2][i] * hu[b2 * n + p][i] * hv[q * n + a2][i] * ric;
              }
    ricci_terms[i] = t4 + t5;
  }
  out += dealias(ricci_terms);
  return out;
}

double epsilon_ker(const MetricState& s) {
  // power iteration for the top of the spectrum of D on the dealiased band
  std::uint64_t state = 0x9e3779b97f4a7c15ull;
  auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
  };
  Field v(s.grid(), Purity::Real);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = next();
  v = dealias(v);
  double vnorm = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) vnorm += std::norm(v[i]);
  vnorm = std::sqrt(vnorm);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] /= vnorm;
  double lambda = 0.0;
  for (int it = 0; it < 25; ++it) {
    Field w = lichnerowicz(s, v).real_part();
    double norm = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) norm += std::norm(w[i]);
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    lambda = norm;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] /= norm;
    v = w;
  }
  return 1e-8 * lambda;
}

double leibniz_residual(const MetricState& s, const Field& v, const Field& xi,
                        double eps_ker_override) {
  const double eps = eps_ker_override > 0.0 ? eps_ker_override : epsilon_ker(s);
  const double dv = lichnerowicz(s, v).max_abs();
  const double dbv = lichnerowicz_bar(s, v).max_abs();
  const double defect = std::max(dv, dbv);
  if (defect > 10.0 * eps * std::max(1.0, v.max_abs()))
    throw KernelPreconditionViolated(defect);
  Field lhs = lichnerowicz(s, grad_pairing(s, v, xi));
  Field rhs = grad_pairing(s, v, lichnerowicz(s, xi)) + b_operator(s, v, xi);
  return (lhs - rhs).max_abs();
}

double commutator_residual(const MetricState& s, const Field& f) {
  Field a = lichnerowicz(s, lichnerowicz_bar(s, f));
  Field b = lichnerowicz_bar(s, lichnerowicz(s, f));
  return (a - b).max_abs();
}

std::string metric_state_to_json(const MetricState& s) {
  // FNV-1a over the background bytes
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&hash](const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ull;
    }
  };
  mix(&s.background.grid.n, sizeof(int));
  mix(&s.background.grid.N, sizeof(int));
  mix(s.background.psi_ref.values().data(), 16 * s.background.psi_ref.size());

  nlohmann::json j;
  j["background-hash"] = hash;
  j["phi"] = nlohmann::json::parse(to_json(s.phi));
  j["R"] = nlohmann::json::parse(to_json(s.scalar));
  j["min-metric-eigenvalue"] = s.min_eigenvalue;
  return j.dump();
}

}  // namespace klab

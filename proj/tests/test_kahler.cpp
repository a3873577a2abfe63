#include "doctest.h"
#include "klab/kahler.hpp"

#include <cmath>

using namespace klab;

namespace {

Field real_sample(const TorusGrid& g, const std::function<double(double, double)>& f) {
  return sample(g, [&](const std::array<double, 4>& x) {
           return cd{f(x[0], x[1]), 0.0};
         }).real_part();
}

double sup_diff(const Field& a, const Field& b) { return (a - b).max_abs(); }

// A mildly curved but safely positive state on the n=1 torus.
MetricState curved_state(int N = 32, double amp = 0.4) {
  TorusGrid g(1, N);
  KahlerBackground bg(g);
  Field phi = real_sample(g, [&](double x, double y) {
    return amp * std::cos(x) + 0.5 * amp * std::cos(x + y);
  });
  return assemble_metric(bg, phi);
}

}  // namespace

TEST_CASE("flat state has zero curvature and unit volume") {
  TorusGrid g(1, 16);
  KahlerBackground bg(g);
  MetricState s = assemble_metric(bg, Field(g, Purity::Real));
  CHECK(s.scalar.max_abs() < 1e-12);
  CHECK(sup_diff(s.det, constant_field(g, 1.0)) < 1e-12);
  CHECK(s.min_eigenvalue == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(s.mean_scalar) < 1e-12);
}

TEST_CASE("flat laplacian of cos x") {
  TorusGrid g(1, 16);
  MetricState s = assemble_metric(KahlerBackground(g), Field(g, Purity::Real));
  Field c = real_sample(g, [](double x, double) { return std::cos(x); });
  Field lap = laplacian(s, c);
  CHECK(sup_diff(lap, -0.25 * c) < 1e-12);
}

TEST_CASE("flat lichnerowicz is the squared laplacian") {
  TorusGrid g(1, 16);
  MetricState s = assemble_metric(KahlerBackground(g), Field(g, Purity::Real));
  Field c = real_sample(g, [](double x, double) { return std::cos(x); });
  Field d = lichnerowicz(s, c);
  CHECK(sup_diff(d, (1.0 / 16.0) * c) < 1e-12);

  TorusGrid g2(2, 8);
  MetricState s2 = assemble_metric(KahlerBackground(g2), Field(g2, Purity::Real));
  Field c2 = sample(g2, [](const std::array<double, 4>& x) {
               return cd{std::cos(x[2]), 0.0};
             }).real_part();
  CHECK(sup_diff(lichnerowicz(s2, c2), (1.0 / 16.0) * c2) < 1e-12);
}

TEST_CASE("scalar curvature linearization about the flat state") {
  // R(eps phi) = -lap_flat^2 (eps phi) + O(eps^2) with lap_flat = (1/4)(dxx+dyy)
  TorusGrid g(1, 32);
  KahlerBackground bg(g);
  Field phi = real_sample(g, [](double x, double y) {
    return std::cos(x) + 0.3 * std::cos(2.0 * y);
  });
  Field lin = real_sample(g, [](double x, double y) {
    // -lap^2 cos x = -(1/16)cos x ; -lap^2 cos 2y = -cos 2y
    return -(1.0 / 16.0) * std::cos(x) - 0.3 * std::cos(2.0 * y);
  });
  double prev = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double eps = std::pow(10.0, -2 - k);
    MetricState s = assemble_metric(bg, eps * phi);
    const double err = sup_diff(s.scalar, eps * lin) / eps;
    if (k > 0) CHECK(err < 0.2 * prev);  // first-order remainder shrinks like eps
    prev = err;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("mean scalar curvature vanishes cohomologically") {
  MetricState s = curved_state();
  CHECK(s.scalar.max_abs() > 1e-2);  // genuinely curved
  CHECK(std::abs(s.mean_scalar) < 1e-10);
}

TEST_CASE("non positive metric is rejected") {
  TorusGrid g(1, 16);
  KahlerBackground bg(g);
  Field phi = real_sample(g, [](double x, double) { return 5.0 * std::cos(x); });
  CHECK_THROWS_AS(assemble_metric(bg, phi), NonPositiveMetric);
}

TEST_CASE("trace against itself equals the dimension") {
  MetricState s = curved_state();
  Field tr = trace_of(s, s);
  CHECK(sup_diff(tr, constant_field(s.grid(), 1.0)) < 1e-10);
}

TEST_CASE("trace of the flat reference against a curved state") {
  MetricState s = curved_state();
  MetricState flat = assemble_metric(s.background, Field(s.grid(), Purity::Real));
  Field tr = trace_of(s, flat);
  // tr_phi omega_flat = 1/g_{1 1bar}; both sides real and positive
  double lo = 1e9;
  for (std::size_t i = 0; i < tr.size(); ++i) lo = std::min(lo, tr[i].real());
  CHECK(lo > 0.0);
  Field prod = tr * s.g[0];
  CHECK(sup_diff(prod, constant_field(s.grid(), 1.0)) < 1e-10);
}

TEST_CASE("lichnerowicz annihilates constants") {
  MetricState s = curved_state();
  Field one = constant_field(s.grid(), 1.0);
  CHECK(lichnerowicz(s, one).max_abs() < 1e-11);
  CHECK(lichnerowicz_bar(s, one).max_abs() < 1e-11);
}

TEST_CASE("lichnerowicz is self adjoint in the curved volume") {
  MetricState s = curved_state();
  TorusGrid g = s.grid();
  Field u = real_sample(g, [](double x, double y) { return std::sin(x) + 0.2 * std::cos(2 * y); });
  Field v = real_sample(g, [](double x, double y) { return std::cos(x + y); });
  cd a = inner_product(lichnerowicz(s, u), v, s.density());
  cd b = inner_product(u, lichnerowicz(s, v), s.density());
  CHECK(std::abs(a - b) < 1e-9 * std::max(1.0, std::abs(a)));
}

TEST_CASE("dirichlet identity: <Df, f> equals the L-tensor norm") {
  MetricState s = curved_state();
  Field f = real_sample(s.grid(), [](double x, double y) {
    return std::sin(x) * std::cos(y);
  });
  cd lhs = inner_product(lichnerowicz(s, f), f, s.density());
  TensorField lf = l_operator(s, f);
  cd rhs = integrate(tensor_norm_sq(s, lf), s.density());
  CHECK(lhs.real() == doctest::Approx(rhs.real()).epsilon(1e-7));
  CHECK(lhs.real() >= 0.0);
}

TEST_CASE("bar operator is the conjugate of D") {
  MetricState s = curved_state();
  Field f = sample(s.grid(), [](const std::array<double, 4>& x) {
    return cd{std::sin(x[0]), 0.4 * std::cos(x[1])};
  });
  Field lhs = lichnerowicz_bar(s, f);
  Field rhs = lichnerowicz(s, f.conj()).conj();
  CHECK(sup_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("D minus Dbar is first order in the gradient of R") {
  // (D - Dbar)f = <del R, dbar f> - <del f, dbar R>
  MetricState s = curved_state();
  Field f = real_sample(s.grid(), [](double x, double y) { return std::sin(x + 2 * y); });
  Field lhs = lichnerowicz(s, f) - lichnerowicz_bar(s, f);
  Field rhs = grad_pairing(s, s.scalar, f) - grad_pairing(s, f, s.scalar);
  CHECK(sup_diff(lhs, rhs) < 1e-8);
}

TEST_CASE("commutator vanishes at the flat state only") {
  TorusGrid g(1, 32);
  MetricState flat = assemble_metric(KahlerBackground(g), Field(g, Purity::Real));
  Field f = real_sample(g, [](double x, double y) { return std::sin(x) + std::cos(y); });
  CHECK(commutator_residual(flat, f) < 1e-10);
  MetricState s = curved_state();
  CHECK(commutator_residual(s, f) > 1e-6);
}

TEST_CASE("b operator is real for real arguments") {
  MetricState s = curved_state();
  Field u = real_sample(s.grid(), [](double x, double) { return std::cos(x); });
  Field v = real_sample(s.grid(), [](double x, double y) { return std::sin(y) + 0.1 * std::cos(x); });
  Field b = b_operator(s, u, v);
  CHECK(b.check_real(1e-9));
}

TEST_CASE("leibniz identity holds trivially on the kernel") {
  MetricState s = curved_state();
  Field v = constant_field(s.grid(), 2.0);
  Field xi = real_sample(s.grid(), [](double x, double y) { return std::sin(x) * std::sin(y); });
  CHECK(leibniz_residual(s, v, xi) < 1e-10);
}

TEST_CASE("leibniz precondition rejects non-kernel directions") {
  MetricState s = curved_state();
  Field v = real_sample(s.grid(), [](double x, double) { return std::cos(x); });
  Field xi = real_sample(s.grid(), [](double, double y) { return std::sin(y); });
  CHECK_THROWS_AS(leibniz_residual(s, v, xi), KernelPreconditionViolated);
}

TEST_CASE("epsilon_ker separates constants from the rest of the spectrum") {
  MetricState s = curved_state();
  const double eps = epsilon_ker(s);
  CHECK(eps > 0.0);
  Field one = constant_field(s.grid(), 1.0);
  CHECK(lichnerowicz(s, one).max_abs() < eps);
  // lowest nonzero flat eigenvalue is 1/16; curved state stays well above eps
  Field c = real_sample(s.grid(), [](double x, double) { return std::cos(x); });
  Field dc = lichnerowicz(s, c);
  CHECK(l2_norm(dc, s.density()) > 10.0 * eps * l2_norm(c, s.density()));
}

TEST_CASE("metric state json export") {
  MetricState s = curved_state(16, 0.2);
  std::string j = metric_state_to_json(s);
  CHECK(j.find("background-hash") != std::string::npos);
  CHECK(j.find("min-metric-eigenvalue") != std::string::npos);
  CHECK(j.find("\"R\"") != std::string::npos);
}

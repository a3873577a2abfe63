#pragma once

#include <array>

#include "klab/field.hpp"

namespace klab {

// Reference Kahler form omega = omega_flat + i del delbar psi_ref.
struct KahlerBackground {
  TorusGrid grid;
  Field psi_ref;  // real

  explicit KahlerBackground(TorusGrid g);
  KahlerBackground(TorusGrid g, Field psi);
};

// Tensor with one contravariant and one antiholomorphic covariant index,
// stored as n*n component fields: comp[a * n + b] = T^a_{bbar}.
struct TensorField {
  TorusGrid grid;
  int n = 1;
  std::array<Field, 4> comp;
};

// omega_phi = omega + i del delbar phi with cached pointwise tensors.
// Matrix layout: g[a * n + b] = g_{a bbar}; ginv[a * n + b] = g^{a bbar},
// so that sum_b g^{a bbar} g_{c bbar} = delta_{ac}.
struct MetricState {
  KahlerBackground background;
  Field phi;  // real
  std::array<Field, 4> g;
  std::array<Field, 4> ginv;
  Field det;  // real, > 0; the volume density for omega_phi^n/n!
  std::array<Field, 4> ric;
  Field scalar;           // R_phi, real, dealiased
  double min_eigenvalue;  // over all grid points
  double mean_scalar;     // discrete average of R in the omega_phi volume

  const TorusGrid& grid() const { return background.grid; }
  int n() const { return background.grid.n; }
  const Field& density() const { return det; }
};

// Throws NonPositiveMetric if omega_phi leaves the Kahler cone.
MetricState assemble_metric(const KahlerBackground& bg, const Field& phi);

// g^{a bbar} f_{,a bbar}
Field laplacian(const MetricState& s, const Field& f);

// tr_s chi = g_s^{a bbar} (g_chi)_{a bbar}
Field trace_of(const MetricState& s, const MetricState& chi);

// sum g^{a bbar} (d_a v1)(dbar_b v2)
Field grad_pairing(const MetricState& s, const Field& v1, const Field& v2);

// (Lf)^a_{bbar} = dbar_b (g^{a mbar} dbar_m f)
TensorField l_operator(const MetricState& s, const Field& f);
// |T|^2_phi as a real field
Field tensor_norm_sq(const MetricState& s, const TensorField& t);

// <i del delbar a, i del delbar b>_phi = g^{a bbar} g^{c dbar} a_{,a dbar} b_{,c bbar}
Field hessian_pairing(const MetricState& s, const Field& a, const Field& b);
// <i del delbar f, Ric>_phi
Field hessian_ricci_pairing(const MetricState& s, const Field& f);

// D f = Lap^2 f + <i del delbar f, Ric> + <del R, dbar f>
Field lichnerowicz(const MetricState& s, const Field& f);
// Dbar f = conj(D(conj f))
Field lichnerowicz_bar(const MetricState& s, const Field& f);

// Five-term bilinear operator B_phi(u, v)
Field b_operator(const MetricState& s, const Field& u, const Field& v);

// 1e-8 times an estimate of the largest eigenvalue of the discrete D
// (power iteration on the dealiased band).
double epsilon_ker(const MetricState& s);

// sup | D<del v, dbar xi> - <del v, dbar D xi> - B(v, xi) |.
// Requires ||Dv||, ||Dbar v|| below the kernel tolerance.
double leibniz_residual(const MetricState& s, const Field& v, const Field& xi,
                        double eps_ker_override = -1.0);

// sup | D(Dbar f) - Dbar(D f) |
double commutator_residual(const MetricState& s, const Field& f);

// JSON export {background-hash, phi, R, min-metric-eigenvalue}
std::string metric_state_to_json(const MetricState& s);

}  // namespace klab

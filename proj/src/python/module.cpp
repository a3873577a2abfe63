// Python bindings for the main operations: configuration, the verification
// suite, continuity-path tracking, operator spectra, and the toric helpers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "klab/config.hpp"
#include "klab/continuation.hpp"
#include "klab/functionals.hpp"
#include "klab/verify.hpp"

namespace py = pybind11;
using namespace klab;

namespace {

RunConfig parse(const std::string& text) {
  return text.empty() ? RunConfig{} : config_from_json(text);
}

ToricPotential potential_from(const std::vector<double>& h) {
  return ToricPotential(MomentGrid(static_cast<int>(h.size())), h);
}

py::dict record_dict(const ContinuationRecord& r) {
  py::dict d;
  d["t"] = r.t;
  d["residual"] = r.residual;
  d["mean_defect"] = r.mean_defect;
  d["newton_iters"] = r.newton_iters;
  d["iota"] = r.iota;
  d["orthogonality"] = r.orthogonality;
  d["reduced"] = r.reduced;
  d["q"] = r.q;
  return d;
}

std::unique_ptr<ContinuationProblem> problem_from(const RunConfig& c) {
  if (c.backend == "torus")
    return std::make_unique<TorusProblem>(background_of(c), c.twist);
  return std::make_unique<ToricProblem>(reference_of(c), c.twist);
}

Eigen::VectorXd anchor_from(const ContinuationProblem& p, const RunConfig& c) {
  if (c.backend == "torus") return Eigen::VectorXd::Zero(p.dim());
  const auto& tp = dynamic_cast<const ToricProblem&>(p);
  ToricPotential u0 = round_potential(tp.reference().grid);
  const double cstar = minimize_iota_on_orbit(u0, tp.reference());
  return tp.coordinates(orbit_action(u0, cstar));
}

}  // namespace

PYBIND11_MODULE(_klab, m) {
  m.doc() = "continuity-path laboratory";

  // Translators run newest-first, so the base class goes first and the
  // derived ConfigError wins for config problems.
  py::register_exception<Error>(m, "KlabError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("config_hash", [](const std::string& text) { return config_hash(parse(text)); },
        py::arg("config_json") = std::string(),
        "Canonical 16-hex-digit hash of a run configuration");

  m.def(
      "verify",
      [](const std::string& text) {
        const VerificationReport report = run_verification(parse(text));
        py::dict out;
        out["config_hash"] = report.config_hash;
        out["pass"] = report.all_pass();
        py::list checks;
        for (const auto& c : report.checks) {
          py::dict d;
          d["name"] = c.name;
          d["measured"] = c.measured;
          d["tol"] = c.tol;
          d["pass"] = c.pass;
          checks.append(d);
        }
        out["checks"] = checks;
        return out;
      },
      py::arg("config_json") = std::string(),
      "Run the identity suite for the configured backend");

  m.def(
      "track_path",
      [](const std::string& text) {
        const RunConfig c = parse(text);
        auto p = problem_from(c);
        Eigen::VectorXd q1 = anchor_from(*p, c);
        py::dict out;
        std::vector<ContinuationRecord> partial;
        try {
          auto recs = track_path(*p, q1, c.t_end, c.steps, c.solver, &partial);
          out["truncated"] = false;
          py::list rows;
          for (const auto& r : recs) rows.append(record_dict(r));
          out["records"] = rows;
        } catch (const PathTruncated& e) {
          out["truncated"] = true;
          out["last_good_t"] = e.last_good_t;
          py::list rows;
          for (const auto& r : partial) rows.append(record_dict(r));
          out["records"] = rows;
        }
        return out;
      },
      py::arg("config_json") = std::string(),
      "Track the continuity path t: 1 -> t_end; partial results on truncation");

  m.def(
      "spectrum",
      [](const std::string& text) {
        const RunConfig c = parse(text);
        auto p = problem_from(c);
        Eigen::VectorXd q1 = anchor_from(*p, c);
        const int n = p->dim();
        Eigen::MatrixXd D(n, n);
        for (int j = 0; j < n; ++j)
          D.col(j) = p->lichnerowicz_coords(q1, Eigen::VectorXd::Unit(n, j));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (D + D.transpose()));
        return std::vector<double>(es.eigenvalues().data(),
                                   es.eigenvalues().data() + n);
      },
      py::arg("config_json") = std::string(),
      "Eigenvalues of the discretized D at the anchor state, ascending");

  // toric helpers on node-value vectors (K = len(h), Chebyshev-Gauss nodes)
  m.def("moment_nodes", [](int K) {
    auto eng = cheb_engine(K);
    std::vector<double> x(K);
    for (int k = 0; k < K; ++k) x[k] = static_cast<double>(eng->nodes()[k]);
    return x;
  });
  m.def("abreu_scalar", [](const std::vector<double>& h) {
    return abreu_scalar(toric_geometry(potential_from(h)));
  });
  m.def("toric_iota", [](const std::vector<double>& h, const std::vector<double>& ref) {
    return toric_iota(potential_from(h), potential_from(ref));
  });
  m.def("minimize_iota_on_orbit",
        [](const std::vector<double>& h, const std::vector<double>& ref) {
          return minimize_iota_on_orbit(potential_from(h), potential_from(ref));
        });
  m.def("orbit_action", [](const std::vector<double>& h, double c) {
    return orbit_action(potential_from(h), c).h;
  });

  // torus scalar curvature from node values of psi_ref and phi
  m.def("torus_scalar_curvature",
        [](int n, int N, const std::vector<double>& psi, const std::vector<double>& phi) {
          TorusGrid grid(n, N);
          auto lift = [&grid](const std::vector<double>& v) {
            if (v.size() != grid.points())
              throw ConfigError("value list does not match the grid size");
            std::vector<cd> vals(v.begin(), v.end());
            return Field(grid, vals, Purity::Real);
          };
          MetricState s = assemble_metric(KahlerBackground{grid, lift(psi)}, lift(phi));
          std::vector<double> out(s.scalar.size());
          for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.scalar[i].real();
          return out;
        });
}

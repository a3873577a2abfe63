#include "klab/config.hpp"

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>

#include "json.hpp"

namespace klab {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError("config: " + msg); }

void expect_keys(const json& j, const std::string& where,
                 const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) bad("unknown key \"" + it.key() + "\" in " + where);
}

double num(const json& j, const std::string& name) {
  if (!j.is_number()) bad(name + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& name) {
  if (!j.is_number_integer()) bad(name + " must be an integer");
  return j.get<int>();
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("top level must be an object");
  expect_keys(j, "the top level",
              {"backend", "n", "N", "psi_ref", "K", "reference", "twist", "solver",
               "path", "verify-fields", "seed", "pool", "out"});

  RunConfig c;
  if (j.contains("backend")) {
    if (!j["backend"].is_string()) bad("backend must be a string");
    c.backend = j["backend"].get<std::string>();
  }
  if (j.contains("n")) c.n = integer(j["n"], "n");
  if (j.contains("N")) c.N = integer(j["N"], "N");
  if (j.contains("psi_ref")) {
    if (!j["psi_ref"].is_array()) bad("psi_ref must be an array of terms");
    c.psi_ref.clear();
    for (const auto& t : j["psi_ref"]) {
      expect_keys(t, "a psi_ref term", {"k", "amp", "form"});
      if (!t.contains("k") || !t["k"].is_array()) bad("psi_ref term needs an integer frequency array \"k\"");
      TrigTerm term;
      const auto& ks = t["k"];
      if (ks.size() < 1 || ks.size() > 4) bad("psi_ref frequency must have 1..4 entries");
      for (std::size_t a = 0; a < ks.size(); ++a) term.k[a] = integer(ks[a], "psi_ref frequency");
      term.amp = t.contains("amp") ? num(t["amp"], "psi_ref amp") : 0.0;
      if (t.contains("form")) {
        const std::string f = t["form"].get<std::string>();
        if (f != "cos" && f != "sin") bad("psi_ref form must be \"cos\" or \"sin\"");
        term.sine = (f == "sin");
      }
      c.psi_ref.push_back(term);
    }
  }
  if (j.contains("K")) c.K = integer(j["K"], "K");
  if (j.contains("reference")) {
    const auto& r = j["reference"];
    expect_keys(r, "reference", {"h", "bump"});
    if (r.contains("h")) {
      if (!r["h"].is_array()) bad("reference.h must be an array");
      for (const auto& v : r["h"]) c.h_ref.push_back(num(v, "reference.h entry"));
    }
    if (r.contains("bump")) {
      expect_keys(r["bump"], "reference.bump", {"amp", "tilt"});
      if (r["bump"].contains("amp")) c.bump_amp = num(r["bump"]["amp"], "bump amp");
      if (r["bump"].contains("tilt")) c.bump_tilt = num(r["bump"]["tilt"], "bump tilt");
    }
  }
  if (j.contains("twist")) {
    expect_keys(j["twist"], "twist", {"a", "b"});
    if (j["twist"].contains("a")) c.twist.a = num(j["twist"]["a"], "twist.a");
    if (j["twist"].contains("b")) c.twist.b = num(j["twist"]["b"], "twist.b");
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    expect_keys(s, "solver", {"tol", "max-iter", "fd-step", "trust-u", "trust-t", "dt-min"});
    if (s.contains("tol")) c.solver.tol = num(s["tol"], "solver.tol");
    if (s.contains("max-iter")) c.solver.max_iter = integer(s["max-iter"], "solver.max-iter");
    if (s.contains("fd-step")) c.solver.fd_step = num(s["fd-step"], "solver.fd-step");
    if (s.contains("trust-u")) c.solver.trust_u = num(s["trust-u"], "solver.trust-u");
    if (s.contains("trust-t")) c.solver.trust_t = num(s["trust-t"], "solver.trust-t");
    if (s.contains("dt-min")) c.solver.dt_min = num(s["dt-min"], "solver.dt-min");
  }
  if (j.contains("path")) {
    const auto& p = j["path"];
    expect_keys(p, "path", {"t-end", "steps"});
    if (p.contains("t-end")) c.t_end = num(p["t-end"], "path.t-end");
    if (p.contains("steps")) c.steps = integer(p["steps"], "path.steps");
  }
  if (j.contains("verify-fields")) c.verify_fields = integer(j["verify-fields"], "verify-fields");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) bad("seed must be a nonnegative integer");
    c.seed = j["seed"].get<unsigned long>();
  }
  if (j.contains("pool")) c.pool = integer(j["pool"], "pool");
  if (j.contains("out")) {
    if (!j["out"].is_string()) bad("out must be a string");
    c.out_dir = j["out"].get<std::string>();
  }

  validate_config(c);
  return c;
}

void validate_config(const RunConfig& c) {
  if (c.backend != "torus" && c.backend != "cp1")
    bad("backend must be \"torus\" or \"cp1\"");
  if (c.backend == "torus") {
    if (c.n != 1 && c.n != 2) bad("n must be 1 or 2");
    if (c.N < 8 || c.N > 256 || (c.N & (c.N - 1)) != 0)
      bad("N must be a power of two in [8, 256]");
    for (const auto& t : c.psi_ref)
      for (int a = 2 * c.n; a < 4; ++a)
        if (t.k[a] != 0) bad("psi_ref frequency uses an axis beyond 2n");
    if (c.twist.a != 0.0 || c.twist.b != 0.0)
      bad("the torus backend supports only a zero twist");
  } else {
    if (c.K < 8 || c.K > 512) bad("K must lie in [8, 512]");
    if (!c.h_ref.empty() && static_cast<int>(c.h_ref.size()) != c.K)
      bad("reference.h must have exactly K entries");
  }
  if (!(c.solver.tol > 0.0)) bad("solver.tol must be positive");
  if (!(c.solver.fd_step > 0.0)) bad("solver.fd-step must be positive");
  if (!(c.solver.trust_u > 0.0)) bad("solver.trust-u must be positive");
  if (!(c.solver.trust_t > 0.0)) bad("solver.trust-t must be positive");
  if (!(c.solver.dt_min > 0.0)) bad("solver.dt-min must be positive");
  if (c.solver.max_iter < 1) bad("solver.max-iter must be at least 1");
  if (!(c.t_end >= 0.5 && c.t_end < 1.0)) bad("path.t-end must lie in [0.5, 1)");
  if (c.steps < 2) bad("path.steps must be at least 2");
  if (c.verify_fields < 1) bad("verify-fields must be at least 1");
  if (c.pool < 1) bad("pool must be at least 1");
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["backend"] = c.backend;
  if (c.backend == "torus") {
    j["n"] = c.n;
    j["N"] = c.N;
    json terms = json::array();
    for (const auto& t : c.psi_ref)
      terms.push_back({{"k", t.k}, {"amp", t.amp}, {"form", t.sine ? "sin" : "cos"}});
    j["psi_ref"] = terms;
  } else {
    j["K"] = c.K;
    if (!c.h_ref.empty())
      j["reference"] = {{"h", c.h_ref}};
    else
      j["reference"] = {{"bump", {{"amp", c.bump_amp}, {"tilt", c.bump_tilt}}}};
  }
  j["twist"] = {{"a", c.twist.a}, {"b", c.twist.b}};
  j["solver"] = {{"tol", c.solver.tol},         {"max-iter", c.solver.max_iter},
                 {"fd-step", c.solver.fd_step}, {"trust-u", c.solver.trust_u},
                 {"trust-t", c.solver.trust_t}, {"dt-min", c.solver.dt_min}};
  j["path"] = {{"t-end", c.t_end}, {"steps", c.steps}};
  j["verify-fields"] = c.verify_fields;
  j["seed"] = c.seed;
  j["pool"] = c.pool;
  return j.dump();  // nlohmann objects iterate in sorted key order
}

std::string config_hash(const RunConfig& c) {
  const std::string s = config_to_json(c);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

KahlerBackground background_of(const RunConfig& c) {
  if (c.backend != "torus") bad("background_of needs the torus backend");
  TorusGrid grid(c.n, c.N);
  Field psi = sample(grid, [&c](const std::array<double, 4>& x) {
    double v = 0.0;
    for (const auto& t : c.psi_ref) {
      double phase = 0.0;
      for (int a = 0; a < 4; ++a) phase += t.k[a] * x[a];
      v += t.amp * (t.sine ? std::sin(phase) : std::cos(phase));
    }
    return cd(v, 0.0);
  });
  return KahlerBackground{grid, psi.real_part()};
}

ToricPotential reference_of(const RunConfig& c) {
  if (c.backend != "cp1") bad("reference_of needs the cp1 backend");
  MomentGrid g(c.K);
  if (!c.h_ref.empty()) return ToricPotential(g, c.h_ref);
  auto eng = cheb_engine(c.K);
  std::vector<double> h(c.K);
  for (int k = 0; k < c.K; ++k) {
    const double x = static_cast<double>(eng->nodes()[k]);
    h[k] = c.bump_amp * (1 - x * x) * (1 - x * x) * (1.0 + c.bump_tilt * x);
  }
  return ToricPotential(g, h);
}

}  // namespace klab

// klab: batch front door for the continuity-path laboratory.
// Subcommands: verify | path | energy | spectrum.
// Exit codes: 0 pass, 1 verification failure, 2 usage/config error,
// 3 truncated path.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "klab/config.hpp"
#include "klab/continuation.hpp"
#include "klab/functionals.hpp"
#include "klab/verify.hpp"

namespace {

using namespace klab;
namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_file;
  std::string out_dir;
  long long seed = -1;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig c;
  if (!args.config_file.empty()) {
    std::ifstream in(args.config_file);
    if (!in) throw ConfigError("cannot open config file " + args.config_file);
    std::stringstream buf;
    buf << in.rdbuf();
    c = config_from_json(buf.str());
  }
  if (!args.out_dir.empty()) c.out_dir = args.out_dir;
  if (args.seed >= 0) c.seed = static_cast<unsigned long>(args.seed);
  return c;
}

void write_file(const RunConfig& c, const std::string& name, const std::string& body) {
  fs::create_directories(c.out_dir);
  std::ofstream out(fs::path(c.out_dir) / name, std::ios::binary);
  out << body;
}

std::string hash_comment(const RunConfig& c) { return "# config " + config_hash(c) + "\n"; }

int cmd_verify(const RunConfig& c) {
  VerificationReport report = run_verification(c);
  std::cout << report.to_text();
  write_file(c, "verify.txt", report.to_text());
  write_file(c, "verify.json", report.to_json());
  return report.all_pass() ? 0 : 1;
}

// The anchor of the configured backend: the zero potential over the torus
// background, or the iota-minimized orbit point of the round metric on cp1.
Eigen::VectorXd anchor_of(const ContinuationProblem& p, const RunConfig& c) {
  if (c.backend == "torus") return Eigen::VectorXd::Zero(p.dim());
  const auto& tp = dynamic_cast<const ToricProblem&>(p);
  ToricPotential u0 = round_potential(tp.reference().grid);
  double cstar = minimize_iota_on_orbit(u0, tp.reference());
  return tp.coordinates(orbit_action(u0, cstar));
}

std::unique_ptr<ContinuationProblem> make_problem(const RunConfig& c) {
  if (c.backend == "torus")
    return std::make_unique<TorusProblem>(background_of(c), c.twist);
  return std::make_unique<ToricProblem>(reference_of(c), c.twist);
}

void write_path_files(const RunConfig& c, const std::vector<ContinuationRecord>& recs) {
  write_file(c, "path.jsonl", records_to_jsonl(recs));
  write_file(c, "path.csv", hash_comment(c) + records_to_csv(recs));
}

int cmd_path(const RunConfig& c) {
  auto problem = make_problem(c);
  Eigen::VectorXd q1 = anchor_of(*problem, c);
  std::vector<ContinuationRecord> partial;
  try {
    auto recs = track_path(*problem, q1, c.t_end, c.steps, c.solver, &partial);
    write_path_files(c, recs);
    std::cout << "path: " << recs.size() << " states, t " << recs.front().t << " -> "
              << recs.back().t << ", worst residual "
              << [&recs] {
                   double w = 0;
                   for (const auto& r : recs) w = std::max(w, r.residual);
                   return w;
                 }()
              << "\n";
    return 0;
  } catch (const PathTruncated& e) {
    write_path_files(c, partial);  // partial output preserved
    std::cout << "path truncated at t = " << e.last_good_t << " after "
              << partial.size() << " states\n";
    return 3;
  }
}

int cmd_energy(const RunConfig& c, const std::string& path_file) {
  const std::string file =
      path_file.empty() ? (fs::path(c.out_dir) / "path.jsonl").string() : path_file;
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open path file " + file);

  std::vector<double> ts;
  std::vector<Eigen::VectorXd> qs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("malformed path file: ") + e.what());
    }
    if (!j.contains("t") || !j.contains("q") || !j["q"].is_array())
      throw ConfigError("malformed path file: records need t and q");
    ts.push_back(j["t"].get<double>());
    std::vector<double> q = j["q"].get<std::vector<double>>();
    qs.push_back(Eigen::Map<const Eigen::VectorXd>(q.data(), (long)q.size()));
  }
  if (qs.size() < 3 || qs.size() % 2 == 0)
    throw ConfigError("energy needs an odd number of path samples, at least 3");

  const int m = static_cast<int>(qs.size());
  std::string scan;
  if (c.backend == "torus") {
    KahlerBackground bg = background_of(c);
    TorusProblem p(bg, c.twist);
    TorusPath path(bg);
    for (int j = 0; j < m; ++j) {
      if (p.dim() != qs[j].size()) throw ConfigError("path file does not match the config geometry");
      path.s.push_back(j / double(m - 1));
      path.phi.push_back(p.potential(qs[j]));
    }
    scan = energy_scan_csv(path, c.t_end, c.twist);
  } else {
    ToricProblem p(reference_of(c));
    ToricPath path(p.reference());
    for (int j = 0; j < m; ++j) {
      if (p.dim() != qs[j].size()) throw ConfigError("path file does not match the config geometry");
      path.s.push_back(j / double(m - 1));
      path.u.push_back(p.potential(qs[j]));
    }
    scan = toric_energy_scan_csv(path, c.t_end, c.twist);
  }
  write_file(c, "energy.csv", hash_comment(c) + scan);

  // Convexity log: E_K + (1-t) iota per sample and its second difference.
  std::istringstream rows(scan);
  std::string header;
  std::getline(rows, header);
  std::vector<double> s, val;
  while (std::getline(rows, line)) {
    std::istringstream cells(line);
    std::vector<double> v;
    std::string cell;
    while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
    // columns: s,I,J_chi,iota,K-energy,E_t,E_K
    s.push_back(v[0]);
    val.push_back(v[6] + (1.0 - c.t_end) * v[3]);
  }
  std::ostringstream conv;
  conv.precision(17);
  conv << hash_comment(c) << "s,EK-plus-iota,second-difference\n";
  for (std::size_t j = 0; j < s.size(); ++j) {
    conv << s[j] << "," << val[j] << ",";
    if (j > 0 && j + 1 < s.size())
      conv << (val[j + 1] - 2.0 * val[j] + val[j - 1]);
    else
      conv << 0.0;
    conv << "\n";
  }
  write_file(c, "convexity.csv", conv.str());
  std::cout << "energy: " << m << " samples scanned\n";
  return 0;
}

int cmd_spectrum(const RunConfig& c) {
  auto problem = make_problem(c);
  Eigen::VectorXd q1 = anchor_of(*problem, c);
  const int n = problem->dim();
  Eigen::MatrixXd D(n, n);
  for (int j = 0; j < n; ++j)
    D.col(j) = problem->lichnerowicz_coords(q1, Eigen::VectorXd::Unit(n, j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (D + D.transpose()));
  std::ostringstream out;
  out.precision(17);
  out << hash_comment(c) << "index,eigenvalue\n";
  for (int j = 0; j < n; ++j) out << j << "," << es.eigenvalues()[j] << "\n";
  write_file(c, "spectrum.csv", out.str());
  std::cout << "spectrum: " << n << " eigenvalues, smallest " << es.eigenvalues()[0]
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuity-path laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string path_file;
  auto add_common = [&args](CLI::App* sub) {
    sub->add_option("--config", args.config_file, "JSON run configuration");
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed, "random seed override");
  };
  CLI::App* verify = app.add_subcommand("verify", "run the identity suite");
  CLI::App* path = app.add_subcommand("path", "track the continuity path");
  CLI::App* energy = app.add_subcommand("energy", "energy scan along a tracked path");
  CLI::App* spectrum = app.add_subcommand("spectrum", "eigenvalues of D at the anchor");
  for (CLI::App* sub : {verify, path, energy, spectrum}) add_common(sub);
  energy->add_option("--path-file", path_file, "JSON-lines path log (default OUT/path.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const RunConfig c = load_config(args);
    if (app.got_subcommand(verify)) return cmd_verify(c);
    if (app.got_subcommand(path)) return cmd_path(c);
    if (app.got_subcommand(energy)) return cmd_energy(c, path_file);
    return cmd_spectrum(c);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

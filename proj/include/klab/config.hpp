#pragma once

#include <array>
#include <string>
#include <vector>

#include "klab/continuation.hpp"
#include "klab/kahler.hpp"
#include "klab/toric.hpp"

namespace klab {

// One trigonometric term of the torus background: amp * cos(k.x) or
// amp * sin(k.x) with integer frequencies, so backgrounds are reproducible
// in text form.
struct TrigTerm {
  std::array<int, 4> k{0, 0, 0, 0};
  double amp = 0.0;
  bool sine = false;
};

// A run configuration, parsed from a single JSON file.  Every key is
// optional and falls back to the defaults below; unknown keys are rejected.
struct RunConfig {
  std::string backend = "torus";  // "torus" | "cp1"

  // torus geometry
  int n = 1;
  int N = 32;
  std::vector<TrigTerm> psi_ref{{{1, 0, 0, 0}, 0.3, false}};

  // cp1 geometry: either explicit node values h_ref (length K) or the bump
  // family h = amp (1-x^2)^2 (1 + tilt x)
  int K = 64;
  std::vector<double> h_ref;
  double bump_amp = 0.01;
  double bump_tilt = 0.5;

  Twist twist{0.0, 0.0};
  SolverOptions solver{};
  double t_end = 0.9;
  int steps = 11;

  int verify_fields = 20;  // random probes per identity check
  unsigned long seed = 0;
  int pool = 1;  // solver pool size; t-solves stay ordered by t
  std::string out_dir = ".";
};

// Parse + validate.  Throws ConfigError with a human-readable message.
RunConfig config_from_json(const std::string& text);
void validate_config(const RunConfig& c);

// Canonical serialization (sorted keys, full precision); two configs hash
// equal iff they run identically.
std::string config_to_json(const RunConfig& c);
std::string config_hash(const RunConfig& c);  // 16 hex digits, FNV-1a

// Assembled inputs.
KahlerBackground background_of(const RunConfig& c);  // torus backend
ToricPotential reference_of(const RunConfig& c);     // cp1 backend

}  // namespace klab

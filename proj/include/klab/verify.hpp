#pragma once

#include <string>
#include <vector>

#include "klab/config.hpp"

namespace klab {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct VerificationReport {
  std::string config_hash;
  std::vector<CheckResult> checks;

  bool all_pass() const;
  // One line per check: "PASS|FAIL name measured tol", preceded by the
  // config hash.  Used both on stdout and in the written report.
  std::string to_text() const;
  std::string to_json() const;
};

// The identity suite for the configured backend: operator symmetry, the
// Dirichlet identity, positivity, kernel dimension, the product rule on
// kernel directions, the commutator at extremal states, finite-difference
// gradient checks for every functional kind, and the anchor orthogonality.
// Deterministic for a fixed config (the seed feeds all random probes).
VerificationReport run_verification(const RunConfig& c);

}  // namespace klab

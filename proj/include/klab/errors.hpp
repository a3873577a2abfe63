#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace klab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridMismatch : Error {
  GridMismatch() : Error("fields live on different grids") {}
};

// The potential left the Kahler cone: the candidate metric has a
// non-positive eigenvalue somewhere.
struct NonPositiveMetric : Error {
  std::size_t point;
  double min_eigenvalue;
  NonPositiveMetric(std::size_t pt, double ev)
      : Error("metric not positive at grid point " + std::to_string(pt) +
              " (min eigenvalue " + std::to_string(ev) + ")"),
        point(pt), min_eigenvalue(ev) {}
};

struct NonConvexPotential : Error {
  double point = 0.0;
  double margin = 0.0;
  NonConvexPotential() : Error("symplectic potential is not convex on (-1,1)") {}
  NonConvexPotential(double x, double m)
      : Error("symplectic potential is not convex near x = " + std::to_string(x) +
              " (margin " + std::to_string(m) + ")"),
        point(x), margin(m) {}
};

struct KernelPreconditionViolated : Error {
  double defect;
  explicit KernelPreconditionViolated(double d)
      : Error("||Dv|| exceeds the kernel tolerance (defect " +
              std::to_string(d) + ")"),
        defect(d) {}
};

struct NotExtremal : Error {
  double deviation = 0.0;
  NotExtremal() : Error("state is not extremal to tolerance") {}
  explicit NotExtremal(double dev)
      : Error("state is not extremal to tolerance (affine deviation " +
              std::to_string(dev) + ")"),
        deviation(dev) {}
};

struct UnsupportedTwist : Error {
  UnsupportedTwist() : Error("nonzero twist is not supported on this backend") {}
};

struct NoConvergence : Error {
  int iterations;
  double last_residual;
  NoConvergence(int it, double res)
      : Error("Newton failed to converge after " + std::to_string(it) +
              " iterations (residual " + std::to_string(res) + ")"),
        iterations(it), last_residual(res) {}
};

struct RootBracketFailure : Error {
  double target = 0.0;
  RootBracketFailure() : Error("failed to bracket the Legendre matching root") {}
  explicit RootBracketFailure(double t)
      : Error("failed to bracket a root near target " + std::to_string(t)),
        target(t) {}
};

struct LineSearchDiverged : Error {
  LineSearchDiverged() : Error("no bracket for the orbit minimum in |c| <= 10") {}
};

struct PathTruncated : Error {
  double last_good_t;
  explicit PathTruncated(double t)
      : Error("continuation path truncated at t = " + std::to_string(t)),
        last_good_t(t) {}
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace klab

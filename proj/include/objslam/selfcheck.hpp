#pragma once

// Finite-difference verification of every analytic Jacobian of both filters
// against the nonlinear error maps they linearize.

#include <cstdint>
#include <string>
#include <vector>

namespace objslam {

struct JacobianCheckEntry {
  std::string name;        // e.g. "riekf.G"
  double max_error = 0.0;  // worst relative Frobenius error over all trials
};

struct JacobianCheckReport {
  std::vector<JacobianCheckEntry> entries;
  std::size_t trials = 0;
  double tolerance = 0.0;
  bool passed = false;

  std::string format() const;
};

/// Compares F, G, H and both augmentation Jacobians of each filter to
/// central differences at `trials` random states. `negative_control` flips a
/// sign in one analytic block so the check must fail.
JacobianCheckReport check_jacobians(std::uint64_t seed, std::size_t trials = 100,
                                    bool negative_control = false, double tolerance = 1e-4);

}  // namespace objslam

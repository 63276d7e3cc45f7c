#pragma once

#include <array>
#include <string>

#include "objslam/filter.hpp"

namespace objslam {

struct GateDecision {
  bool accepted = false;
  /// |y(k)| / sqrt(S(k,k)) for each innovation component.
  std::array<double, 6> margins{};
  std::string diagnostic;
};

/// Component-wise sigma gate: accept iff |y(k)| < bound * sqrt(S(k,k)) for
/// all six components. A non positive-definite S is rejected.
GateDecision gate(const Innovation& inn, double bound = 3.0);

}  // namespace objslam

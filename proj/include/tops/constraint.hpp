#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tops {

enum class Side { below, at_or_above };

/// A half-space on one encoded column: below means x[i] < threshold,
/// at_or_above means x[i] >= threshold.
struct Constraint {
  std::size_t feature_index = 0;
  double threshold = 0.0;
  Side side = Side::below;

  bool accepts(std::span<const double> x) const {
    const double v = x[feature_index];
    return side == Side::below ? v < threshold : v >= threshold;
  }

  bool operator==(const Constraint&) const = default;
};

inline bool satisfies_all(std::span<const Constraint> cs, std::span<const double> x) {
  for (const auto& c : cs)
    if (!c.accepts(x)) return false;
  return true;
}

}  // namespace tops

#pragma once

#include <span>
#include <vector>

#include "gas_oracle/wei.hpp"

namespace gas_oracle {

/// A percentile expressed as lower + weight_percent / 100 * (upper - lower).
///
/// Keeping the two bracketing order statistics, and the weight scaled by 100,
/// lets callers compare integer prices against the interpolated value and
/// round it up exactly: for percent levels with a short decimal expansion
/// (2.5, 60, 84.13) weight_percent carries no rounding error.
struct InterpolatedWei {
  Wei lower;
  Wei upper;
  long double weight_percent = 0;  // in [0, 100)

  long double weight() const { return weight_percent / 100.0L; }

  long double value() const;
  /// Smallest integer wei >= value().
  Wei ceil() const;
  /// True iff price < value().
  bool is_above(Wei price) const;
};

/// Linear-interpolation ("inclusive") percentile of already sorted values.
///
/// rank = percent / 100 * (n - 1); result = v[floor(rank)] + frac(rank) * (v[floor(rank) + 1] - v[floor(rank)]).
/// Ranks within 1e-9 of an integer are snapped to it.
/// `percent` must lie in [0, 100]; `sorted` must be nonempty and ascending.
InterpolatedWei percentile_of_sorted(std::span<const Wei> sorted, double percent);

/// Copies, sorts and delegates to percentile_of_sorted.
InterpolatedWei percentile_of(std::span<const Wei> values, double percent);

std::vector<Wei> sorted_copy(std::span<const Wei> values);

}  // namespace gas_oracle

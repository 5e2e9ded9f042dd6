#include "gas_oracle/percentile.hpp"

#include <algorithm>
#include <cmath>

#include "gas_oracle/error.hpp"

namespace gas_oracle {

long double InterpolatedWei::value() const {
  return lower.to_long_double() + weight() * (upper - lower).to_long_double();
}

Wei InterpolatedWei::ceil() const {
  if (weight_percent == 0 || upper == lower) return lower;
  // ceil(weight_percent * gap / 100), corrected so the integer division is exact
  const long double scaled = weight_percent * (upper - lower).to_long_double();
  long double q = std::ceil(scaled / 100.0L);
  while (q > 0 && (q - 1) * 100.0L >= scaled) q -= 1;
  while (q * 100.0L < scaled) q += 1;
  return lower + Wei::ceil(q);
}

bool InterpolatedWei::is_above(Wei price) const {
  if (price < lower) return true;
  if (weight_percent == 0) return false;
  return (price - lower).to_long_double() * 100.0L < weight_percent * (upper - lower).to_long_double();
}

InterpolatedWei percentile_of_sorted(std::span<const Wei> sorted, double percent) {
  if (sorted.empty()) throw PreconditionError("percentile of an empty set");
  if (!(percent >= 0.0 && percent <= 100.0)) throw PreconditionError("percentile outside [0, 100]");

  const std::size_t n = sorted.size();
  // rank * 100; exact whenever percent * (n - 1) is representable.
  const long double scaled_rank = static_cast<long double>(percent) * static_cast<long double>(n - 1);
  auto lo = static_cast<std::size_t>(std::floor(scaled_rank / 100.0L));
  long double remainder = scaled_rank - 100.0L * static_cast<long double>(lo);
  if (remainder < 0) {
    --lo;
    remainder += 100.0L;
  } else if (remainder >= 100.0L) {
    ++lo;
    remainder -= 100.0L;
  }
  if (remainder < 1e-7L) {
    remainder = 0;
  } else if (remainder > 100.0L - 1e-7L) {
    ++lo;
    remainder = 0;
  }

  if (lo >= n - 1) return {sorted[n - 1], sorted[n - 1], 0};
  return {sorted[lo], sorted[lo + 1], remainder};
}

InterpolatedWei percentile_of(std::span<const Wei> values, double percent) {
  auto sorted = sorted_copy(values);
  return percentile_of_sorted(sorted, percent);
}

std::vector<Wei> sorted_copy(std::span<const Wei> values) {
  std::vector<Wei> out(values.begin(), values.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gas_oracle

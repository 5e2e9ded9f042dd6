#pragma once

#include <cstddef>
#include <span>

#include "gas_oracle/wei.hpp"

namespace gas_oracle {

/// Rolling-window empirical percentile oracle (GS-Express, Geth).
struct PercentileOracleConfig {
  std::size_t window_size = 200;
  double default_alpha = 50.0;  // percent

  /// Throws PreconditionError unless window_size >= 1 and 0 < default_alpha < 100.
  void validate() const;

  static PercentileOracleConfig gs_express(std::size_t window = 200) { return {window, 50.0}; }
  static PercentileOracleConfig geth(std::size_t window = 100) { return {window, 60.0}; }
};

/// alpha-th percentile of the window (linear interpolation), rounded up to integer wei.
/// Requires a nonempty window and 0 < alpha < 100.
Wei empirical_percentile_price(std::span<const Wei> window, double alpha_percent);

/// As above, but also insists that the window holds exactly `window_size`
/// values; a shorter window raises InsufficientHistory.
Wei empirical_percentile_price(std::span<const Wei> window, double alpha_percent, std::size_t window_size);

/// Quote for 0-based index `at`, using history[at - window_size, at).
/// Throws InsufficientHistory when at < window_size, PreconditionError when at > history.size().
Wei gs_express_quote(std::span<const Wei> history, std::size_t at, const PercentileOracleConfig& cfg,
                     double alpha_percent);
Wei gs_express_quote(std::span<const Wei> history, std::size_t at, const PercentileOracleConfig& cfg);

/// Geth: same rule at the configured default alpha (60 by default).
Wei geth_quote(std::span<const Wei> history, std::size_t at, const PercentileOracleConfig& cfg = PercentileOracleConfig::geth());

}  // namespace gas_oracle

#include "gas_oracle/baseline_oracles.hpp"

#include <string>

#include "gas_oracle/error.hpp"
#include "gas_oracle/percentile.hpp"

namespace gas_oracle {

void PercentileOracleConfig::validate() const {
  if (window_size < 1) throw PreconditionError("window_size must be >= 1");
  if (!(default_alpha > 0.0 && default_alpha < 100.0)) throw PreconditionError("default_alpha must lie in (0, 100)");
}

Wei empirical_percentile_price(std::span<const Wei> window, double alpha_percent) {
  if (!(alpha_percent > 0.0 && alpha_percent < 100.0)) throw PreconditionError("alpha must lie in (0, 100)");
  if (window.empty()) throw InsufficientHistory("empty percentile window");
  return percentile_of(window, alpha_percent).ceil();
}

Wei empirical_percentile_price(std::span<const Wei> window, double alpha_percent, std::size_t window_size) {
  if (window.size() < window_size)
    throw InsufficientHistory("percentile window holds " + std::to_string(window.size()) + " of " +
                              std::to_string(window_size) + " blocks");
  if (window.size() > window_size) throw PreconditionError("percentile window is larger than window_size");
  return empirical_percentile_price(window, alpha_percent);
}

Wei gs_express_quote(std::span<const Wei> history, std::size_t at, const PercentileOracleConfig& cfg,
                     double alpha_percent) {
  cfg.validate();
  if (at > history.size()) throw PreconditionError("quote index beyond the end of history");
  if (at < cfg.window_size)
    throw InsufficientHistory("need " + std::to_string(cfg.window_size) + " past blocks, have " + std::to_string(at));
  return empirical_percentile_price(history.subspan(at - cfg.window_size, cfg.window_size), alpha_percent,
                                    cfg.window_size);
}

Wei gs_express_quote(std::span<const Wei> history, std::size_t at, const PercentileOracleConfig& cfg) {
  return gs_express_quote(history, at, cfg, cfg.default_alpha);
}

Wei geth_quote(std::span<const Wei> history, std::size_t at, const PercentileOracleConfig& cfg) {
  return gs_express_quote(history, at, cfg, cfg.default_alpha);
}

}  // namespace gas_oracle

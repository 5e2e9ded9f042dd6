#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gas_oracle/baseline_oracles.hpp"
#include "gas_oracle/blocks.hpp"
#include "gas_oracle/gp_regression.hpp"

namespace gas_oracle {

// ---------------------------------------------------------------------------
// Metrics

/// T = 1 iff predicted >= actual (ties are successes).
bool success_indicator(Wei predicted, Wei actual);

/// Mean of the indicators. Throws PreconditionError when empty.
double success_rate(std::span<const std::uint8_t> indicators);

/// Mean predicted price in Gwei. Throws PreconditionError when empty.
double average_cost(std::span<const Wei> predicted_prices);

/// avg_cost_gwei / rate. Throws PreconditionError unless 0 < rate <= 1.
double ipw(double avg_cost_gwei, double rate);

/// Minimum over all length-m contiguous windows of the window mean, O(length).
/// Throws PreconditionError when m == 0 or the sequence is shorter than m.
double min_short_term_success(std::span<const std::uint8_t> indicators, std::size_t m);

// ---------------------------------------------------------------------------
// Oracles

/// Anything that quotes P_alpha for the next block from strictly past minimum prices.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual std::string name() const = 0;
  /// Past blocks needed before the first quote (the training window n).
  virtual std::size_t history_required() const = 0;
  virtual nlohmann::json config() const = 0;

  /// Quotes for prices[target] using prices[0, target), one per alpha (percent).
  virtual std::vector<Wei> quote(std::span<const Wei> prices, std::size_t target,
                                 std::span<const double> alphas) = 0;

  /// Stateful oracles must see consecutive targets and run on one thread.
  virtual bool sequential() const { return false; }
  /// Whether P_alpha is non-decreasing in alpha by construction.
  virtual bool monotone_in_alpha() const { return true; }
  /// Fresh copy with the same configuration, for parallel workers.
  virtual std::unique_ptr<Oracle> clone() const = 0;
};

/// GS-Express (and, with default_alpha 60 / window 100, Geth) over rolling windows.
class PercentileOracle : public Oracle {
 public:
  PercentileOracle(std::string name, PercentileOracleConfig config);
  static std::unique_ptr<PercentileOracle> gs_express(std::size_t window = 200);
  static std::unique_ptr<PercentileOracle> geth(std::size_t window = 100);

  std::string name() const override { return name_; }
  std::size_t history_required() const override { return config_.window_size; }
  nlohmann::json config() const override;
  std::vector<Wei> quote(std::span<const Wei> prices, std::size_t target, std::span<const double> alphas) override;
  std::unique_ptr<Oracle> clone() const override { return std::make_unique<PercentileOracle>(*this); }

 private:
  std::string name_;
  PercentileOracleConfig config_;
};

/// GP predictor over the last `window` blocks. With refit_every = k, hyperparameters
/// are fitted at targets window + j*k and reused for the following k - 1 targets,
/// so results do not depend on how targets are split between workers.
class GpOracle : public Oracle {
 public:
  explicit GpOracle(std::size_t window = 200, FitConfig fit_config = {});

  std::string name() const override { return "gp"; }
  std::size_t history_required() const override { return window_; }
  nlohmann::json config() const override;
  std::vector<Wei> quote(std::span<const Wei> prices, std::size_t target, std::span<const double> alphas) override;
  std::unique_ptr<Oracle> clone() const override;

  /// Posterior predictive for prices[target] (shares the refit schedule with quote()).
  PredictiveDistribution predictive(std::span<const Wei> prices, std::size_t target);
  const FitConfig& fit_config() const { return fit_config_; }

  /// Seconds spent in fitting/prediction so far, and the number of predictions.
  double seconds_spent() const { return seconds_; }
  std::size_t predictions() const { return predictions_; }

 private:
  std::size_t window_;
  FitConfig fit_config_;
  std::optional<std::pair<std::size_t, GpHyperparams>> cached_;  // (anchor target, hyperparameters)
  double seconds_ = 0.0;
  std::size_t predictions_ = 0;
};

// ---------------------------------------------------------------------------
// Backtest

struct PredictionRecord {
  std::size_t target_index = 0;  // 1-based position in the processed series
  BlockNumber block_number = 0;
  double alpha = 0.0;
  Wei predicted_price;
  Wei actual_y;
  bool success = false;
};

struct AlphaAggregate {
  double alpha = 0.0;
  double long_run_success_rate = 0.0;
  double average_cost_gwei = 0.0;
  std::optional<double> ipw;  // absent when the success rate is 0
  std::map<std::size_t, double> min_short_term;  // m -> min rate, for m <= record count
};

struct BacktestTiming {
  double wall_seconds = 0.0;
  double seconds_per_prediction = 0.0;
};

struct BacktestReport {
  std::string oracle;
  nlohmann::json config;
  std::vector<double> alphas;
  std::size_t train_size = 0;
  std::size_t first_target = 0;  // 1-based, inclusive
  std::size_t last_target = 0;   // 1-based, inclusive
  std::vector<std::vector<PredictionRecord>> records;  // [alpha][target]
  std::vector<AlphaAggregate> aggregates;              // [alpha]
  BacktestTiming timing;
  std::vector<std::string> invariant_violations;
  // Quote inversions across alpha for oracles that do not promise monotone quotes.
  std::vector<std::string> notes;

  std::size_t target_count() const { return records.empty() ? 0 : records.front().size(); }
};

inline constexpr std::array<std::size_t, 3> kShortTermWindows{25, 50, 100};

struct BacktestOptions {
  std::vector<double> alphas{50.0, 75.0, 84.0, 95.0};
  /// 1-based first target; 0 means the first predictable index (history_required + 1).
  std::size_t first_target = 0;
  /// Number of targets; 0 means through the end of the series.
  std::size_t count = 0;
  unsigned threads = 1;
};

/// Rolls the oracle over series targets [first_target, first_target + count):
/// target i is quoted from positions [i - n, i) and scored against y_i.
/// Parallel runs produce the same report as sequential ones.
/// Throws InsufficientHistory if the first target has fewer than n past blocks.
BacktestReport backtest(Oracle& oracle, const std::vector<ProcessedBlock>& series, const BacktestOptions& options);

/// Checks that success rates (and, with `quotes`, every per-target quote) are
/// non-decreasing in alpha. Returns one message per violation.
std::vector<std::string> check_monotonicity(const BacktestReport& report, bool quotes = true);
/// Per-target quote inversions only.
std::vector<std::string> check_quote_monotonicity(const BacktestReport& report);

/// Recomputes aggregates from records.
void compute_aggregates(BacktestReport& report);

}  // namespace gas_oracle

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "gas_oracle/evaluation.hpp"
#include "gas_oracle/gp_regression.hpp"

namespace gas_oracle {

struct HybridConfig {
  double alpha = 75.0;     // desired success rate, percent
  std::size_t n_gs = 30;   // GS-Express window
  std::size_t n_gp = 200;  // GP window
  double e = 0.1;          // allowed error band, rate units
  FitConfig gp;

  double alpha_rate() const { return alpha / 100.0; }
  /// Throws PreconditionError unless 0 < alpha < 100, 0 < e < 1 and n_gp >= n_gs >= 1.
  void validate() const;
};

/// Which branch of the switching rule produced a quote.
enum class HybridCase {
  below_band,  // R < alpha - e: max of GP and GS-Express quotes
  in_band,     // alpha - e <= R <= alpha + e: GS-Express quote
  above_band,  // R > alpha + e: GS-Express quote at a lowered alpha'
};

const char* to_string(HybridCase c);

/// Rolling state behind the hybrid oracle: the recent y history, plus for each of
/// the last n_gs resolved targets the GS-Express window that quoted it and the
/// actual y. Keeping the windows lets the success rate be recomputed for any alpha'.
class HybridState {
 public:
  explicit HybridState(HybridConfig config);

  const HybridConfig& config() const { return config_; }

  /// Appends y. If a GS-Express window was available, first records that
  /// window and whether its alpha-level quote covered y.
  void advance(Wei y);
  void advance(const ProcessedBlock& block) { advance(block.min_gas_price); }

  std::size_t history_size() const { return history_.size(); }
  /// Resolved targets currently held (at most n_gs).
  std::size_t targets_observed() const { return snapshots_.size(); }
  /// True once a full GP window and n_gs resolved targets are available.
  bool ready() const;

  /// Mean of the last n_gs GS-Express indicators at alpha. Throws InsufficientHistory before n_gs targets.
  double instant_success_rate() const;
  /// Success rate the stored windows would have achieved quoting at alpha_percent (in [0, 100]).
  double retrospective_success_rate(double alpha_percent) const;
  /// Lowered alpha' (percent) for the above-band case. Returns alpha when no alpha'
  /// in (0, alpha] lands the retrospective rate inside [alpha - e, alpha + e].
  /// Throws PreconditionError unless the instant rate is above the band.
  double find_alpha_prime() const;

  /// GS-Express quote from the last n_gs values at alpha_percent in [0, 100].
  Wei gs_quote(double alpha_percent) const;
  /// The last n_gp values, oldest first.
  std::vector<Wei> gp_window() const;
  std::vector<std::uint8_t> indicators() const;

 private:
  struct Snapshot {
    std::vector<Wei> sorted_window;
    Wei actual;
    bool success;
  };

  void require_full_buffer() const;

  HybridConfig config_;
  std::deque<Wei> history_;
  std::deque<Snapshot> snapshots_;
};

struct HybridDecision {
  Wei price;
  HybridCase regime = HybridCase::in_band;
  double instant_rate = 0.0;
  double alpha_used = 0.0;  // alpha' in the above-band case, alpha otherwise
  Wei gs_price;             // GS-Express quote at alpha
  std::optional<Wei> gp_price;
};

/// GP predictive for a window of prices; defaults to fit_and_predict_next with the state's FitConfig.
using GpPredictor = std::function<PredictiveDistribution(std::span<const Wei>)>;

/// Applies the switching rule to the current state. Requires state.ready().
HybridDecision hybrid_quote(const HybridState& state, const GpPredictor& gp = {});

/// Runs one HybridState per alpha over a series so the hybrid can be backtested.
/// Sequential: targets must arrive in order (a jump replays the needed history).
class HybridOracle : public Oracle {
 public:
  explicit HybridOracle(HybridConfig config);

  std::string name() const override { return "hybrid"; }
  std::size_t history_required() const override;
  nlohmann::json config() const override;
  std::vector<Wei> quote(std::span<const Wei> prices, std::size_t target, std::span<const double> alphas) override;
  bool sequential() const override { return true; }
  /// Each alpha runs its own switching state, so quotes need not be ordered in alpha.
  bool monotone_in_alpha() const override { return false; }
  std::unique_ptr<Oracle> clone() const override { return std::make_unique<HybridOracle>(config_); }

  /// Regime chosen at each quoted target, per alpha (in quote order since the last reset).
  const std::map<double, std::vector<HybridCase>>& regimes() const { return regimes_; }

 private:
  HybridConfig config_;
  std::map<double, HybridState> states_;
  std::map<double, std::vector<HybridCase>> regimes_;
  std::optional<std::size_t> last_target_;
  GpOracle gp_;
};

}  // namespace gas_oracle

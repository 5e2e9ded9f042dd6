#include "gas_oracle/hybrid_oracle.hpp"

#include <algorithm>
#include <string>

#include "gas_oracle/error.hpp"
#include "gas_oracle/percentile.hpp"

namespace gas_oracle {

namespace {

constexpr int kBisectionIterations = 40;

}  // namespace

void HybridConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 100.0)) throw PreconditionError("hybrid alpha must lie in (0, 100)");
  if (!(e > 0.0 && e < 1.0)) throw PreconditionError("hybrid error band e must lie in (0, 1)");
  if (n_gs < 1) throw PreconditionError("n_gs must be >= 1");
  if (n_gp < n_gs) throw PreconditionError("n_gp must be >= n_gs");
  if (n_gp < 2) throw PreconditionError("n_gp must be >= 2");
  gp.validate();
}

const char* to_string(HybridCase c) {
  switch (c) {
    case HybridCase::below_band: return "below_band";
    case HybridCase::in_band: return "in_band";
    case HybridCase::above_band: return "above_band";
  }
  return "unknown";
}

HybridState::HybridState(HybridConfig config) : config_(std::move(config)) { config_.validate(); }

void HybridState::advance(Wei y) {
  if (history_.size() >= config_.n_gs) {
    Snapshot snap;
    snap.sorted_window.assign(history_.end() - static_cast<std::ptrdiff_t>(config_.n_gs), history_.end());
    std::sort(snap.sorted_window.begin(), snap.sorted_window.end());
    snap.actual = y;
    snap.success = success_indicator(percentile_of_sorted(snap.sorted_window, config_.alpha).ceil(), y);
    snapshots_.push_back(std::move(snap));
    if (snapshots_.size() > config_.n_gs) snapshots_.pop_front();
  }
  history_.push_back(y);
  if (history_.size() > config_.n_gp) history_.pop_front();
}

bool HybridState::ready() const { return history_.size() >= config_.n_gp && snapshots_.size() >= config_.n_gs; }

void HybridState::require_full_buffer() const {
  if (snapshots_.size() < config_.n_gs)
    throw InsufficientHistory("instant success rate needs " + std::to_string(config_.n_gs) + " resolved targets, have " +
                              std::to_string(snapshots_.size()));
}

double HybridState::instant_success_rate() const {
  require_full_buffer();
  const auto hits = std::count_if(snapshots_.begin(), snapshots_.end(), [](const Snapshot& s) { return s.success; });
  return static_cast<double>(hits) / static_cast<double>(snapshots_.size());
}

double HybridState::retrospective_success_rate(double alpha_percent) const {
  require_full_buffer();
  std::size_t hits = 0;
  for (const auto& s : snapshots_) {
    if (success_indicator(percentile_of_sorted(s.sorted_window, alpha_percent).ceil(), s.actual)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(snapshots_.size());
}

double HybridState::find_alpha_prime() const {
  require_full_buffer();
  const double target = config_.alpha_rate();
  const double upper = target + config_.e;
  const double lower = target - config_.e;
  if (!(instant_success_rate() > upper))
    throw PreconditionError("find_alpha_prime requires the instant success rate to exceed alpha + e");

  // R is a non-decreasing step function of alpha'. Keep R(lo) <= upper < R(hi).
  double lo = 0.0, hi = config_.alpha;
  if (retrospective_success_rate(lo) > upper) return config_.alpha;
  for (int i = 0; i < kBisectionIterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (retrospective_success_rate(mid) > upper)
      hi = mid;
    else
      lo = mid;
  }
  // lo sits on the highest step not above the band; accept it only if it is inside.
  return retrospective_success_rate(lo) >= lower ? lo : config_.alpha;
}

Wei HybridState::gs_quote(double alpha_percent) const {
  if (history_.size() < config_.n_gs)
    throw InsufficientHistory("GS-Express quote needs " + std::to_string(config_.n_gs) + " blocks");
  std::vector<Wei> window(history_.end() - static_cast<std::ptrdiff_t>(config_.n_gs), history_.end());
  std::sort(window.begin(), window.end());
  return percentile_of_sorted(window, alpha_percent).ceil();
}

std::vector<Wei> HybridState::gp_window() const {
  if (history_.size() < config_.n_gp)
    throw InsufficientHistory("GP window needs " + std::to_string(config_.n_gp) + " blocks");
  return {history_.end() - static_cast<std::ptrdiff_t>(config_.n_gp), history_.end()};
}

std::vector<std::uint8_t> HybridState::indicators() const {
  std::vector<std::uint8_t> out;
  out.reserve(snapshots_.size());
  for (const auto& s : snapshots_) out.push_back(s.success ? 1 : 0);
  return out;
}

HybridDecision hybrid_quote(const HybridState& state, const GpPredictor& gp) {
  if (!state.ready())
    throw InsufficientHistory("hybrid quote needs " + std::to_string(state.config().n_gp) + " blocks of history and " +
                              std::to_string(state.config().n_gs) + " resolved targets");
  const auto& cfg = state.config();
  HybridDecision d;
  d.instant_rate = state.instant_success_rate();
  d.gs_price = state.gs_quote(cfg.alpha);
  d.alpha_used = cfg.alpha;

  const double target = cfg.alpha_rate();
  if (d.instant_rate < target - cfg.e) {
    d.regime = HybridCase::below_band;
    const auto window = state.gp_window();
    const auto dist = gp ? gp(window) : fit_and_predict_next(window, cfg.gp);
    d.gp_price = percentile_price(dist, cfg.alpha);
    d.price = std::max(*d.gp_price, d.gs_price);
  } else if (d.instant_rate <= target + cfg.e) {
    d.regime = HybridCase::in_band;
    d.price = d.gs_price;
  } else {
    d.regime = HybridCase::above_band;
    d.alpha_used = state.find_alpha_prime();
    d.price = state.gs_quote(d.alpha_used);
  }
  return d;
}

// ---------------------------------------------------------------------------

HybridOracle::HybridOracle(HybridConfig config) : config_(std::move(config)), gp_(config_.n_gp, config_.gp) {
  config_.validate();
}

std::size_t HybridOracle::history_required() const { return std::max(config_.n_gp, 2 * config_.n_gs); }

nlohmann::json HybridOracle::config() const {
  return {{"n_gs", config_.n_gs}, {"n_gp", config_.n_gp}, {"e", config_.e}, {"gp", gp_.config()}};
}

std::vector<Wei> HybridOracle::quote(std::span<const Wei> prices, std::size_t target, std::span<const double> alphas) {
  const std::size_t need = history_required();
  if (target < need || target > prices.size())
    throw InsufficientHistory("hybrid needs " + std::to_string(need) + " past blocks");

  bool same_alphas = states_.size() == alphas.size() &&
                     std::all_of(alphas.begin(), alphas.end(), [&](double a) { return states_.contains(a); });
  if (!same_alphas || !last_target_ || *last_target_ + 1 != target) {
    states_.clear();
    regimes_.clear();
    for (double a : alphas) {
      HybridConfig cfg = config_;
      cfg.alpha = a;
      auto [it, _] = states_.emplace(a, HybridState(cfg));
      for (std::size_t i = target - need; i < target; ++i) it->second.advance(prices[i]);
    }
  } else {
    for (auto& [a, state] : states_) state.advance(prices[target - 1]);
  }
  last_target_ = target;

  std::optional<PredictiveDistribution> gp_dist;
  GpPredictor shared_gp = [&](std::span<const Wei>) {
    if (!gp_dist) gp_dist = gp_.predictive(prices, target);
    return *gp_dist;
  };

  std::vector<Wei> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    const auto decision = hybrid_quote(states_.at(a), shared_gp);
    regimes_[a].push_back(decision.regime);
    out.push_back(decision.price);
  }
  return out;
}

}  // namespace gas_oracle

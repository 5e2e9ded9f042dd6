#include "gas_oracle/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "gas_oracle/error.hpp"
#include "gas_oracle/percentile.hpp"

namespace gas_oracle {

bool success_indicator(Wei predicted, Wei actual) { return predicted >= actual; }

double success_rate(std::span<const std::uint8_t> indicators) {
  if (indicators.empty()) throw PreconditionError("success_rate of an empty sequence");
  const auto hits = std::accumulate(indicators.begin(), indicators.end(), std::size_t{0},
                                    [](std::size_t acc, std::uint8_t t) { return acc + (t ? 1 : 0); });
  return static_cast<double>(hits) / static_cast<double>(indicators.size());
}

double average_cost(std::span<const Wei> predicted_prices) {
  if (predicted_prices.empty()) throw PreconditionError("average_cost of an empty sequence");
  uint128 total = 0;
  for (const auto& p : predicted_prices) total += p.value();
  return static_cast<double>(static_cast<long double>(total) / static_cast<long double>(predicted_prices.size()) *
                             1e-9L);
}

double ipw(double avg_cost_gwei, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw PreconditionError("ipw is undefined unless 0 < rate <= 1");
  return avg_cost_gwei / rate;
}

double min_short_term_success(std::span<const std::uint8_t> indicators, std::size_t m) {
  if (m == 0) throw PreconditionError("short-term window must be positive");
  if (indicators.size() < m) throw PreconditionError("sequence shorter than the short-term window");
  std::size_t sum = 0;
  for (std::size_t i = 0; i < m; ++i) sum += indicators[i] ? 1 : 0;
  std::size_t best = sum;
  for (std::size_t i = m; i < indicators.size(); ++i) {
    sum += (indicators[i] ? 1 : 0);
    sum -= (indicators[i - m] ? 1 : 0);
    best = std::min(best, sum);
  }
  return static_cast<double>(best) / static_cast<double>(m);
}

// ---------------------------------------------------------------------------

PercentileOracle::PercentileOracle(std::string name, PercentileOracleConfig config)
    : name_(std::move(name)), config_(config) {
  config_.validate();
}

std::unique_ptr<PercentileOracle> PercentileOracle::gs_express(std::size_t window) {
  return std::make_unique<PercentileOracle>("gs-express", PercentileOracleConfig::gs_express(window));
}

std::unique_ptr<PercentileOracle> PercentileOracle::geth(std::size_t window) {
  return std::make_unique<PercentileOracle>("geth", PercentileOracleConfig::geth(window));
}

nlohmann::json PercentileOracle::config() const {
  return {{"window_size", config_.window_size}, {"default_alpha", config_.default_alpha}};
}

std::vector<Wei> PercentileOracle::quote(std::span<const Wei> prices, std::size_t target,
                                         std::span<const double> alphas) {
  if (target < config_.window_size || target > prices.size())
    throw InsufficientHistory(name_ + " needs " + std::to_string(config_.window_size) + " past blocks");
  const auto sorted = sorted_copy(prices.subspan(target - config_.window_size, config_.window_size));
  std::vector<Wei> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    if (!(a > 0.0 && a < 100.0)) throw PreconditionError("alpha must lie in (0, 100)");
    out.push_back(percentile_of_sorted(sorted, a).ceil());
  }
  return out;
}

GpOracle::GpOracle(std::size_t window, FitConfig fit_config) : window_(window), fit_config_(std::move(fit_config)) {
  if (window_ < 2) throw PreconditionError("GP window must be >= 2");
  fit_config_.validate();
}

nlohmann::json GpOracle::config() const {
  const auto& c = fit_config_;
  return {{"window_size", window_},
          {"start_length_scales", c.start_length_scales},
          {"start_sigma_f", c.start_sigma_f},
          {"start_sigma_n", c.start_sigma_n},
          {"length_scale_bounds", {c.length_scale_bounds.lower, c.length_scale_bounds.upper}},
          {"sigma_f_bounds", {c.sigma_f_bounds.lower, c.sigma_f_bounds.upper}},
          {"sigma_n_bounds", {c.sigma_n_bounds.lower, c.sigma_n_bounds.upper}},
          {"jitter_ladder", c.jitter_ladder},
          {"max_iterations", c.max_iterations},
          {"normalize", c.normalize},
          {"refit_every", c.refit_every}};
}

std::unique_ptr<Oracle> GpOracle::clone() const { return std::make_unique<GpOracle>(window_, fit_config_); }

PredictiveDistribution GpOracle::predictive(std::span<const Wei> prices, std::size_t target) {
  if (target < window_ || target > prices.size())
    throw InsufficientHistory("gp needs " + std::to_string(window_) + " past blocks");
  const auto start = std::chrono::steady_clock::now();

  auto window_at = [&](std::size_t t) {
    return TrainingSeries::from_prices(prices.subspan(t - window_, window_), fit_config_.normalize);
  };
  const std::size_t k = fit_config_.refit_every;
  const std::size_t anchor = window_ + ((target - window_) / k) * k;

  PredictiveDistribution dist;
  if (anchor == target) {
    auto model = fit(window_at(target), fit_config_);
    cached_ = {target, model.hyperparams()};
    dist = model.predict_next();
  } else {
    if (!cached_ || cached_->first != anchor) cached_ = {anchor, fit(window_at(anchor), fit_config_).hyperparams()};
    dist = GpModel(window_at(target), cached_->second, fit_config_.jitter_ladder).predict_next();
  }

  seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++predictions_;
  return dist;
}

std::vector<Wei> GpOracle::quote(std::span<const Wei> prices, std::size_t target, std::span<const double> alphas) {
  const auto dist = predictive(prices, target);
  std::vector<Wei> out;
  out.reserve(alphas.size());
  for (double a : alphas) out.push_back(percentile_price(dist, a));
  return out;
}

// ---------------------------------------------------------------------------

void compute_aggregates(BacktestReport& report) {
  report.aggregates.clear();
  for (std::size_t a = 0; a < report.alphas.size(); ++a) {
    const auto& recs = report.records[a];
    AlphaAggregate agg;
    agg.alpha = report.alphas[a];
    if (!recs.empty()) {
      std::vector<std::uint8_t> ind;
      std::vector<Wei> prices;
      ind.reserve(recs.size());
      prices.reserve(recs.size());
      for (const auto& r : recs) {
        ind.push_back(r.success ? 1 : 0);
        prices.push_back(r.predicted_price);
      }
      agg.long_run_success_rate = success_rate(ind);
      agg.average_cost_gwei = average_cost(prices);
      if (agg.long_run_success_rate > 0) agg.ipw = ipw(agg.average_cost_gwei, agg.long_run_success_rate);
      for (auto m : kShortTermWindows) {
        if (recs.size() >= m) agg.min_short_term[m] = min_short_term_success(ind, m);
      }
    }
    report.aggregates.push_back(std::move(agg));
  }
}

namespace {

std::vector<std::size_t> alpha_order(const BacktestReport& report) {
  std::vector<std::size_t> order(report.alphas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return report.alphas[a] < report.alphas[b]; });
  return order;
}

}  // namespace

std::vector<std::string> check_quote_monotonicity(const BacktestReport& report) {
  constexpr std::size_t kMaxMessages = 20;
  std::vector<std::string> out;
  std::size_t violations = 0;
  const auto order = alpha_order(report);
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    const auto lo = order[k], hi = order[k + 1];
    const auto& rl = report.records[lo];
    const auto& rh = report.records[hi];
    for (std::size_t t = 0; t < rl.size() && t < rh.size(); ++t) {
      if (rl[t].predicted_price > rh[t].predicted_price && ++violations <= kMaxMessages)
        out.push_back(fmt::format("{}: target {} quotes {} wei at alpha {} but {} wei at alpha {}", report.oracle,
                                  rl[t].target_index, rl[t].predicted_price.to_string(), report.alphas[lo],
                                  rh[t].predicted_price.to_string(), report.alphas[hi]));
    }
  }
  if (violations > kMaxMessages)
    out.push_back(fmt::format("{}: {} further quote inversions omitted", report.oracle, violations - kMaxMessages));
  return out;
}

std::vector<std::string> check_monotonicity(const BacktestReport& report, bool quotes) {
  std::vector<std::string> out;
  const auto order = alpha_order(report);
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    const auto lo = order[k], hi = order[k + 1];
    if (lo < report.aggregates.size() && hi < report.aggregates.size() &&
        report.aggregates[lo].long_run_success_rate > report.aggregates[hi].long_run_success_rate)
      out.push_back(fmt::format("{}: success rate at alpha {} ({:.6f}) exceeds alpha {} ({:.6f})", report.oracle,
                                report.alphas[lo], report.aggregates[lo].long_run_success_rate, report.alphas[hi],
                                report.aggregates[hi].long_run_success_rate));
  }
  if (quotes) {
    auto q = check_quote_monotonicity(report);
    out.insert(out.end(), q.begin(), q.end());
  }
  return out;
}

BacktestReport backtest(Oracle& oracle, const std::vector<ProcessedBlock>& series, const BacktestOptions& options) {
  if (options.alphas.empty()) throw PreconditionError("backtest needs at least one alpha");
  for (double a : options.alphas) {
    if (!(a > 0.0 && a < 100.0)) throw PreconditionError("alpha must lie in (0, 100)");
    if (std::count(options.alphas.begin(), options.alphas.end(), a) > 1)
      throw PreconditionError("backtest alphas must be distinct");
  }
  const std::size_t n = oracle.history_required();
  const std::size_t first = options.first_target ? options.first_target : n + 1;
  if (first - 1 < n)
    throw InsufficientHistory(fmt::format("first target {} has only {} past blocks; {} needs {}", first, first - 1,
                                          oracle.name(), n));
  if (first > series.size())
    throw PreconditionError(fmt::format("first target {} is beyond the series ({} blocks)", first, series.size()));
  const std::size_t available = series.size() - (first - 1);
  const std::size_t count = options.count ? options.count : available;
  if (count > available) throw PreconditionError("backtest range extends past the end of the series");

  const auto prices = min_prices(series);
  const auto wall_start = std::chrono::steady_clock::now();

  // quotes[t][a]
  std::vector<std::vector<Wei>> quotes(count);
  auto run_range = [&](Oracle& o, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) quotes[t] = o.quote(prices, first - 1 + t, options.alphas);
  };

  const unsigned threads = std::max(1u, options.threads);
  if (oracle.sequential() || threads == 1 || count < 2 * threads) {
    run_range(oracle, 0, count);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::unique_ptr<Oracle>> workers_oracles;
    for (unsigned w = 0; w < threads; ++w) workers_oracles.push_back(oracle.clone());
    {
      std::vector<std::jthread> workers;
      for (unsigned w = 0; w < threads; ++w) {
        const std::size_t begin = count * w / threads, end = count * (w + 1) / threads;
        workers.emplace_back([&, w, begin, end] {
          try {
            run_range(*workers_oracles[w], begin, end);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  BacktestReport report;
  report.oracle = oracle.name();
  report.config = oracle.config();
  report.alphas = options.alphas;
  report.train_size = n;
  report.first_target = first;
  report.last_target = first + count - 1;
  report.records.assign(options.alphas.size(), {});
  for (std::size_t a = 0; a < options.alphas.size(); ++a) {
    auto& recs = report.records[a];
    recs.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
      const auto& block = series[first - 1 + t];
      const Wei predicted = quotes[t][a];
      recs.push_back({first + t, block.block_number, options.alphas[a], predicted, block.min_gas_price,
                      success_indicator(predicted, block.min_gas_price)});
    }
  }
  compute_aggregates(report);

  report.timing.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  report.timing.seconds_per_prediction = count ? report.timing.wall_seconds / static_cast<double>(count) : 0.0;
  report.invariant_violations = check_monotonicity(report, oracle.monotone_in_alpha());
  if (!oracle.monotone_in_alpha()) report.notes = check_quote_monotonicity(report);
  return report;
}

}  // namespace gas_oracle

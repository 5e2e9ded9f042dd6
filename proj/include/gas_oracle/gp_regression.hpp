#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gas_oracle/wei.hpp"

namespace gas_oracle {

/// Squared-exponential kernel parameters plus observation noise.
/// All three are in model (normalized) units except length_scale, which is in blocks.
struct GpHyperparams {
  double sigma_f = 1.0;
  double length_scale = 10.0;
  double sigma_n = 0.1;

  /// Throws PreconditionError unless sigma_f > 0, length_scale > 0, sigma_n >= 0.
  void validate() const;
  bool operator==(const GpHyperparams&) const = default;
};

/// Affine map between wei and model units: wei = shift + scale * model.
struct Normalization {
  double shift = 0.0;
  double scale = 1.0;

  double to_model(double wei) const { return (wei - shift) / scale; }
  double to_wei(double model) const { return shift + scale * model; }
};

/// Targets y_1..y_n observed at block indices 1..n.
class TrainingSeries {
 public:
  /// Centers on the sample mean and divides by the sample standard deviation
  /// when `normalize` is set (scale falls back to 1 wei for a constant window).
  static TrainingSeries from_prices(std::span<const Wei> prices, bool normalize = true);
  /// Targets already expressed in model units.
  static TrainingSeries from_model_units(std::vector<double> targets, Normalization normalization = {});

  std::size_t size() const { return static_cast<std::size_t>(targets_.size()); }
  /// Input of the i-th target (0-based), i.e. i + 1.
  static double input(std::size_t i) { return static_cast<double>(i + 1); }
  const Eigen::VectorXd& targets() const { return targets_; }
  const Normalization& normalization() const { return normalization_; }

 private:
  TrainingSeries(Eigen::VectorXd targets, Normalization normalization);

  Eigen::VectorXd targets_;
  Normalization normalization_;
};

/// sigma_f^2 * exp(-|x - x2|^2 / (2 l^2)).
double sq_exp_kernel(double x, double x2, const GpHyperparams& hp);

/// Multipliers of sigma_f^2 tried, in order, when K + sigma_n^2 I is not numerically positive definite.
inline constexpr std::array<double, 3> kDefaultJitterLadder{1e-10, 1e-8, 1e-6};

struct Covariance {
  Eigen::MatrixXd kernel;  // K, signal part only
  Eigen::MatrixXd factor;  // lower triangular L with L L^T = K + (sigma_n^2 + jitter) I
  double jitter = 0.0;     // absolute diagonal jitter that was needed (0 if none)
};

/// Builds K and factors K + sigma_n^2 I, escalating through `jitter_ladder`.
/// Throws NumericalError carrying a condition estimate when every rung fails.
Covariance build_covariance(const TrainingSeries& training, const GpHyperparams& hp,
                            std::span<const double> jitter_ladder = kDefaultJitterLadder);

/// log p(y | X, hp) = -1/2 y^T Ky^-1 y - 1/2 log|Ky| - n/2 log 2 pi, with Ky = K + sigma_n^2 I.
double log_marginal_likelihood(const TrainingSeries& training, const GpHyperparams& hp,
                               std::span<const double> jitter_ladder = kDefaultJitterLadder);

struct LikelihoodGradient {
  double value = 0.0;
  /// d value / d (log sigma_f, log length_scale, log sigma_n)
  std::array<double, 3> d_log_params{};
};

LikelihoodGradient log_marginal_likelihood_gradient(const TrainingSeries& training, const GpHyperparams& hp,
                                                    std::span<const double> jitter_ladder = kDefaultJitterLadder);

struct Bounds {
  double lower;
  double upper;
};

/// Hyperparameter search settings. Starts form a grid (every combination is tried).
struct FitConfig {
  std::vector<double> start_length_scales{2.0, 10.0, 50.0};
  std::vector<double> start_sigma_f{1.0};
  std::vector<double> start_sigma_n{0.1, 0.5};
  Bounds length_scale_bounds{0.5, 500.0};
  Bounds sigma_f_bounds{1e-3, 1e3};
  Bounds sigma_n_bounds{1e-4, 1e3};
  std::vector<double> jitter_ladder{kDefaultJitterLadder.begin(), kDefaultJitterLadder.end()};
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;
  bool normalize = true;
  /// Backtests refit hyperparameters every `refit_every` windows and reuse them in between.
  std::size_t refit_every = 1;

  void validate() const;
};

/// Posterior N(mean, std^2) of the latent price, in wei.
struct PredictiveDistribution {
  double mean = 0.0;
  double std = 0.0;
};

/// A GP conditioned on a training window: hyperparameters, factor and alpha = Ky^-1 y.
class GpModel {
 public:
  GpModel(TrainingSeries training, const GpHyperparams& hp,
          std::span<const double> jitter_ladder = kDefaultJitterLadder);

  const GpHyperparams& hyperparams() const { return hp_; }
  const TrainingSeries& training() const { return training_; }
  const Covariance& covariance() const { return covariance_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double log_marginal_likelihood() const { return log_marginal_likelihood_; }

  /// Posterior predictive at x_star, de-normalized to wei.
  PredictiveDistribution predict(double x_star) const;
  /// Posterior predictive for the block after the window (x = n + 1).
  PredictiveDistribution predict_next() const { return predict(static_cast<double>(training_.size() + 1)); }

 private:
  TrainingSeries training_;
  GpHyperparams hp_;
  Covariance covariance_;
  Eigen::VectorXd alpha_;
  double log_marginal_likelihood_ = 0.0;
};

/// Maximizes the log marginal likelihood over (log sigma_f, log l, log sigma_n)
/// with a bounded quasi-Newton search from every start in the config grid.
/// Deterministic. Throws FitError when every start fails numerically.
GpModel fit(const TrainingSeries& training, const FitConfig& config = {});

/// Convenience: fit on a window of prices and predict the next block.
PredictiveDistribution fit_and_predict_next(std::span<const Wei> window, const FitConfig& config = {});

inline PredictiveDistribution predict(const GpModel& model, double x_star) { return model.predict(x_star); }

/// mean + z(alpha / 100) * std, before rounding.
double percentile_value(const PredictiveDistribution& dist, double alpha_percent);

/// percentile_value rounded up to integer wei (negative values clamp to 0).
/// Throws PreconditionError unless 0 < alpha_percent < 100.
Wei percentile_price(const PredictiveDistribution& dist, double alpha_percent);

}  // namespace gas_oracle

#include "gas_oracle/gp_regression.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "gas_oracle/error.hpp"
#include "gas_oracle/normal.hpp"

namespace gas_oracle {

namespace {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

MatrixXd kernel_matrix(std::size_t n, const GpHyperparams& hp) {
  MatrixXd k(n, n);
  const double sf2 = hp.sigma_f * hp.sigma_f;
  const double inv_two_l2 = 1.0 / (2.0 * hp.length_scale * hp.length_scale);
  // K depends only on |i - j| for equally spaced inputs.
  VectorXd by_distance(n);
  for (std::size_t d = 0; d < n; ++d) by_distance[d] = sf2 * std::exp(-static_cast<double>(d * d) * inv_two_l2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k(i, j) = by_distance[i > j ? i - j : j - i];
  return k;
}

double condition_estimate(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
}

double log_det_from_factor(const MatrixXd& l) { return 2.0 * l.diagonal().array().log().sum(); }

// Log-space parameter vector (log sigma_f, log l, log sigma_n).
Vector3d to_log(const GpHyperparams& hp) {
  return {std::log(hp.sigma_f), std::log(hp.length_scale), std::log(hp.sigma_n)};
}
GpHyperparams from_log(const Vector3d& t) { return {std::exp(t[0]), std::exp(t[1]), std::exp(t[2])}; }

struct Box {
  Vector3d lower;
  Vector3d upper;
  Vector3d clamp(const Vector3d& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

// Negative log marginal likelihood in log-parameter space.
class Objective {
 public:
  Objective(const TrainingSeries& training, std::span<const double> ladder) : training_(training), ladder_(ladder) {}

  std::optional<double> value(const Vector3d& theta) const {
    try {
      return -log_marginal_likelihood(training_, from_log(theta), ladder_);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  }

  std::optional<Vector3d> gradient(const Vector3d& theta) const {
    try {
      auto g = log_marginal_likelihood_gradient(training_, from_log(theta), ladder_);
      return Vector3d(-g.d_log_params[0], -g.d_log_params[1], -g.d_log_params[2]);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  }

 private:
  const TrainingSeries& training_;
  std::span<const double> ladder_;
};

struct LocalResult {
  Vector3d theta;
  double value;
};

// Projected BFGS with Armijo backtracking. Variables sitting on a bound with the
// search direction pointing outward are frozen for that step.
std::optional<LocalResult> minimize_in_box(const Objective& objective, const Box& box, Vector3d x,
                                           const FitConfig& config) {
  constexpr double kArmijo = 1e-4;
  constexpr double kMaxStep = 3.0;
  constexpr double kBoundEps = 1e-12;

  x = box.clamp(x);
  auto f = objective.value(x);
  if (!f) return std::nullopt;
  auto g = objective.gradient(x);
  if (!g) return std::nullopt;

  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  bool h_is_identity = true;

  auto free_direction = [&](Vector3d d) {
    for (int i = 0; i < 3; ++i) {
      if ((x[i] <= box.lower[i] + kBoundEps && d[i] < 0) || (x[i] >= box.upper[i] - kBoundEps && d[i] > 0)) d[i] = 0;
    }
    return d;
  };

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const Vector3d projected = x - box.clamp(x - *g);
    if (projected.norm() < config.gradient_tolerance) break;

    Vector3d d = free_direction(-h * *g);
    if (g->dot(d) >= 0) {
      h.setIdentity();
      h_is_identity = true;
      d = free_direction(-*g);
      if (g->dot(d) >= 0) break;
    }
    if (d.norm() > kMaxStep) d *= kMaxStep / d.norm();

    double step = 1.0;
    std::optional<double> f_new;
    Vector3d x_new;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      x_new = box.clamp(x + step * d);
      f_new = objective.value(x_new);
      if (f_new && *f_new <= *f + kArmijo * g->dot(x_new - x)) break;
      f_new.reset();
    }
    if (!f_new) {
      if (h_is_identity) break;
      h.setIdentity();
      h_is_identity = true;
      continue;
    }
    auto g_new = objective.gradient(x_new);
    if (!g_new) break;

    const Vector3d s = x_new - x;
    const Vector3d y = *g_new - *g;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix3d left = Eigen::Matrix3d::Identity() - rho * s * y.transpose();
      h = left * h * left.transpose() + rho * s * s.transpose();
      h_is_identity = false;
    }
    const bool stalled = std::fabs(*f - *f_new) <= 1e-12 * (1.0 + std::fabs(*f));
    x = x_new;
    f = f_new;
    g = g_new;
    if (stalled) break;
  }
  return LocalResult{x, *f};
}

}  // namespace

void GpHyperparams::validate() const {
  if (!(sigma_f > 0) || !(length_scale > 0) || !(sigma_n >= 0) || !std::isfinite(sigma_f) ||
      !std::isfinite(length_scale) || !std::isfinite(sigma_n))
    throw PreconditionError("GP hyperparameters need sigma_f > 0, length_scale > 0, sigma_n >= 0");
}

void FitConfig::validate() const {
  auto check = [](const Bounds& b, const char* name) {
    if (!(b.lower > 0) || !(b.upper >= b.lower))
      throw PreconditionError(std::string("invalid bounds for ") + name);
  };
  check(length_scale_bounds, "length_scale");
  check(sigma_f_bounds, "sigma_f");
  check(sigma_n_bounds, "sigma_n");
  if (start_length_scales.empty() || start_sigma_f.empty() || start_sigma_n.empty())
    throw PreconditionError("FitConfig needs at least one start per hyperparameter");
  if (refit_every == 0) throw PreconditionError("refit_every must be >= 1");
  if (max_iterations < 0) throw PreconditionError("max_iterations must be >= 0");
}

TrainingSeries::TrainingSeries(VectorXd targets, Normalization normalization)
    : targets_(std::move(targets)), normalization_(normalization) {
  if (targets_.size() < 2) throw PreconditionError("a GP training series needs at least 2 points");
  if (!(normalization_.scale > 0)) throw PreconditionError("normalization scale must be positive");
}

TrainingSeries TrainingSeries::from_prices(std::span<const Wei> prices, bool normalize) {
  const auto n = static_cast<Eigen::Index>(prices.size());
  VectorXd wei(n);
  for (Eigen::Index i = 0; i < n; ++i) wei[i] = prices[static_cast<std::size_t>(i)].to_double();

  Normalization norm;
  if (normalize && n > 0) {
    norm.shift = wei.mean();
    const double var = n > 1 ? (wei.array() - norm.shift).square().sum() / static_cast<double>(n - 1) : 0.0;
    norm.scale = var > 0 ? std::sqrt(var) : 1.0;
  }
  VectorXd targets = (wei.array() - norm.shift) / norm.scale;
  return TrainingSeries(std::move(targets), norm);
}

TrainingSeries TrainingSeries::from_model_units(std::vector<double> targets, Normalization normalization) {
  return TrainingSeries(Eigen::Map<VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size())),
                        normalization);
}

double sq_exp_kernel(double x, double x2, const GpHyperparams& hp) {
  const double d = x - x2;
  return hp.sigma_f * hp.sigma_f * std::exp(-d * d / (2.0 * hp.length_scale * hp.length_scale));
}

Covariance build_covariance(const TrainingSeries& training, const GpHyperparams& hp,
                            std::span<const double> jitter_ladder) {
  hp.validate();
  const auto n = training.size();
  Covariance cov;
  cov.kernel = kernel_matrix(n, hp);

  MatrixXd ky = cov.kernel;
  ky.diagonal().array() += hp.sigma_n * hp.sigma_n;
  const double sf2 = hp.sigma_f * hp.sigma_f;

  for (std::size_t rung = 0; rung <= jitter_ladder.size(); ++rung) {
    const double jitter = rung == 0 ? 0.0 : jitter_ladder[rung - 1] * sf2;
    MatrixXd attempt = ky;
    attempt.diagonal().array() += jitter;
    Eigen::LLT<MatrixXd> llt(attempt);
    if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0).all() &&
        llt.matrixLLT().allFinite()) {
      cov.factor = llt.matrixL();
      cov.jitter = jitter;
      return cov;
    }
  }
  throw NumericalError("K + sigma_n^2 I is not positive definite even with the largest jitter", condition_estimate(ky));
}

double log_marginal_likelihood(const TrainingSeries& training, const GpHyperparams& hp,
                               std::span<const double> jitter_ladder) {
  const auto cov = build_covariance(training, hp, jitter_ladder);
  const auto l = cov.factor.triangularView<Eigen::Lower>();
  const VectorXd half = l.solve(training.targets());  // L^-1 y
  const double n = static_cast<double>(training.size());
  return -0.5 * half.squaredNorm() - 0.5 * log_det_from_factor(cov.factor) - 0.5 * n * kLog2Pi;
}

LikelihoodGradient log_marginal_likelihood_gradient(const TrainingSeries& training, const GpHyperparams& hp,
                                                    std::span<const double> jitter_ladder) {
  const auto cov = build_covariance(training, hp, jitter_ladder);
  const auto n = static_cast<Eigen::Index>(training.size());
  const auto l = cov.factor.triangularView<Eigen::Lower>();
  const VectorXd& y = training.targets();

  MatrixXd l_inv = MatrixXd::Identity(n, n);
  l.solveInPlace(l_inv);
  const MatrixXd ky_inv = l_inv.transpose() * l_inv;
  const VectorXd alpha = ky_inv * y;

  LikelihoodGradient out;
  out.value = -0.5 * y.dot(alpha) - 0.5 * log_det_from_factor(cov.factor) - 0.5 * static_cast<double>(n) * kLog2Pi;

  // dL/dtheta = 1/2 tr(W dK/dtheta), W = alpha alpha^T - Ky^-1.
  // Jitter is proportional to sigma_f^2, so it scales with the signal term.
  const double inv_l2 = 1.0 / (hp.length_scale * hp.length_scale);
  double d_sf = 0.0, d_l = 0.0, d_sn = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = alpha[i] * alpha[j] - ky_inv(i, j);
      const double k = cov.kernel(i, j);
      const double dist = static_cast<double>(i - j);
      d_sf += w * 2.0 * k;
      d_l += w * k * dist * dist * inv_l2;
    }
    const double w_diag = alpha[j] * alpha[j] - ky_inv(j, j);
    d_sf += w_diag * 2.0 * cov.jitter;
    d_sn += w_diag * 2.0 * hp.sigma_n * hp.sigma_n;
  }
  out.d_log_params = {0.5 * d_sf, 0.5 * d_l, 0.5 * d_sn};
  return out;
}

GpModel::GpModel(TrainingSeries training, const GpHyperparams& hp, std::span<const double> jitter_ladder)
    : training_(std::move(training)), hp_(hp), covariance_(build_covariance(training_, hp_, jitter_ladder)) {
  const auto l = covariance_.factor.triangularView<Eigen::Lower>();
  const VectorXd half = l.solve(training_.targets());
  alpha_ = covariance_.factor.transpose().triangularView<Eigen::Upper>().solve(half);
  log_marginal_likelihood_ = -0.5 * half.squaredNorm() - 0.5 * log_det_from_factor(covariance_.factor) -
                             0.5 * static_cast<double>(training_.size()) * kLog2Pi;
}

PredictiveDistribution GpModel::predict(double x_star) const {
  const auto n = static_cast<Eigen::Index>(training_.size());
  VectorXd k_star(n);
  for (Eigen::Index i = 0; i < n; ++i)
    k_star[i] = sq_exp_kernel(x_star, TrainingSeries::input(static_cast<std::size_t>(i)), hp_);

  const double mean = k_star.dot(alpha_);
  const VectorXd v = covariance_.factor.triangularView<Eigen::Lower>().solve(k_star);
  const double sf2 = hp_.sigma_f * hp_.sigma_f;
  double var = sf2 - v.squaredNorm();
  if (var < 0) {
    // Rounding can push an interpolating posterior slightly negative.
    if (var < -1e-6 * sf2)
      throw NumericalError("negative predictive variance", condition_estimate(covariance_.kernel));
    var = 0;
  }
  const auto& norm = training_.normalization();
  return {norm.to_wei(mean), norm.scale * std::sqrt(var)};
}

GpModel fit(const TrainingSeries& training, const FitConfig& config) {
  config.validate();
  const Box box{{std::log(config.sigma_f_bounds.lower), std::log(config.length_scale_bounds.lower),
                 std::log(config.sigma_n_bounds.lower)},
                {std::log(config.sigma_f_bounds.upper), std::log(config.length_scale_bounds.upper),
                 std::log(config.sigma_n_bounds.upper)}};
  const Objective objective(training, config.jitter_ladder);

  std::optional<LocalResult> best;
  for (double l0 : config.start_length_scales) {
    for (double sf0 : config.start_sigma_f) {
      for (double sn0 : config.start_sigma_n) {
        auto local = minimize_in_box(objective, box, to_log({sf0, l0, sn0}), config);
        if (local && (!best || local->value < best->value)) best = local;
      }
    }
  }
  if (!best) throw FitError("GP fit failed: every optimizer start hit a numerical failure");
  return GpModel(training, from_log(best->theta), config.jitter_ladder);
}

PredictiveDistribution fit_and_predict_next(std::span<const Wei> window, const FitConfig& config) {
  return fit(TrainingSeries::from_prices(window, config.normalize), config).predict_next();
}

double percentile_value(const PredictiveDistribution& dist, double alpha_percent) {
  if (!(alpha_percent > 0.0 && alpha_percent < 100.0)) throw PreconditionError("alpha must lie in (0, 100)");
  return dist.mean + inverse_normal_cdf(alpha_percent / 100.0) * dist.std;
}

Wei percentile_price(const PredictiveDistribution& dist, double alpha_percent) {
  return Wei::ceil(static_cast<long double>(percentile_value(dist, alpha_percent)));
}

}  // namespace gas_oracle

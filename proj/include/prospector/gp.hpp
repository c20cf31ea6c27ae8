#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "prospector/common.hpp"

namespace prospector::gp {

enum class MaternOrder { Half, ThreeHalves, FiveHalves };

struct KernelParams {
  double marginal_std = 0.1;
  double correlation_length = 3.0;
  MaternOrder order = MaternOrder::ThreeHalves;

  void validate() const;
  double variance() const { return marginal_std * marginal_std; }
};

/// Diagonal jitter added before every factorization.
inline constexpr double kJitter = 1e-10;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point to_point(Cell c) { return {static_cast<double>(c.x), static_cast<double>(c.y)}; }
inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct ObservationSet {
  std::vector<Point> locations;
  std::vector<double> values;
  double noise_std = 0.0;
};

using MeanFn = std::function<double(const Point&)>;

struct Prediction {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Matern covariance at lag `d` (grid cells). Throws std::domain_error for d < 0.
double matern_cov(double d, const KernelParams& k);

Eigen::MatrixXd gram(std::span<const Point> a, std::span<const Point> b, const KernelParams& k);

/// Cholesky factor of the observation covariance K + noise^2 I for a fixed
/// set of locations. Everything that depends only on the locations is
/// computed once; mean functions and values can then vary cheaply.
class Conditioner {
 public:
  Conditioner() = default;
  Conditioner(std::vector<Point> locations, double noise_std, const KernelParams& k);

  std::size_t size() const { return locations_.size(); }
  const std::vector<Point>& locations() const { return locations_; }
  const KernelParams& kernel() const { return kernel_; }
  double noise_std() const { return noise_std_; }

  /// log N(residuals; 0, K + noise^2 I).
  double log_density(std::span<const double> residuals) const;
  /// (K + noise^2 I)^{-1} residuals.
  Eigen::VectorXd solve(std::span<const double> residuals) const;
  /// Posterior (mean offset, variance) at `query` given residuals at the locations.
  Prediction predict(std::span<const Point> query, std::span<const double> residuals) const;
  /// Posterior variance only (it does not depend on the observed values).
  std::vector<double> predictive_variance(std::span<const Point> query) const;

 private:
  std::vector<Point> locations_;
  double noise_std_ = 0.0;
  KernelParams kernel_{};
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
};

Prediction krige_predict(const ObservationSet& obs, std::span<const Point> query, const MeanFn& mean_fn,
                         const KernelParams& k);

double log_marginal(const ObservationSet& obs, const MeanFn& mean_fn, const KernelParams& k);

/// Zero-mean GP prior over every cell of a grid, factorized once.
class GridPrior {
 public:
  GridPrior(GridShape shape, const KernelParams& k);

  GridShape shape() const { return shape_; }
  const KernelParams& kernel() const { return kernel_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }

  /// Unconditional zero-mean draw over the grid (row-major).
  Eigen::VectorXd sample(RngStream& rng) const;

  /// Zero-mean draw conditioned on noisy residual observations at the given
  /// cell indices (conditioning by kriging the residual of an unconditional draw).
  Eigen::VectorXd conditional_sample(std::span<const int> obs_index, std::span<const double> residuals,
                                     const Conditioner& cond, RngStream& rng) const;

 private:
  GridShape shape_;
  KernelParams kernel_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
};

/// Process-wide cache of grid priors keyed by shape and kernel. Thread-safe.
std::shared_ptr<const GridPrior> shared_grid_prior(GridShape shape, const KernelParams& k);

}  // namespace prospector::gp

#include "prospector/gp.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

namespace prospector::gp {

void KernelParams::validate() const {
  if (!(marginal_std > 0.0)) throw std::invalid_argument("kernel marginal_std must be > 0");
  if (!(correlation_length > 0.0)) throw std::invalid_argument("kernel correlation_length must be > 0");
}

double matern_cov(double d, const KernelParams& k) {
  if (d < 0.0 || std::isnan(d)) throw std::domain_error("matern_cov: negative distance " + std::to_string(d));
  const double s2 = k.variance();
  const double r = d / k.correlation_length;
  switch (k.order) {
    case MaternOrder::Half:
      return s2 * std::exp(-r);
    case MaternOrder::ThreeHalves: {
      const double a = std::numbers::sqrt3 * r;
      return s2 * (1.0 + a) * std::exp(-a);
    }
    case MaternOrder::FiveHalves: {
      const double a = std::sqrt(5.0) * r;
      return s2 * (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
  }
  return 0.0;
}

Eigen::MatrixXd gram(std::span<const Point> a, std::span<const Point> b, const KernelParams& k) {
  Eigen::MatrixXd g(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) g(i, j) = matern_cov(distance(a[i], b[j]), k);
  return g;
}

Conditioner::Conditioner(std::vector<Point> locations, double noise_std, const KernelParams& k)
    : locations_(std::move(locations)), noise_std_(noise_std), kernel_(k) {
  k.validate();
  if (noise_std < 0.0) throw std::invalid_argument("noise_std must be >= 0");
  const auto n = static_cast<Eigen::Index>(locations_.size());
  if (n == 0) return;
  Eigen::MatrixXd cov = gram(locations_, locations_, k);
  cov.diagonal().array() += noise_std * noise_std + kJitter;
  llt_.compute(cov);
  if (llt_.info() != Eigen::Success)
    throw NumericalError("observation covariance is not positive definite");
  const Eigen::MatrixXd& l = llt_.matrixLLT();
  log_det_ = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pivot = l(i, i);
    // Pivots at jitter scale mean two observations carry the same information.
    if (pivot * pivot < 100.0 * kJitter)
      throw NumericalError("observation covariance is numerically singular near location " + std::to_string(i) +
                           " (duplicate locations without noise?)");
    log_det_ += 2.0 * std::log(pivot);
  }
}

double Conditioner::log_density(std::span<const double> residuals) const {
  if (residuals.size() != size()) throw std::invalid_argument("residual count does not match locations");
  if (size() == 0) return 0.0;
  Eigen::Map<const Eigen::VectorXd> r(residuals.data(), static_cast<Eigen::Index>(residuals.size()));
  const Eigen::VectorXd z = llt_.matrixL().solve(r);
  const double n = static_cast<double>(size());
  return -0.5 * z.squaredNorm() - 0.5 * log_det_ - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd Conditioner::solve(std::span<const double> residuals) const {
  if (residuals.size() != size()) throw std::invalid_argument("residual count does not match locations");
  if (size() == 0) return {};
  Eigen::Map<const Eigen::VectorXd> r(residuals.data(), static_cast<Eigen::Index>(residuals.size()));
  return llt_.solve(r);
}

Prediction Conditioner::predict(std::span<const Point> query, std::span<const double> residuals) const {
  Prediction out;
  out.mean.assign(query.size(), 0.0);
  out.variance = predictive_variance(query);
  if (size() == 0) return out;
  const Eigen::VectorXd w = solve(residuals);
  const Eigen::MatrixXd kq = gram(query, locations_, kernel_);
  const Eigen::VectorXd mu = kq * w;
  for (std::size_t i = 0; i < query.size(); ++i) out.mean[i] = mu(static_cast<Eigen::Index>(i));
  return out;
}

std::vector<double> Conditioner::predictive_variance(std::span<const Point> query) const {
  std::vector<double> var(query.size(), kernel_.variance());
  if (size() == 0) return var;
  const Eigen::MatrixXd kq = gram(locations_, query, kernel_);
  const Eigen::MatrixXd v = llt_.matrixL().solve(kq);
  for (std::size_t i = 0; i < query.size(); ++i) {
    const double reduced = kernel_.variance() - v.col(static_cast<Eigen::Index>(i)).squaredNorm();
    var[i] = std::max(0.0, reduced);
  }
  return var;
}

namespace {

std::vector<double> residuals_of(const ObservationSet& obs, const MeanFn& mean_fn) {
  if (obs.locations.size() != obs.values.size())
    throw std::invalid_argument("observation locations and values differ in length");
  std::vector<double> r(obs.values.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!std::isfinite(obs.values[i])) throw std::invalid_argument("observation values must be finite");
    r[i] = obs.values[i] - mean_fn(obs.locations[i]);
  }
  return r;
}

}  // namespace

Prediction krige_predict(const ObservationSet& obs, std::span<const Point> query, const MeanFn& mean_fn,
                         const KernelParams& k) {
  const Conditioner cond(obs.locations, obs.noise_std, k);
  const auto r = residuals_of(obs, mean_fn);
  Prediction p = cond.predict(query, r);
  for (std::size_t i = 0; i < query.size(); ++i) p.mean[i] += mean_fn(query[i]);
  return p;
}

double log_marginal(const ObservationSet& obs, const MeanFn& mean_fn, const KernelParams& k) {
  if (obs.locations.empty()) return 0.0;
  const Conditioner cond(obs.locations, obs.noise_std, k);
  return cond.log_density(residuals_of(obs, mean_fn));
}

GridPrior::GridPrior(GridShape shape, const KernelParams& k) : shape_(shape), kernel_(k) {
  k.validate();
  std::vector<Point> pts(shape.size());
  for (int i = 0; i < shape.size(); ++i) pts[i] = to_point(shape.cell(i));
  cov_ = gram(pts, pts, k);
  Eigen::MatrixXd jittered = cov_;
  // A touch more than kJitter: the full-grid Gram matrix is much larger and
  // worse conditioned than any drill-hole system.
  jittered.diagonal().array() += 1e3 * kJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(jittered);
  if (llt.info() != Eigen::Success) throw NumericalError("grid covariance factorization failed");
  chol_ = llt.matrixL();
}

Eigen::VectorXd GridPrior::sample(RngStream& rng) const {
  Eigen::VectorXd z(shape_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return chol_.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd GridPrior::conditional_sample(std::span<const int> obs_index, std::span<const double> residuals,
                                              const Conditioner& cond, RngStream& rng) const {
  Eigen::VectorXd f = sample(rng);
  if (obs_index.empty()) return f;
  std::vector<double> gap(obs_index.size());
  for (std::size_t i = 0; i < obs_index.size(); ++i)
    gap[i] = residuals[i] - f(obs_index[i]) - cond.noise_std() * rng.normal();
  const Eigen::VectorXd w = cond.solve(gap);
  for (std::size_t i = 0; i < obs_index.size(); ++i) f += cov_.col(obs_index[i]) * w(static_cast<Eigen::Index>(i));
  return f;
}

std::shared_ptr<const GridPrior> shared_grid_prior(GridShape shape, const KernelParams& k) {
  using Key = std::tuple<int, int, double, double, int>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const GridPrior>> cache;
  const Key key{shape.nx, shape.ny, k.marginal_std, k.correlation_length, static_cast<int>(k.order)};
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto prior = std::make_shared<const GridPrior>(shape, k);
  cache.emplace(key, prior);
  return prior;
}

}  // namespace prospector::gp

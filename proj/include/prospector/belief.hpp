#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "prospector/common.hpp"
#include "prospector/falsify.hpp"
#include "prospector/geo.hpp"
#include "prospector/gp.hpp"

namespace prospector::belief {

struct DrillObservation {
  Cell location{};
  double thickness = 0.0;
  double grade = 0.0;
  bool graben = false;
  bool geochem = false;
  int step_index = 0;

  friend bool operator==(const DrillObservation&, const DrillObservation&) = default;
};

/// Log-likelihood of a domain indicator that disagrees with the geometry.
inline constexpr double kDomainMismatch = -1e9;

struct Particle {
  geo::GeometryParams geometry;
  double weight = 0.0;
  double loglik = 0.0;  // loglik_given_geometry under the belief's observations
};

struct HypothesisParticles {
  geo::HypothesisSpec spec;
  std::vector<Particle> particles;
};

/// Drill observations together with the factorized observation covariance.
/// Thickness and grade share the kernel and noise, so one factorization serves both.
class ObservationModel {
 public:
  ObservationModel(std::vector<DrillObservation> obs, const geo::FieldParams& fields);

  const std::vector<DrillObservation>& observations() const { return obs_; }
  const gp::Conditioner& conditioner() const { return cond_; }
  const geo::FieldParams& fields() const { return fields_; }
  std::vector<int> cell_indices() const;

  double loglik(const geo::GeometryParams& geometry) const;
  /// Residuals of thickness and grade against the geometry-implied means.
  void residuals(const geo::GeometryParams& geometry, std::vector<double>& thickness,
                 std::vector<double>& grade) const;

 private:
  std::vector<DrillObservation> obs_;
  geo::FieldParams fields_;
  gp::Conditioner cond_;
};

struct BeliefConfig {
  geo::FieldParams fields{};
  geo::GeometryPrior geometry_prior{};
  int n_particles = 100;
  int ess_sweeps = 20;
  /// Prior mass on the null hypothesis; the remaining mass is split according
  /// to the hypotheses' own priors.
  double null_prior = 0.0;
};

/// Immutable hierarchical belief. `update_belief` returns a new value.
class Belief {
 public:
  const BeliefConfig& config() const { return config_; }
  const std::vector<HypothesisParticles>& hypotheses() const { return hypotheses_; }
  const std::vector<DrillObservation>& observations() const { return obs_->observations(); }
  const ObservationModel& observation_model() const { return *obs_; }
  const falsify::NullModel* null_model() const { return null_.get(); }

  /// One weight per hypothesis, followed by the null's weight when a null model is attached.
  const std::vector<double>& hypothesis_weights() const { return weights_; }
  /// Cumulative log evidence per hypothesis (plus null) after each completed step.
  const std::vector<std::vector<double>>& loglik_trace() const { return trace_; }
  /// Current log evidence per hypothesis (plus null); zeros before any data.
  std::vector<double> log_evidence() const;

  bool drilled(Cell c) const;

 private:
  friend Belief belief_from_particles(std::vector<HypothesisParticles>, const BeliefConfig&,
                                      std::shared_ptr<const falsify::NullModel>);
  friend Belief update_belief(const Belief&, const DrillObservation&, int, RngStream&);

  BeliefConfig config_;
  std::vector<HypothesisParticles> hypotheses_;
  std::shared_ptr<const ObservationModel> obs_;
  std::shared_ptr<const falsify::NullModel> null_;
  std::vector<double> weights_;
  std::vector<double> log_evidence_;
  std::vector<std::vector<double>> trace_;
};

Belief init_belief(std::span<const geo::HypothesisSpec> hypotheses, const BeliefConfig& config, RngStream& rng,
                   std::shared_ptr<const falsify::NullModel> null = nullptr);

/// Prior belief from explicit particle ensembles (weights are normalized per hypothesis).
Belief belief_from_particles(std::vector<HypothesisParticles> hypotheses, const BeliefConfig& config,
                             std::shared_ptr<const falsify::NullModel> null = nullptr);

double loglik_given_geometry(std::span<const DrillObservation> obs, const geo::HypothesisSpec& h,
                             const geo::GeometryParams& geometry, const geo::FieldParams& fields);

/// log sum_i w_i exp(l_i) for normalized weights, max-shifted.
double log_weighted_mean_exp(std::span<const double> logliks, std::span<const double> weights);

/// Monte Carlo log-likelihood of the observations under a hypothesis,
/// averaging over the given weighted geometry particles.
double hypothesis_loglik(std::span<const DrillObservation> obs, const geo::HypothesisSpec& h,
                         std::span<const Particle> particles, const geo::FieldParams& fields);

Belief update_belief(const Belief& b, const DrillObservation& o, int ess_sweeps, RngStream& rng);

using LogLikFn = std::function<double(std::span<const double>)>;

struct EssResult {
  std::vector<double> point;
  double loglik = 0.0;
  int shrinks = 0;
  double final_angle = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

inline constexpr int kMaxEssShrinks = 1000;

/// One elliptical slice sampling transition for a Gaussian prior
/// N(prior_mean, L L^T) with lower-triangular `prior_chol`.
EssResult ess_step(std::span<const double> current, double current_loglik, std::span<const double> prior_mean,
                   const Eigen::MatrixXd& prior_chol, const LogLikFn& loglik, RngStream& rng);

std::vector<double> ess_step(std::span<const double> current, std::span<const double> prior_mean,
                             const Eigen::MatrixXd& prior_chol, const LogLikFn& loglik, RngStream& rng);

struct FieldMoments {
  double mean = 0.0;
  double variance = 0.0;
};

struct PredictiveSummary {
  FieldMoments thickness;
  FieldMoments grade;
};

/// Law-of-total-moments mixture of the kriging predictive over hypotheses and particles.
PredictiveSummary posterior_predictive(const Belief& b, Cell cell);

struct PredictiveGrids {
  Grid<double> thickness_mean, thickness_std, grade_mean, grade_std;
};

PredictiveGrids predictive_grids(const Belief& b);

/// Draws a full state: hypothesis by weight, particle by weight, then
/// thickness and grade fields conditioned on the observations.
geo::GeoModel sample_state(const Belief& b, RngStream& rng);

struct ProfitEstimate {
  double mean = 0.0;
  double std = 0.0;
};

ProfitEstimate expected_profit(const Belief& b, const geo::EconParams& e, int n_mc, RngStream& rng);

}  // namespace prospector::belief

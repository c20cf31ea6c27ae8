#pragma once

#include <span>
#include <vector>

#include "prospector/common.hpp"
#include "prospector/geo.hpp"

namespace prospector::belief {
struct DrillObservation;
class Belief;
}  // namespace prospector::belief

namespace prospector::falsify {

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;
  double std = 1.0;

  friend bool operator==(const MixtureComponent&, const MixtureComponent&) = default;
};

/// Spatially uncorrelated reference model: independent Gaussian mixtures for
/// thickness and grade, fair coins for the two domain indicators.
struct NullModel {
  std::vector<MixtureComponent> thickness_mixture;
  std::vector<MixtureComponent> grade_mixture;

  void validate() const;
  friend bool operator==(const NullModel&, const NullModel&) = default;
};

double mixture_logpdf(std::span<const MixtureComponent> mix, double x);

/// Fits the null by moment matching the in-domain and out-of-domain cell
/// populations of `n_calibration` prior truths (hypotheses drawn by prior).
NullModel build_null(std::span<const geo::HypothesisSpec> hypotheses, int n_calibration, const geo::GeometryPrior& prior,
                     const geo::FieldParams& fields, RngStream& rng);

double null_loglik(const NullModel& model, std::span<const belief::DrillObservation> obs);

struct FalsificationStatus {
  std::vector<int> hypothesis_ids;
  std::vector<double> hypothesis_loglik;
  double null_loglik = 0.0;
  std::vector<bool> falsified;
  bool all_falsified = false;
};

inline bool is_falsified(double hypothesis_loglik, double null_loglik, double margin) {
  return hypothesis_loglik < null_loglik - margin;
}

/// Hypothesis h is falsified when its log evidence falls more than `margin`
/// nats below the null's.
FalsificationStatus falsification_status(const belief::Belief& b, const NullModel& model, double margin);

}  // namespace prospector::falsify

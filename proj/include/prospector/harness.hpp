#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prospector/belief.hpp"
#include "prospector/falsify.hpp"
#include "prospector/geo.hpp"
#include "prospector/sarsop.hpp"

namespace prospector::harness {

enum class PolicyKind { Grid, Pomdp };
enum class Decision { Develop, Abandon, None };

std::string to_string(PolicyKind p);
std::string to_string(Decision d);
PolicyKind parse_policy(const std::string& s);
Decision parse_decision(const std::string& s);

inline constexpr int kGridHoles = 36;

/// Cell drilled by the 6x6 baseline at `step` (0..35), row-major from (3,3).
Cell grid_cell(int step, GridShape shape = {});

/// Baseline action: the lattice cell for steps below 36, then develop iff
/// the expected profit under `b` is positive.
pomdp::Action grid_policy(int step, const belief::Belief& b, const geo::EconParams& e, int n_mc, RngStream& rng);
/// Go/no-go from an expected-profit mean.
pomdp::Action sign_decision(double expected_profit);

struct TrialConfig {
  belief::BeliefConfig belief{};
  sarsop::PlannerConfig planner{};
  geo::EconParams econ{};
  int max_holes = 40;
  int profit_mc = 64;             // Monte Carlo draws per expected-profit estimate
  double margin = 0.0;            // falsification margin, nats
  bool stop_on_falsified = false; // end the trial once every hypothesis is falsified
  bool defer_decision = false;    // agent keeps drilling until falsified or capped
};

struct StepRecord {
  int step = 0;  // holes drilled before the action
  std::string action;
  std::optional<belief::DrillObservation> observation;
  std::vector<double> weights;
  double expected_profit = 0.0;
  double value_error = 0.0;
  bool all_falsified = false;
};

struct TrialResult {
  std::uint64_t truth_seed = 0;
  PolicyKind policy = PolicyKind::Grid;
  int truth_hypothesis = 0;
  int holes_drilled = 0;
  Decision decision = Decision::None;
  bool decision_correct = false;
  bool hit_cap = false;
  double true_profit = 0.0;
  /// |E[profit] - true profit| after 0, 1, ... holes.
  std::vector<double> value_error_curve;
  std::vector<double> expected_profit_curve;
  /// First hole count at which each hypothesis was falsified.
  std::vector<int> hypothesis_ids;
  std::vector<std::optional<int>> falsified_at;
  std::optional<int> all_falsified_at;
  std::vector<StepRecord> steps;
};

bool decision_correct(Decision d, double true_profit);

/// Runs one campaign against a hidden truth. Policies see only the belief.
TrialResult run_trial(const geo::GeoModel& truth, std::span<const geo::HypothesisSpec> hypotheses, PolicyKind policy,
                      const TrialConfig& cfg, const std::shared_ptr<const falsify::NullModel>& null, RngStream& rng);

struct ExperimentConfig {
  TrialConfig trial{};
  std::uint64_t seed = 1;
  int n_trials = 17;
  int null_calibration = 200;
  std::vector<PolicyKind> policies{PolicyKind::Grid, PolicyKind::Pomdp};
  /// Called after every finished trial, e.g. for progress output.
  std::function<void(const TrialResult&)> on_trial;
};

struct PolicySummary {
  PolicyKind policy = PolicyKind::Grid;
  int trials = 0;
  double accuracy = 0.0;
  double accuracy_std = 0.0;  // standard error of the mean
  double holes = 0.0;
  double holes_std = 0.0;     // standard error of the mean
  std::vector<double> mean_value_error;  // per hole count
};

struct FalsifySummary {
  PolicyKind policy = PolicyKind::Grid;
  int trials = 0;
  double holes_to_falsify = 0.0;  // mean, trials that never falsify count at the cap
  double holes_to_falsify_std = 0.0;
  double failed_fraction = 0.0;   // never falsified within the cap
};

struct ExperimentReport {
  std::string kind;  // "aleatoric" or "falsify"
  ExperimentConfig config;
  std::vector<TrialResult> trials;
  std::vector<PolicySummary> summary;
  std::vector<FalsifySummary> falsification;
  /// Falsification experiment only: POMDP trials without the falsification
  /// stop, fraction that abandoned a profitable prospect.
  std::optional<double> unchecked_wrong_abandon;
  std::vector<TrialResult> unchecked_trials;
};

/// Truth seed of trial i under a root seed.
std::uint64_t truth_seed(std::uint64_t root, int trial);
geo::HypothesisSpec truth_class();

std::vector<PolicySummary> summarize(std::span<const TrialResult> trials);
std::vector<FalsifySummary> summarize_falsification(std::span<const TrialResult> trials, int cap);

/// Truths from the two-graben, two-domain class; belief over all four hypotheses.
ExperimentReport experiment_aleatoric(const ExperimentConfig& cfg);
/// Truths from the two-graben, two-domain class; belief without that class.
ExperimentReport experiment_falsification(const ExperimentConfig& cfg);

/// Writes summary.csv, trials.csv, curves.csv, falsification.csv,
/// manifest.json and one events file per trial under `dir`.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);
std::vector<PolicySummary> read_summary_csv(const std::filesystem::path& file);
std::vector<FalsifySummary> read_falsification_csv(const std::filesystem::path& file);

}  // namespace prospector::harness

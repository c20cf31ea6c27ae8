#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "prospector/belief.hpp"
#include "prospector/pomdp.hpp"

namespace prospector::sarsop {

struct AlphaVector {
  std::vector<double> values;
  int action = 0;
};

struct AlphaPolicy {
  std::vector<AlphaVector> alphas;
  double lower_bound_value = 0.0;
  double upper_bound_value = 0.0;
  bool converged = false;
  int iterations = 0;
};

double dot(std::span<const double> a, std::span<const double> b);

/// Sawtooth upper bound: corner values plus interior belief/value points.
class UpperBound {
 public:
  UpperBound() = default;
  explicit UpperBound(std::vector<double> corner) : corner_(std::move(corner)), words_((corner_.size() + 63) / 64) {}

  double value(std::span<const double> b) const;
  /// Same as value(b) when `support` lists every state with b(s) > 0.
  double value(std::span<const double> b, std::span<const int> support) const;
  /// Inserts (b, v) when v improves on the current bound at b; returns whether it did.
  bool update(std::span<const double> b, double v);
  const std::vector<double>& corner() const { return corner_; }
  std::size_t n_points() const { return points_.size(); }

 private:
  struct Point {
    std::vector<int> support;
    std::vector<double> mass;
    double value;
  };
  double interpolate(std::span<const double> b, double base, std::span<const std::uint64_t> mask) const;
  double corner_value(const Point& pt) const;

  std::vector<double> corner_;
  std::vector<Point> points_;
  // Per point, in insertion order: support bitset words and value - corner interpolation.
  std::size_t words_ = 0;
  std::vector<std::uint64_t> masks_;
  std::vector<double> excess_;
};

struct InitialBounds {
  std::vector<AlphaVector> lower;
  std::vector<double> upper;  // fully observable value per state
};

InitialBounds initial_bounds(const pomdp::DiscretePOMDP& p);

/// Point-based backup at `b`: the best one-step lookahead alpha vector over Γ.
AlphaVector backup(std::span<const double> b, std::span<const AlphaVector> gamma, const pomdp::DiscretePOMDP& p);

/// Normalized successor belief after action `a` and observation `o`; returns P(o | b, a).
double successor(std::span<const double> b, int a, int o, const pomdp::DiscretePOMDP& p, std::vector<double>& out);

struct IterationRecord {
  int iteration = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n_alphas = 0;
  bool sandwich_ok = true;
  bool prune_ok = true;
};

struct SolverOptions {
  double epsilon = 0.1;
  int max_iterations = 100;
  double time_budget_s = 0.0;  // 0 disables the wall-clock cap
  int max_depth = 60;
  int prune_every = 10;
  std::function<void(const IterationRecord&)> observer;
};

AlphaPolicy solve(const pomdp::DiscretePOMDP& p, std::span<const double> b0, const SolverOptions& opt = {});

/// Index into p.actions of argmax_α α·b; ties go to the lowest action index.
int act(const AlphaPolicy& policy, std::span<const double> b);

/// One-step lookahead value of action `a` at `b`, continuing with the policy.
double q_value(const AlphaPolicy& policy, std::span<const double> b, int a, const pomdp::DiscretePOMDP& p);

void write_policy(std::ostream& os, const AlphaPolicy& policy);
AlphaPolicy read_policy(std::istream& is);

struct PlannerConfig {
  pomdp::DiscretizationConfig discretization{};
  SolverOptions solver{};
};

struct PlanDiagnostics {
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  bool converged = false;
  int iterations = 0;
  std::size_t n_alphas = 0;
  int n_states = 0;
  int n_actions = 0;
  int n_observations = 0;
  double seconds = 0.0;
};

struct PlanResult {
  pomdp::Action action;
  PlanDiagnostics diagnostics;
};

/// Discretize the belief, solve, and act at the uniform belief over sampled states.
/// With `drill_only`, a terminal choice is replaced by the drill action of
/// highest lookahead value.
PlanResult plan_step(const belief::Belief& b, const PlannerConfig& cfg, const geo::EconParams& e, RngStream& rng,
                     bool drill_only = false);

}  // namespace prospector::sarsop

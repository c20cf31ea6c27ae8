#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "prospector/belief.hpp"
#include "prospector/common.hpp"
#include "prospector/geo.hpp"

namespace prospector::pomdp {

enum class ActionKind { Drill, Abandon, Develop };

struct Action {
  ActionKind kind = ActionKind::Drill;
  Cell cell{};

  bool terminal() const { return kind != ActionKind::Drill; }
  static Action drill(Cell c) { return {ActionKind::Drill, c}; }
  static Action abandon() { return {ActionKind::Abandon, {}}; }
  static Action develop() { return {ActionKind::Develop, {}}; }
  friend bool operator==(const Action&, const Action&) = default;
};

std::string to_string(const Action& a);

/// Drill cells on the lattice {offset + k*stride} in both axes, minus drilled
/// cells, followed by abandon and develop.
std::vector<Action> enumerate_actions(GridShape shape, int stride, int offset, std::span<const Cell> drilled);

using ObsPoint = std::array<double, 2>;  // (thickness, grade)

struct ObsClusters {
  std::vector<ObsPoint> centroids;  // original units
  ObsPoint center{0.0, 0.0};        // standardization
  ObsPoint scale{1.0, 1.0};
  std::string diagnostic;

  int size() const { return static_cast<int>(centroids.size()); }
  int assign(const ObsPoint& p) const;
};

/// k-means (k-means++ seeding, at most 100 Lloyd iterations) on standardized samples.
ObsClusters discretize_observations(std::span<const ObsPoint> samples, int k, RngStream& rng);

struct DiscretePOMDP {
  int n_states = 0;
  std::vector<Action> actions;
  ObsClusters clusters;
  int n_obs = 1;
  std::vector<geo::GeoModel> states;  // empty for hand-built fixtures
  std::vector<double> obs_probs;      // [(s * A + a) * O + o]
  std::vector<double> rewards;        // [s * A + a]
  double discount = 0.95;

  int n_actions() const { return static_cast<int>(actions.size()); }
  double reward(int s, int a) const { return rewards[static_cast<std::size_t>(s) * actions.size() + a]; }
  double& reward(int s, int a) { return rewards[static_cast<std::size_t>(s) * actions.size() + a]; }
  double obs_prob(int s, int a, int o) const {
    return obs_probs[(static_cast<std::size_t>(s) * actions.size() + a) * n_obs + o];
  }
  double& obs_prob(int s, int a, int o) {
    return obs_probs[(static_cast<std::size_t>(s) * actions.size() + a) * n_obs + o];
  }
  bool terminal(int a) const { return actions[a].terminal(); }

  /// Allocates zeroed tensors for the given sizes.
  void resize(int states, int obs);
  void validate() const;
};

struct DiscretizationConfig {
  int n_states = 100;
  int stride = 4;
  int offset = 2;
  int n_clusters = 8;
  int n_obs_draws = 200;
  double discount = 0.95;
};

DiscretePOMDP build_discrete_pomdp(const belief::Belief& b, const DiscretizationConfig& cfg, const geo::EconParams& e,
                                   RngStream& rng);

/// Structured-text dump: header line, actions, clusters, reward rows, observation rows.
void write_pomdp(std::ostream& os, const DiscretePOMDP& p);
DiscretePOMDP read_pomdp(std::istream& is);

}  // namespace prospector::pomdp

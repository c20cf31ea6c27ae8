#pragma once

#include <algorithm>
#include <vector>

#include "prospector/pomdp.hpp"

namespace fixture {

using prospector::pomdp::Action;
using prospector::pomdp::DiscretePOMDP;

/// Two states {rich, barren}; one drill action whose binary signal names the
/// state with probability `accuracy`; abandon and develop terminals.
inline DiscretePOMDP diagnose(double accuracy = 0.9, double drill_cost = 0.1, double discount = 0.95) {
  DiscretePOMDP p;
  p.actions = {Action::drill({0, 0}), Action::abandon(), Action::develop()};
  p.resize(2, 2);
  p.discount = discount;
  const double develop[2] = {10.0, -10.0};
  for (int s = 0; s < 2; ++s) {
    p.reward(s, 0) = -drill_cost;
    p.reward(s, 1) = 0.0;
    p.reward(s, 2) = develop[s];
    p.obs_prob(s, 0, s) = accuracy;
    p.obs_prob(s, 0, 1 - s) = 1.0 - accuracy;
    p.obs_prob(s, 1, 0) = 1.0;
    p.obs_prob(s, 2, 0) = 1.0;
  }
  return p;
}

/// Horizon at which expectimax on the diagnose fixture matches the
/// infinite-horizon value to about 1e-5.
inline constexpr int kConvergedHorizon = 16;

/// Finite-horizon expectimax by exhaustive enumeration. With zero steps left
/// only terminal actions are allowed.
inline double expectimax(const DiscretePOMDP& p, const std::vector<double>& b, int steps, int* first_action = nullptr) {
  double best = -1e300;
  int arg = -1;
  for (int a = 0; a < p.n_actions(); ++a) {
    double r = 0.0;
    for (int s = 0; s < p.n_states; ++s) r += b[s] * p.reward(s, a);
    double q = r;
    if (!p.terminal(a)) {
      if (steps == 0) continue;
      double future = 0.0;
      for (int o = 0; o < p.n_obs; ++o) {
        std::vector<double> next(p.n_states);
        double po = 0.0;
        for (int s = 0; s < p.n_states; ++s) {
          next[s] = b[s] * p.obs_prob(s, a, o);
          po += next[s];
        }
        if (po <= 0.0) continue;
        for (double& x : next) x /= po;
        future += po * expectimax(p, next, steps - 1);
      }
      q += p.discount * future;
    }
    if (q > best + 1e-12) {
      best = q;
      arg = a;
    }
  }
  if (first_action) *first_action = arg;
  return best;
}

}  // namespace fixture

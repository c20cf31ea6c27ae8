#include "prospector/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace prospector::pomdp {

std::string to_string(const Action& a) {
  switch (a.kind) {
    case ActionKind::Abandon:
      return "abandon";
    case ActionKind::Develop:
      return "develop";
    case ActionKind::Drill:
      break;
  }
  return "drill " + std::to_string(a.cell.x) + " " + std::to_string(a.cell.y);
}

std::vector<Action> enumerate_actions(GridShape shape, int stride, int offset, std::span<const Cell> drilled) {
  if (stride < 1) throw std::invalid_argument("enumerate_actions: stride must be >= 1");
  const std::set<Cell> done(drilled.begin(), drilled.end());
  const int start = ((offset % stride) + stride) % stride;
  std::vector<Action> out;
  for (int y = start; y < shape.ny; y += stride)
    for (int x = start; x < shape.nx; x += stride)
      if (!done.contains({x, y})) out.push_back(Action::drill({x, y}));
  out.push_back(Action::abandon());
  out.push_back(Action::develop());
  return out;
}

namespace {

double sq_dist(const ObsPoint& a, const ObsPoint& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

int nearest(std::span<const ObsPoint> centroids, const ObsPoint& p) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = sq_dist(centroids[j], p);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

int ObsClusters::assign(const ObsPoint& p) const {
  const ObsPoint z{(p[0] - center[0]) / scale[0], (p[1] - center[1]) / scale[1]};
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const ObsPoint c{(centroids[j][0] - center[0]) / scale[0], (centroids[j][1] - center[1]) / scale[1]};
    const double d = sq_dist(c, z);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

ObsClusters discretize_observations(std::span<const ObsPoint> samples, int k, RngStream& rng) {
  if (k < 1) throw std::invalid_argument("discretize_observations: k must be >= 1");
  if (samples.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("discretize_observations: fewer samples than clusters");
  ObsClusters out;

  // Standardize each coordinate.
  const double n = static_cast<double>(samples.size());
  for (int d = 0; d < 2; ++d) {
    double m = 0.0;
    for (const auto& s : samples) m += s[d];
    m /= n;
    double v = 0.0;
    for (const auto& s : samples) v += (s[d] - m) * (s[d] - m);
    const double sd = std::sqrt(v / n);
    out.center[d] = m;
    out.scale[d] = sd > 1e-12 ? sd : 1.0;
  }
  std::vector<ObsPoint> z(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    z[i] = {(samples[i][0] - out.center[0]) / out.scale[0], (samples[i][1] - out.center[1]) / out.scale[1]};

  std::set<ObsPoint> distinct(z.begin(), z.end());
  if (distinct.size() < static_cast<std::size_t>(k)) {
    out.diagnostic = "reduced k from " + std::to_string(k) + " to " + std::to_string(distinct.size()) +
                     " (too few distinct samples)";
    k = static_cast<int>(distinct.size());
  }

  // k-means++ seeding.
  std::vector<ObsPoint> cent;
  cent.push_back(z[rng.index(z.size())]);
  std::vector<double> d2(z.size());
  while (static_cast<int>(cent.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      d2[i] = sq_dist(z[i], cent[nearest(cent, z[i])]);
      total += d2[i];
    }
    double u = rng.uniform() * total;
    std::size_t pick = 0;
    for (; pick + 1 < z.size(); ++pick) {
      if (d2[pick] > 0 && u < d2[pick]) break;
      u -= d2[pick];
    }
    if (d2[pick] == 0) {
      // Fall back to the farthest point.
      pick = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    }
    cent.push_back(z[pick]);
  }

  // Lloyd iterations.
  std::vector<int> label(z.size(), -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const int l = nearest(cent, z[i]);
      if (l != label[i]) {
        label[i] = l;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<ObsPoint> sum(cent.size(), ObsPoint{0.0, 0.0});
    std::vector<int> count(cent.size(), 0);
    for (std::size_t i = 0; i < z.size(); ++i) {
      sum[label[i]][0] += z[i][0];
      sum[label[i]][1] += z[i][1];
      ++count[label[i]];
    }
    for (std::size_t j = 0; j < cent.size(); ++j)
      if (count[j] > 0) cent[j] = {sum[j][0] / count[j], sum[j][1] / count[j]};
  }

  for (const auto& c : cent)
    out.centroids.push_back({c[0] * out.scale[0] + out.center[0], c[1] * out.scale[1] + out.center[1]});
  return out;
}

void DiscretePOMDP::resize(int states, int obs) {
  n_states = states;
  n_obs = obs;
  rewards.assign(static_cast<std::size_t>(states) * actions.size(), 0.0);
  obs_probs.assign(static_cast<std::size_t>(states) * actions.size() * obs, 0.0);
}

void DiscretePOMDP::validate() const {
  if (n_states < 1 || actions.empty() || n_obs < 1) throw std::invalid_argument("pomdp: empty dimension");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("pomdp: discount outside (0,1]");
  if (rewards.size() != static_cast<std::size_t>(n_states) * actions.size() ||
      obs_probs.size() != static_cast<std::size_t>(n_states) * actions.size() * n_obs)
    throw std::invalid_argument("pomdp: tensor sizes do not match dimensions");
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions(); ++a) {
      double total = 0.0;
      for (int o = 0; o < n_obs; ++o) {
        if (obs_prob(s, a, o) < 0.0) throw std::invalid_argument("pomdp: negative observation probability");
        total += obs_prob(s, a, o);
      }
      if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("pomdp: observation row is not a simplex");
    }
}

DiscretePOMDP build_discrete_pomdp(const belief::Belief& b, const DiscretizationConfig& cfg, const geo::EconParams& e,
                                   RngStream& rng) {
  if (cfg.n_states < 2) throw std::invalid_argument("build_discrete_pomdp: n_states must be >= 2");
  if (cfg.n_obs_draws < 1) throw std::invalid_argument("build_discrete_pomdp: n_obs_draws must be >= 1");
  const auto& fields = b.config().fields;
  std::vector<Cell> drilled;
  for (const auto& o : b.observations()) drilled.push_back(o.location);

  DiscretePOMDP p;
  p.discount = cfg.discount;
  p.actions = enumerate_actions(fields.shape, cfg.stride, cfg.offset, drilled);
  RngStream state_rng = rng.derive(1);
  for (int s = 0; s < cfg.n_states; ++s) {
    RngStream sr = state_rng.derive(static_cast<std::uint64_t>(s));
    p.states.push_back(belief::sample_state(b, sr));
  }

  // Observation samples: every (state, drill action) pair with measurement noise.
  RngStream noise_rng = rng.derive(2);
  std::vector<ObsPoint> samples;
  for (const auto& st : p.states)
    for (const auto& a : p.actions)
      if (!a.terminal())
        samples.push_back({st.thickness[a.cell] + fields.noise_std * noise_rng.normal(),
                           st.grade[a.cell] + fields.noise_std * noise_rng.normal()});
  if (samples.empty()) {
    p.clusters.centroids.push_back({0.0, 0.0});
  } else {
    RngStream km_rng = rng.derive(3);
    p.clusters = discretize_observations(samples, std::min<int>(cfg.n_clusters, static_cast<int>(samples.size())),
                                         km_rng);
  }
  p.resize(cfg.n_states, p.clusters.size());

  RngStream draw_rng = rng.derive(4);
  for (int s = 0; s < p.n_states; ++s) {
    const auto& st = p.states[s];
    const double deposit = geo::profit(st, e, 0);
    for (int a = 0; a < p.n_actions(); ++a) {
      const Action& act = p.actions[a];
      switch (act.kind) {
        case ActionKind::Abandon:
          p.reward(s, a) = 0.0;
          p.obs_prob(s, a, 0) = 1.0;
          break;
        case ActionKind::Develop:
          p.reward(s, a) = deposit;
          p.obs_prob(s, a, 0) = 1.0;
          break;
        case ActionKind::Drill: {
          p.reward(s, a) = -e.drill_cost;
          const double th = st.thickness[act.cell], g = st.grade[act.cell];
          std::vector<int> counts(p.n_obs, 0);
          for (int d = 0; d < cfg.n_obs_draws; ++d)
            ++counts[p.clusters.assign(
                {th + fields.noise_std * draw_rng.normal(), g + fields.noise_std * draw_rng.normal()})];
          for (int o = 0; o < p.n_obs; ++o) p.obs_prob(s, a, o) = static_cast<double>(counts[o]) / cfg.n_obs_draws;
          break;
        }
      }
    }
  }
  return p;
}

void write_pomdp(std::ostream& os, const DiscretePOMDP& p) {
  os << std::setprecision(17);
  os << "pomdp 1 states " << p.n_states << " actions " << p.n_actions() << " observations " << p.n_obs
     << " discount " << p.discount << "\n";
  os << "actions\n";
  for (const auto& a : p.actions) os << to_string(a) << "\n";
  os << "clusters " << p.clusters.center[0] << " " << p.clusters.center[1] << " " << p.clusters.scale[0] << " "
     << p.clusters.scale[1] << "\n";
  for (const auto& c : p.clusters.centroids) os << c[0] << " " << c[1] << "\n";
  os << "rewards\n";
  for (int s = 0; s < p.n_states; ++s) {
    for (int a = 0; a < p.n_actions(); ++a) os << (a ? " " : "") << p.reward(s, a);
    os << "\n";
  }
  os << "obs_probs\n";
  for (int s = 0; s < p.n_states; ++s)
    for (int a = 0; a < p.n_actions(); ++a) {
      for (int o = 0; o < p.n_obs; ++o) os << (o ? " " : "") << p.obs_prob(s, a, o);
      os << "\n";
    }
  os << "end\n";
}

namespace {

void expect(std::istream& is, const std::string& word) {
  std::string w;
  if (!(is >> w) || w != word) throw std::runtime_error("pomdp dump: expected '" + word + "', got '" + w + "'");
}

}  // namespace

DiscretePOMDP read_pomdp(std::istream& is) {
  DiscretePOMDP p;
  int version = 0, n_actions = 0, n_obs = 0, n_states = 0;
  expect(is, "pomdp");
  is >> version;
  if (version != 1) throw std::runtime_error("pomdp dump: unsupported version");
  expect(is, "states");
  is >> n_states;
  expect(is, "actions");
  is >> n_actions;
  expect(is, "observations");
  is >> n_obs;
  expect(is, "discount");
  is >> p.discount;
  expect(is, "actions");
  for (int a = 0; a < n_actions; ++a) {
    std::string kind;
    is >> kind;
    if (kind == "drill") {
      Cell c;
      is >> c.x >> c.y;
      p.actions.push_back(Action::drill(c));
    } else if (kind == "abandon") {
      p.actions.push_back(Action::abandon());
    } else if (kind == "develop") {
      p.actions.push_back(Action::develop());
    } else {
      throw std::runtime_error("pomdp dump: unknown action '" + kind + "'");
    }
  }
  expect(is, "clusters");
  is >> p.clusters.center[0] >> p.clusters.center[1] >> p.clusters.scale[0] >> p.clusters.scale[1];
  p.clusters.centroids.resize(n_obs);
  for (auto& c : p.clusters.centroids) is >> c[0] >> c[1];
  p.resize(n_states, n_obs);
  expect(is, "rewards");
  for (auto& r : p.rewards) is >> r;
  expect(is, "obs_probs");
  for (auto& o : p.obs_probs) is >> o;
  expect(is, "end");
  if (!is) throw std::runtime_error("pomdp dump: truncated input");
  p.validate();
  return p;
}

}  // namespace prospector::pomdp

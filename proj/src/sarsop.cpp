#include "prospector/sarsop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace prospector::sarsop {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

std::vector<std::uint64_t> support_mask(std::size_t n, std::span<const int> support) {
  std::vector<std::uint64_t> m((n + 63) / 64, 0);
  for (int s : support) m[s / 64] |= std::uint64_t{1} << (s % 64);
  return m;
}

std::vector<int> support_of(std::span<const double> b) {
  std::vector<int> out;
  for (std::size_t s = 0; s < b.size(); ++s)
    if (b[s] > 0.0) out.push_back(static_cast<int>(s));
  return out;
}

}  // namespace

double UpperBound::interpolate(std::span<const double> b, double base, std::span<const std::uint64_t> mask) const {
  double best = base;
  const std::size_t W = words_;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    // Points whose support leaves the support of b have ratio 0.
    const std::uint64_t* m = &masks_[i * W];
    std::uint64_t outside = 0;
    for (std::size_t w = 0; w < W; ++w) outside |= m[w] & ~mask[w];
    if (outside) continue;
    const auto& pt = points_[i];
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pt.support.size(); ++k) ratio = std::min(ratio, b[pt.support[k]] / pt.mass[k]);
    best = std::min(best, base + ratio * excess_[i]);
  }
  return best;
}

double UpperBound::corner_value(const Point& pt) const {
  double v = 0.0;
  for (std::size_t k = 0; k < pt.support.size(); ++k) v += pt.mass[k] * corner_[pt.support[k]];
  return v;
}

double UpperBound::value(std::span<const double> b) const { return value(b, support_of(b)); }

double UpperBound::value(std::span<const double> b, std::span<const int> support) const {
  double base = 0.0;
  for (int s : support) base += b[s] * corner_[s];
  return interpolate(b, base, support_mask(b.size(), support));
}

bool UpperBound::update(std::span<const double> b, double v) {
  if (v >= value(b) - 1e-12) return false;
  Point pt{support_of(b), {}, v};
  for (int s : pt.support) pt.mass.push_back(b[s]);
  if (pt.support.size() == 1) {
    corner_[pt.support[0]] = std::min(corner_[pt.support[0]], v);
    for (std::size_t i = 0; i < points_.size(); ++i) excess_[i] = points_[i].value - corner_value(points_[i]);
    return true;
  }
  const auto mask = support_mask(b.size(), pt.support);
  masks_.insert(masks_.end(), mask.begin(), mask.end());
  excess_.push_back(v - corner_value(pt));
  points_.push_back(std::move(pt));
  return true;
}

InitialBounds initial_bounds(const pomdp::DiscretePOMDP& p) {
  InitialBounds out;
  const int S = p.n_states, A = p.n_actions();
  const double g = p.discount;
  // Blind policies: one action forever (terminals end the episode at once).
  for (int a = 0; a < A; ++a) {
    AlphaVector alpha{std::vector<double>(S), a};
    if (!p.terminal(a) && g >= 1.0) continue;
    for (int s = 0; s < S; ++s) alpha.values[s] = p.terminal(a) ? p.reward(s, a) : p.reward(s, a) / (1.0 - g);
    const bool duplicate = std::any_of(out.lower.begin(), out.lower.end(),
                                       [&](const AlphaVector& other) { return other.values == alpha.values; });
    if (!duplicate) out.lower.push_back(std::move(alpha));
  }
  // Fully observable bound with static geology: V = max(best terminal, best drill / (1 - γ)).
  out.upper.resize(S);
  for (int s = 0; s < S; ++s) {
    double term = -std::numeric_limits<double>::infinity();
    double drill = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) (p.terminal(a) ? term : drill) = std::max(p.terminal(a) ? term : drill, p.reward(s, a));
    double v = term;
    if (std::isfinite(drill) && drill > 0.0) {
      v = g < 1.0 ? std::max(term, drill / (1.0 - g)) : std::numeric_limits<double>::infinity();
    } else if (std::isfinite(drill) && g < 1.0) {
      v = std::max(term, drill / (1.0 - g));
    }
    out.upper[s] = v;
  }
  return out;
}

double successor(std::span<const double> b, int a, int o, const pomdp::DiscretePOMDP& p, std::vector<double>& out) {
  out.assign(b.size(), 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < b.size(); ++s) {
    if (b[s] <= 0.0) continue;
    out[s] = b[s] * p.obs_prob(static_cast<int>(s), a, o);
    total += out[s];
  }
  if (total > 0.0)
    for (double& x : out) x /= total;
  return total;
}

namespace {

void check_simplex(std::span<const double> b, int n_states) {
  if (static_cast<int>(b.size()) != n_states) throw std::invalid_argument("belief has the wrong dimension");
  double total = 0.0;
  for (double x : b) {
    if (x < -1e-9) throw std::invalid_argument("belief has negative mass");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("belief is not on the simplex");
}

/// Belief restricted to its support, states in increasing order.
struct SparseBelief {
  std::vector<int> idx;
  std::vector<double> p;
};

SparseBelief sparse_of(std::span<const double> b) {
  SparseBelief out;
  for (std::size_t s = 0; s < b.size(); ++s)
    if (b[s] > 0.0) {
      out.idx.push_back(static_cast<int>(s));
      out.p.push_back(b[s]);
    }
  return out;
}

double sparse_dot(const std::vector<double>& alpha, const SparseBelief& b) {
  double v = 0.0;
  for (std::size_t k = 0; k < b.idx.size(); ++k) v += alpha[b.idx[k]] * b.p[k];
  return v;
}

double lower_value(std::span<const AlphaVector> gamma, const SparseBelief& b) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : gamma) best = std::max(best, sparse_dot(a.values, b));
  return best;
}

/// Observations with non-zero probability for each (action, state).
struct SparseObs {
  struct Entry {
    int obs;
    double prob;
  };
  std::vector<std::vector<Entry>> rows;  // [a * S + s]
  int S = 0;

  explicit SparseObs(const pomdp::DiscretePOMDP& p) : S(p.n_states) {
    rows.resize(static_cast<std::size_t>(p.n_actions()) * S);
    for (int a = 0; a < p.n_actions(); ++a)
      for (int s = 0; s < S; ++s)
        for (int o = 0; o < p.n_obs; ++o)
          if (p.obs_prob(s, a, o) > 0.0) rows[static_cast<std::size_t>(a) * S + s].push_back({o, p.obs_prob(s, a, o)});
  }
  const std::vector<Entry>& row(int a, int s) const { return rows[static_cast<std::size_t>(a) * S + s]; }
};

/// All observation branches of (b, a): normalized successors and their probabilities.
void branches(const SparseBelief& b, int a, const SparseObs& sparse, int n_obs, std::vector<SparseBelief>& next,
              std::vector<double>& prob) {
  next.resize(n_obs);
  for (auto& n : next) {
    n.idx.clear();
    n.p.clear();
  }
  prob.assign(n_obs, 0.0);
  for (std::size_t k = 0; k < b.idx.size(); ++k) {
    const int s = b.idx[k];
    for (const auto& e : sparse.row(a, s)) {
      const double w = b.p[k] * e.prob;
      next[e.obs].idx.push_back(s);
      next[e.obs].p.push_back(w);
      prob[e.obs] += w;
    }
  }
  for (int o = 0; o < n_obs; ++o)
    for (double& x : next[o].p) x /= prob[o];
}

AlphaVector backup_impl(const SparseBelief& b, std::span<const AlphaVector> gamma, const pomdp::DiscretePOMDP& p,
                        const SparseObs& sparse) {
  const int S = p.n_states, A = p.n_actions(), O = p.n_obs;
  const std::size_t G = gamma.size();
  AlphaVector best{{}, -1};
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<double> scores(static_cast<std::size_t>(O) * G);
  std::vector<int> chosen(O);
  std::vector<double> alpha(S);
  for (int a = 0; a < A; ++a) {
    if (p.terminal(a)) {
      for (int s = 0; s < S; ++s) alpha[s] = p.reward(s, a);
    } else {
      // scores[o][k] = sum_s b(s) P(o|s,a) alpha_k(s)
      std::fill(scores.begin(), scores.end(), 0.0);
      for (std::size_t i = 0; i < b.idx.size(); ++i) {
        const int s = b.idx[i];
        for (const auto& e : sparse.row(a, s)) {
          const double w = b.p[i] * e.prob;
          double* row = &scores[static_cast<std::size_t>(e.obs) * G];
          for (std::size_t k = 0; k < G; ++k) row[k] += w * gamma[k].values[s];
        }
      }
      for (int o = 0; o < O; ++o) {
        const double* row = &scores[static_cast<std::size_t>(o) * G];
        std::size_t arg = 0;
        for (std::size_t k = 1; k < G; ++k)
          if (row[k] > row[arg]) arg = k;
        chosen[o] = static_cast<int>(arg);
      }
      for (int s = 0; s < S; ++s) {
        double future = 0.0;
        for (const auto& e : sparse.row(a, s)) future += e.prob * gamma[chosen[e.obs]].values[s];
        alpha[s] = p.reward(s, a) + p.discount * future;
      }
    }
    const double v = sparse_dot(alpha, b);
    if (v > best_value + 1e-12) {
      best_value = v;
      best.values = alpha;
      best.action = a;
    }
  }
  return best;
}

class Solver {
 public:
  Solver(const pomdp::DiscretePOMDP& p, const SolverOptions& opt)
      : p_(p), opt_(opt), sparse_(p), dense_(p.n_states, 0.0) {
    auto init = initial_bounds(p);
    gamma_ = std::move(init.lower);
    upper_ = UpperBound(std::move(init.upper));
  }

  AlphaPolicy run(std::span<const double> b0) {
    const auto t0 = std::chrono::steady_clock::now();
    const SparseBelief root = sparse_of(b0);
    visited_.push_back(root);
    AlphaPolicy out;
    int it = 0;
    update_point(root);
    double prev_gap = gap(root);
    for (; it < opt_.max_iterations; ++it) {
      if (gap(root) <= opt_.epsilon) break;
      if (opt_.time_budget_s > 0.0 &&
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > opt_.time_budget_s)
        break;

      std::vector<SparseBelief> path;
      explore(root, path);
      for (auto ip = path.rbegin(); ip != path.rend(); ++ip) update_point(*ip);
      update_point(root);
      for (auto& b : path) visited_.push_back(std::move(b));

      IterationRecord rec;
      rec.iteration = it + 1;
      if ((it + 1) % opt_.prune_every == 0) rec.prune_ok = prune();
      rec.lower = lower_value(gamma_, root);
      rec.upper = upper_value(root);
      rec.n_alphas = gamma_.size();
      if (opt_.observer) {
        for (const auto& b : visited_)
          rec.sandwich_ok = rec.sandwich_ok && lower_value(gamma_, b) <= upper_value(b) + 1e-6;
        opt_.observer(rec);
      }
      const double g = rec.upper - rec.lower;
      if (g > prev_gap + 1e-9) throw std::logic_error("solver gap increased at the root belief");
      prev_gap = g;
    }
    out.converged = gap(root) <= opt_.epsilon;
    prune();
    out.alphas = gamma_;
    out.lower_bound_value = lower_value(gamma_, root);
    out.upper_bound_value = upper_value(root);
    out.iterations = it;
    return out;
  }

 private:
  double upper_value(const SparseBelief& b) {
    for (std::size_t k = 0; k < b.idx.size(); ++k) dense_[b.idx[k]] = b.p[k];
    const double v = upper_.value(dense_, b.idx);
    for (int s : b.idx) dense_[s] = 0.0;
    return v;
  }

  double gap(const SparseBelief& b) { return upper_value(b) - lower_value(gamma_, b); }

  double reward(const SparseBelief& b, int a) const {
    double r = 0.0;
    for (std::size_t k = 0; k < b.idx.size(); ++k) r += b.p[k] * p_.reward(b.idx[k], a);
    return r;
  }

  double upper_q(const SparseBelief& b, int a) {
    const double r = reward(b, a);
    if (p_.terminal(a)) return r;
    branches(b, a, sparse_, p_.n_obs, next_, prob_);
    double future = 0.0;
    for (int o = 0; o < p_.n_obs; ++o)
      if (prob_[o] > 0.0) future += prob_[o] * upper_value(next_[o]);
    return r + p_.discount * future;
  }

  int best_upper_action(const SparseBelief& b, double* value) {
    int best = 0;
    double bv = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < p_.n_actions(); ++a) {
      const double q = upper_q(b, a);
      if (q > bv + 1e-12) {
        bv = q;
        best = a;
      }
    }
    if (value) *value = bv;
    return best;
  }

  void update_point(const SparseBelief& b) {
    AlphaVector alpha = backup_impl(b, gamma_, p_, sparse_);
    if (sparse_dot(alpha.values, b) > lower_value(gamma_, b) + 1e-12) gamma_.push_back(std::move(alpha));
    double v = 0.0;
    best_upper_action(b, &v);
    for (std::size_t k = 0; k < b.idx.size(); ++k) dense_[b.idx[k]] = b.p[k];
    upper_.update(dense_, v);
    for (int s : b.idx) dense_[s] = 0.0;
  }

  void explore(const SparseBelief& root, std::vector<SparseBelief>& path) {
    SparseBelief b = root;
    double threshold = opt_.epsilon;
    for (int depth = 0; depth < opt_.max_depth; ++depth) {
      if (gap(b) <= threshold) break;
      if (depth > 0) path.push_back(b);
      const int a = best_upper_action(b, nullptr);
      if (p_.terminal(a)) break;
      threshold /= p_.discount;
      branches(b, a, sparse_, p_.n_obs, next_, prob_);
      int best_o = -1;
      double best_score = 0.0;
      for (int o = 0; o < p_.n_obs; ++o) {
        if (prob_[o] <= 0.0) continue;
        const double score = prob_[o] * (gap(next_[o]) - threshold);
        if (score > best_score) {
          best_score = score;
          best_o = o;
        }
      }
      if (best_o < 0) break;
      b = next_[best_o];
    }
  }

  /// Drops alpha vectors that are not the maximizer at any visited belief.
  bool prune() {
    std::vector<double> before(visited_.size());
    std::vector<char> keep(gamma_.size(), 0);
    for (std::size_t i = 0; i < visited_.size(); ++i) {
      std::size_t arg = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < gamma_.size(); ++k) {
        const double v = sparse_dot(gamma_[k].values, visited_[i]);
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      before[i] = best;
      keep[arg] = 1;
    }
    std::vector<AlphaVector> kept;
    for (std::size_t k = 0; k < gamma_.size(); ++k)
      if (keep[k]) kept.push_back(std::move(gamma_[k]));
    gamma_ = std::move(kept);
    bool ok = true;
    for (std::size_t i = 0; i < visited_.size(); ++i) ok = ok && lower_value(gamma_, visited_[i]) >= before[i] - 1e-12;
    return ok;
  }

  const pomdp::DiscretePOMDP& p_;
  SolverOptions opt_;
  SparseObs sparse_;
  std::vector<double> dense_;
  std::vector<AlphaVector> gamma_;
  UpperBound upper_;
  std::vector<SparseBelief> visited_;
  std::vector<SparseBelief> next_;
  std::vector<double> prob_;
};

}  // namespace

AlphaVector backup(std::span<const double> b, std::span<const AlphaVector> gamma, const pomdp::DiscretePOMDP& p) {
  p.validate();
  check_simplex(b, p.n_states);
  if (gamma.empty()) throw std::invalid_argument("backup: empty alpha set");
  return backup_impl(sparse_of(b), gamma, p, SparseObs(p));
}

AlphaPolicy solve(const pomdp::DiscretePOMDP& p, std::span<const double> b0, const SolverOptions& opt) {
  if (!(opt.epsilon > 0.0)) throw std::invalid_argument("solve: epsilon must be > 0");
  p.validate();
  check_simplex(b0, p.n_states);
  Solver solver(p, opt);
  return solver.run(b0);
}

int act(const AlphaPolicy& policy, std::span<const double> b) {
  if (policy.alphas.empty()) throw std::invalid_argument("act: policy has no alpha vectors");
  int best_action = -1;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : policy.alphas) {
    const double v = dot(a.values, b);
    if (v > best + 1e-12 || (v >= best - 1e-12 && a.action < best_action)) {
      best = std::max(best, v);
      best_action = a.action;
    }
  }
  return best_action;
}

double q_value(const AlphaPolicy& policy, std::span<const double> b, int a, const pomdp::DiscretePOMDP& p) {
  if (policy.alphas.empty()) throw std::invalid_argument("q_value: policy has no alpha vectors");
  double q = 0.0;
  for (int s = 0; s < p.n_states; ++s) q += b[s] * p.reward(s, a);
  if (p.terminal(a)) return q;
  std::vector<double> next;
  double future = 0.0;
  for (int o = 0; o < p.n_obs; ++o) {
    const double po = successor(b, a, o, p, next);
    if (po <= 0.0) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& alpha : policy.alphas) best = std::max(best, dot(alpha.values, next));
    future += po * best;
  }
  return q + p.discount * future;
}

void write_policy(std::ostream& os, const AlphaPolicy& policy) {
  os << std::setprecision(17);
  const std::size_t S = policy.alphas.empty() ? 0 : policy.alphas.front().values.size();
  os << "policy 1 states " << S << " alphas " << policy.alphas.size() << " lower " << policy.lower_bound_value
     << " upper " << policy.upper_bound_value << " converged " << (policy.converged ? 1 : 0) << " iterations "
     << policy.iterations << "\n";
  for (const auto& a : policy.alphas) {
    os << a.action;
    for (double v : a.values) os << " " << v;
    os << "\n";
  }
  os << "end\n";
}

AlphaPolicy read_policy(std::istream& is) {
  auto expect = [&](const char* w) {
    std::string got;
    if (!(is >> got) || got != w) throw std::runtime_error(std::string("policy dump: expected '") + w + "'");
  };
  AlphaPolicy p;
  int version = 0, conv = 0;
  std::size_t S = 0, n = 0;
  expect("policy");
  is >> version;
  if (version != 1) throw std::runtime_error("policy dump: unsupported version");
  expect("states");
  is >> S;
  expect("alphas");
  is >> n;
  expect("lower");
  is >> p.lower_bound_value;
  expect("upper");
  is >> p.upper_bound_value;
  expect("converged");
  is >> conv;
  p.converged = conv != 0;
  expect("iterations");
  is >> p.iterations;
  p.alphas.resize(n);
  for (auto& a : p.alphas) {
    is >> a.action;
    a.values.resize(S);
    for (auto& v : a.values) is >> v;
  }
  expect("end");
  if (!is) throw std::runtime_error("policy dump: truncated input");
  return p;
}

PlanResult plan_step(const belief::Belief& b, const PlannerConfig& cfg, const geo::EconParams& e, RngStream& rng,
                     bool drill_only) {
  const auto t0 = std::chrono::steady_clock::now();
  const pomdp::DiscretePOMDP p = pomdp::build_discrete_pomdp(b, cfg.discretization, e, rng);
  const std::vector<double> b0(p.n_states, 1.0 / p.n_states);
  const AlphaPolicy policy = solve(p, b0, cfg.solver);
  PlanResult out;
  int chosen = act(policy, b0);
  if (drill_only && p.terminal(chosen)) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < p.n_actions(); ++a) {
      if (p.terminal(a)) continue;
      const double q = q_value(policy, b0, a, p);
      if (q > best) {
        best = q;
        chosen = a;
      }
    }
  }
  out.action = p.actions[chosen];
  out.diagnostics.lower_bound = policy.lower_bound_value;
  out.diagnostics.upper_bound = policy.upper_bound_value;
  out.diagnostics.converged = policy.converged;
  out.diagnostics.iterations = policy.iterations;
  out.diagnostics.n_alphas = policy.alphas.size();
  out.diagnostics.n_states = p.n_states;
  out.diagnostics.n_actions = p.n_actions();
  out.diagnostics.n_observations = p.n_obs;
  out.diagnostics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace prospector::sarsop

#include "prospector/belief.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace prospector::belief {

namespace {

std::vector<gp::Point> points_of(const std::vector<DrillObservation>& obs) {
  std::vector<gp::Point> pts;
  pts.reserve(obs.size());
  for (const auto& o : obs) pts.push_back(gp::to_point(o.location));
  return pts;
}

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

constexpr int kMaxTemperStages = 20;
constexpr std::uint64_t kTemperKey = 0x7e3a0000;

// Effective sample size of weights w * exp(delta * inc), as a particle count.
double conditional_ess(std::span<const double> inc, std::span<const double> w, double delta) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < inc.size(); ++i)
    if (w[i] > 0) mx = std::max(mx, delta * inc[i]);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < inc.size(); ++i) {
    if (w[i] <= 0) continue;
    const double v = w[i] * std::exp(delta * inc[i] - mx);
    s1 += v;
    s2 += v * v;
  }
  return s2 > 0 ? s1 * s1 / s2 : 0.0;
}

std::size_t pick(std::span<const double> weights, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Rounding left u beyond the running sum; take the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0) return i;
  return 0;
}

/// Weights over the human hypotheses only, renormalized.
std::vector<double> structural_weights(const Belief& b) {
  const auto& hs = b.hypotheses();
  std::vector<double> w(b.hypothesis_weights().begin(), b.hypothesis_weights().begin() + hs.size());
  double total = 0.0;
  for (double x : w) total += x;
  if (total <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
  } else {
    for (double& x : w) x /= total;
  }
  return w;
}

Eigen::MatrixXd diagonal_chol(std::span<const double> std) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(std.size()), static_cast<Eigen::Index>(std.size()));
  for (std::size_t i = 0; i < std.size(); ++i) l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = std[i];
  return l;
}

}  // namespace

ObservationModel::ObservationModel(std::vector<DrillObservation> obs, const geo::FieldParams& fields)
    : obs_(std::move(obs)), fields_(fields), cond_(points_of(obs_), fields.noise_std, fields.kernel) {}

std::vector<int> ObservationModel::cell_indices() const {
  std::vector<int> idx;
  idx.reserve(obs_.size());
  for (const auto& o : obs_) idx.push_back(fields_.shape.index(o.location));
  return idx;
}

void ObservationModel::residuals(const geo::GeometryParams& geometry, std::vector<double>& thickness,
                                 std::vector<double>& grade) const {
  thickness.resize(obs_.size());
  grade.resize(obs_.size());
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    const auto& o = obs_[i];
    thickness[i] = o.thickness - fields_.thickness_mean(geo::in_graben(geometry, o.location, fields_.shape));
    grade[i] = o.grade - fields_.grade_mean(geo::in_geochem(geometry, o.location));
  }
}

double ObservationModel::loglik(const geo::GeometryParams& geometry) const {
  if (obs_.empty()) return 0.0;
  int mismatches = 0;
  std::vector<double> th(obs_.size()), g(obs_.size());
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    const auto& o = obs_[i];
    const bool gr = geo::in_graben(geometry, o.location, fields_.shape);
    const bool ch = geo::in_geochem(geometry, o.location);
    mismatches += (gr != o.graben) + (ch != o.geochem);
    th[i] = o.thickness - fields_.thickness_mean(gr);
    g[i] = o.grade - fields_.grade_mean(ch);
  }
  const double fields_ll = cond_.log_density(th) + cond_.log_density(g);
  // A mismatch always lands at or below the sentinel; the count keeps ordering among inconsistent geometries.
  if (mismatches > 0) return mismatches * kDomainMismatch + std::min(0.0, fields_ll);
  return fields_ll;
}

std::vector<double> Belief::log_evidence() const { return log_evidence_; }

bool Belief::drilled(Cell c) const {
  const auto& obs = observations();
  return std::any_of(obs.begin(), obs.end(), [&](const auto& o) { return o.location == c; });
}

Belief belief_from_particles(std::vector<HypothesisParticles> hypotheses, const BeliefConfig& config,
                             std::shared_ptr<const falsify::NullModel> null) {
  if (hypotheses.empty()) throw std::invalid_argument("belief: empty hypothesis list");
  double total = config.null_prior;
  for (const auto& hp : hypotheses) {
    if (hp.spec.prior_prob < 0.0 || hp.spec.prior_prob > 1.0) throw std::invalid_argument("belief: prior outside [0,1]");
    if (hp.particles.empty()) throw std::invalid_argument("belief: hypothesis without particles");
    total += hp.spec.prior_prob;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("belief: priors do not sum to 1");
  if (config.null_prior > 0.0 && !null) throw std::invalid_argument("belief: null prior without a null model");

  Belief b;
  b.config_ = config;
  b.null_ = std::move(null);
  b.obs_ = std::make_shared<const ObservationModel>(std::vector<DrillObservation>{}, config.fields);
  for (auto& hp : hypotheses) {
    double wsum = 0.0;
    for (const auto& p : hp.particles) wsum += p.weight;
    for (auto& p : hp.particles) {
      p.weight = wsum > 0 ? p.weight / wsum : 1.0 / static_cast<double>(hp.particles.size());
      p.loglik = 0.0;
    }
    b.weights_.push_back(hp.spec.prior_prob);
  }
  b.hypotheses_ = std::move(hypotheses);
  if (b.null_) b.weights_.push_back(config.null_prior);
  b.log_evidence_.assign(b.weights_.size(), 0.0);
  return b;
}

Belief init_belief(std::span<const geo::HypothesisSpec> hypotheses, const BeliefConfig& config, RngStream& rng,
                   std::shared_ptr<const falsify::NullModel> null) {
  if (hypotheses.empty()) throw std::invalid_argument("init_belief: empty hypothesis list");
  if (config.n_particles < 1) throw std::invalid_argument("init_belief: n_particles must be >= 1");
  std::vector<HypothesisParticles> hps;
  const double w = 1.0 / config.n_particles;
  for (std::size_t hi = 0; hi < hypotheses.size(); ++hi) {
    HypothesisParticles hp{hypotheses[hi], {}};
    RngStream hr = rng.derive(hi + 1);
    for (int i = 0; i < config.n_particles; ++i) {
      RngStream pr = hr.derive(static_cast<std::uint64_t>(i));
      hp.particles.push_back({geo::sample_geometry(hypotheses[hi], config.geometry_prior, pr), w, 0.0});
    }
    hps.push_back(std::move(hp));
  }
  return belief_from_particles(std::move(hps), config, std::move(null));
}

double loglik_given_geometry(std::span<const DrillObservation> obs, const geo::HypothesisSpec& h,
                             const geo::GeometryParams& geometry, const geo::FieldParams& fields) {
  if (geometry.grabens.size() != static_cast<std::size_t>(h.n_grabens) ||
      geometry.domains.size() != static_cast<std::size_t>(h.n_geochem))
    throw std::invalid_argument("geometry does not match hypothesis structure");
  if (obs.empty()) return 0.0;
  const ObservationModel model(std::vector<DrillObservation>(obs.begin(), obs.end()), fields);
  return model.loglik(geometry);
}

double log_weighted_mean_exp(std::span<const double> logliks, std::span<const double> weights) {
  if (logliks.size() != weights.size() || logliks.empty())
    throw std::invalid_argument("log_weighted_mean_exp: size mismatch");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logliks.size(); ++i)
    if (weights[i] > 0) mx = std::max(mx, logliks[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < logliks.size(); ++i) {
    if (weights[i] <= 0) continue;
    s += weights[i] * std::exp(logliks[i] - mx);
    wsum += weights[i];
  }
  return mx + std::log(s / wsum);
}

double hypothesis_loglik(std::span<const DrillObservation> obs, const geo::HypothesisSpec& h,
                         std::span<const Particle> particles, const geo::FieldParams& fields) {
  if (particles.empty()) throw std::invalid_argument("hypothesis_loglik: no particles");
  if (obs.empty()) return 0.0;
  const ObservationModel model(std::vector<DrillObservation>(obs.begin(), obs.end()), fields);
  std::vector<double> ll, w;
  for (const auto& p : particles) {
    if (p.geometry.grabens.size() != static_cast<std::size_t>(h.n_grabens))
      throw std::invalid_argument("particle does not match hypothesis structure");
    ll.push_back(model.loglik(p.geometry));
    w.push_back(p.weight);
  }
  return log_weighted_mean_exp(ll, w);
}

EssResult ess_step(std::span<const double> current, double current_loglik, std::span<const double> prior_mean,
                   const Eigen::MatrixXd& prior_chol, const LogLikFn& loglik, RngStream& rng) {
  const auto n = current.size();
  if (prior_mean.size() != n || static_cast<std::size_t>(prior_chol.rows()) != n)
    throw std::invalid_argument("ess_step: dimension mismatch");
  if (!std::isfinite(current_loglik))
    throw std::domain_error("ess_step: log-likelihood at the current point is not finite");

  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const Eigen::VectorXd nu = prior_chol.triangularView<Eigen::Lower>() * z;

  const double threshold = current_loglik + std::log(rng.uniform());
  double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double lo = theta - 2.0 * std::numbers::pi;
  double hi = theta;

  EssResult out;
  out.point.resize(n);
  for (int shrinks = 0;; ++shrinks) {
    const double c = std::cos(theta), s = std::sin(theta);
    for (std::size_t i = 0; i < n; ++i)
      out.point[i] = (current[i] - prior_mean[i]) * c + nu(static_cast<Eigen::Index>(i)) * s + prior_mean[i];
    const double ll = loglik(out.point);
    if (ll > threshold) {
      out.loglik = ll;
      out.shrinks = shrinks;
      out.final_angle = theta;
      out.bracket_lo = lo;
      out.bracket_hi = hi;
      return out;
    }
    if (shrinks + 1 >= kMaxEssShrinks) break;
    if (theta < 0.0)
      lo = theta;
    else
      hi = theta;
    theta = rng.uniform(lo, hi);
  }
  // Bracket collapsed onto the current point.
  out.point.assign(current.begin(), current.end());
  out.loglik = current_loglik;
  out.shrinks = kMaxEssShrinks;
  out.final_angle = 0.0;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  return out;
}

std::vector<double> ess_step(std::span<const double> current, std::span<const double> prior_mean,
                             const Eigen::MatrixXd& prior_chol, const LogLikFn& loglik, RngStream& rng) {
  return ess_step(current, loglik(current), prior_mean, prior_chol, loglik, rng).point;
}

Belief update_belief(const Belief& b, const DrillObservation& o, int ess_sweeps, RngStream& rng) {
  const auto& fields = b.config_.fields;
  if (!fields.shape.contains(o.location)) throw std::invalid_argument("update_belief: location outside the grid");
  if (b.drilled(o.location))
    throw std::invalid_argument("update_belief: cell (" + std::to_string(o.location.x) + "," +
                                std::to_string(o.location.y) + ") already drilled");
  if (!b.observations().empty() && o.step_index <= b.observations().back().step_index)
    throw std::invalid_argument("update_belief: step_index must increase");
  if (!std::isfinite(o.thickness) || !std::isfinite(o.grade))
    throw std::invalid_argument("update_belief: observation values must be finite");

  Belief next;
  next.config_ = b.config_;
  next.null_ = b.null_;
  auto obs = b.observations();
  obs.push_back(o);
  next.obs_ = std::make_shared<const ObservationModel>(std::move(obs), fields);
  const ObservationModel& model = *next.obs_;
  const ObservationModel& old_model = *b.obs_;
  next.log_evidence_ = b.log_evidence_;

  for (std::size_t hi = 0; hi < b.hypotheses_.size(); ++hi) {
    const auto& src = b.hypotheses_[hi];
    const auto& spec = src.spec;
    const std::size_t n = src.particles.size();
    RngStream hr = rng.derive(hi + 1);

    std::vector<double> mean, std;
    geo::prior_moments(spec, b.config_.geometry_prior, mean, std);
    const Eigen::MatrixXd chol = diagonal_chol(std);

    // Incremental evidence: average of the new observation's conditional
    // likelihood over particles drawn from the previous posterior. If no
    // particle agrees with the new domain indicators that average is pure
    // sentinel, so the observation is tempered in over several resample-move
    // stages, letting particles reach the consistent region first.
    std::vector<Particle> cur = src.particles;
    std::vector<double> old_ll(n), new_ll(n);
    for (std::size_t i = 0; i < n; ++i) {
      old_ll[i] = cur[i].loglik;
      new_ll[i] = model.loglik(cur[i].geometry);
    }
    double beta = 0.0;
    for (int stage = 0; beta < 1.0; ++stage) {
      RngStream sr = stage == 0 ? hr : hr.derive(kTemperKey + static_cast<std::uint64_t>(stage));
      std::vector<double> inc(n), w(n);
      double max_inc = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        inc[i] = new_ll[i] - old_ll[i];
        w[i] = cur[i].weight;
        max_inc = std::max(max_inc, inc[i]);
      }
      const double remaining = 1.0 - beta;
      double delta = remaining;
      if (stage + 1 < kMaxTemperStages) {
        if (max_inc < 0.5 * kDomainMismatch) {
          delta = std::min(remaining, 1.0 / -max_inc);
        } else if (stage > 0 && conditional_ess(inc, w, remaining) < 0.5 * static_cast<double>(n)) {
          double ok = 0.0, bad = remaining;
          for (int it = 0; it < 50; ++it) {
            const double mid = 0.5 * (ok + bad);
            (conditional_ess(inc, w, mid) >= 0.5 * static_cast<double>(n) ? ok : bad) = mid;
          }
          delta = std::max(ok, 1e-12 * remaining);
        }
      }
      std::vector<double> scaled(n);
      for (std::size_t i = 0; i < n; ++i) scaled[i] = delta * inc[i];
      next.log_evidence_[hi] += log_weighted_mean_exp(scaled, w);
      beta = delta == remaining ? 1.0 : beta + delta;

      std::vector<double> lw(n);
      for (std::size_t i = 0; i < n; ++i) lw[i] = (w[i] > 0 ? std::log(w[i]) : -1e300) + scaled[i];
      const double norm = log_sum_exp(lw);
      for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(lw[i] - norm);

      // Systematic resampling, then an ESS refresh of every particle.
      std::vector<std::size_t> ancestors(n);
      {
        const double u0 = sr.uniform() / static_cast<double>(n);
        double acc = w[0];
        std::size_t j = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double u = u0 + static_cast<double>(i) / static_cast<double>(n);
          while (u > acc && j + 1 < n) acc += w[++j];
          ancestors[i] = j;
        }
      }

      const double bt = beta;
      const LogLikFn target = [&](std::span<const double> v) {
        const auto g = geo::from_vector(spec, v);
        return bt == 1.0 ? model.loglik(g) : (1.0 - bt) * old_model.loglik(g) + bt * model.loglik(g);
      };
      std::vector<Particle> moved;
      moved.reserve(n);
      std::vector<double> moved_old(n), moved_new(n);
      for (std::size_t i = 0; i < n; ++i) {
        RngStream pr = sr.derive(i + 1);
        const std::size_t a = ancestors[i];
        std::vector<double> x = geo::to_vector(cur[a].geometry);
        double lx = bt == 1.0 ? new_ll[a] : (1.0 - bt) * old_ll[a] + bt * new_ll[a];
        for (int s = 0; s < ess_sweeps; ++s) {
          auto step = ess_step(x, lx, mean, chol, target, pr);
          x = std::move(step.point);
          lx = step.loglik;
        }
        const auto g = geo::from_vector(spec, x);
        if (bt == 1.0) {
          moved_new[i] = lx;
        } else {
          moved_old[i] = old_model.loglik(g);
          moved_new[i] = model.loglik(g);
        }
        moved.push_back({g, 1.0 / static_cast<double>(n), lx});
      }
      cur = std::move(moved);
      old_ll = std::move(moved_old);
      new_ll = std::move(moved_new);
    }
    HypothesisParticles dst{spec, std::move(cur)};
    next.hypotheses_.push_back(std::move(dst));
  }

  if (next.null_) next.log_evidence_.back() = falsify::null_loglik(*next.null_, model.observations());

  std::vector<double> lw(next.log_evidence_.size());
  for (std::size_t i = 0; i < lw.size(); ++i) {
    const double prior = i < next.hypotheses_.size() ? next.hypotheses_[i].spec.prior_prob : next.config_.null_prior;
    lw[i] = prior > 0 ? std::log(prior) + next.log_evidence_[i] : -std::numeric_limits<double>::infinity();
  }
  const double norm = log_sum_exp(lw);
  next.weights_.resize(lw.size());
  for (std::size_t i = 0; i < lw.size(); ++i) next.weights_[i] = std::exp(lw[i] - norm);

  next.trace_ = b.trace_;
  next.trace_.push_back(next.log_evidence_);
  return next;
}

namespace {

std::vector<PredictiveSummary> predictive_at(const Belief& b, std::span<const Cell> cells) {
  const auto& model = b.observation_model();
  const auto& fields = model.fields();
  const auto& cond = model.conditioner();
  std::vector<gp::Point> q;
  q.reserve(cells.size());
  for (Cell c : cells) q.push_back(gp::to_point(c));
  const std::vector<double> kvar = cond.predictive_variance(q);
  Eigen::MatrixXd kq;
  if (cond.size() > 0) kq = gp::gram(q, cond.locations(), fields.kernel);

  const std::vector<double> hw = structural_weights(b);
  std::vector<double> th1(cells.size(), 0.0), th2(cells.size(), 0.0), g1(cells.size(), 0.0), g2(cells.size(), 0.0);
  std::vector<double> rt, rg;
  for (std::size_t hi = 0; hi < b.hypotheses().size(); ++hi) {
    if (hw[hi] <= 0) continue;
    for (const auto& p : b.hypotheses()[hi].particles) {
      const double w = hw[hi] * p.weight;
      if (w <= 0) continue;
      Eigen::VectorXd wt, wg;
      if (cond.size() > 0) {
        model.residuals(p.geometry, rt, rg);
        wt = kq * cond.solve(rt);
        wg = kq * cond.solve(rg);
      }
      for (std::size_t i = 0; i < cells.size(); ++i) {
        double mt = fields.thickness_mean(geo::in_graben(p.geometry, cells[i], fields.shape));
        double mg = fields.grade_mean(geo::in_geochem(p.geometry, cells[i]));
        if (cond.size() > 0) {
          mt += wt(static_cast<Eigen::Index>(i));
          mg += wg(static_cast<Eigen::Index>(i));
        }
        th1[i] += w * mt;
        th2[i] += w * mt * mt;
        g1[i] += w * mg;
        g2[i] += w * mg * mg;
      }
    }
  }
  std::vector<PredictiveSummary> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out[i].thickness = {th1[i], kvar[i] + std::max(0.0, th2[i] - th1[i] * th1[i])};
    out[i].grade = {g1[i], kvar[i] + std::max(0.0, g2[i] - g1[i] * g1[i])};
  }
  return out;
}

}  // namespace

PredictiveSummary posterior_predictive(const Belief& b, Cell cell) {
  const Cell cells[] = {cell};
  return predictive_at(b, cells).front();
}

PredictiveGrids predictive_grids(const Belief& b) {
  const auto shape = b.config().fields.shape;
  std::vector<Cell> cells(shape.size());
  for (int i = 0; i < shape.size(); ++i) cells[i] = shape.cell(i);
  const auto s = predictive_at(b, cells);
  PredictiveGrids g{Grid<double>(shape), Grid<double>(shape), Grid<double>(shape), Grid<double>(shape)};
  for (int i = 0; i < shape.size(); ++i) {
    g.thickness_mean.at(i) = s[i].thickness.mean;
    g.thickness_std.at(i) = std::sqrt(s[i].thickness.variance);
    g.grade_mean.at(i) = s[i].grade.mean;
    g.grade_std.at(i) = std::sqrt(s[i].grade.variance);
  }
  return g;
}

geo::GeoModel sample_state(const Belief& b, RngStream& rng) {
  const auto& model = b.observation_model();
  const auto& fields = model.fields();
  const std::vector<double> hw = structural_weights(b);
  const std::size_t hi = pick(hw, rng.uniform());
  const auto& hp = b.hypotheses()[hi];
  std::vector<double> pw;
  pw.reserve(hp.particles.size());
  for (const auto& p : hp.particles) pw.push_back(p.weight);
  const auto& particle = hp.particles[pick(pw, rng.uniform())];

  auto graben = geo::rasterize_graben(particle.geometry, fields.shape);
  auto geochem = geo::rasterize_geochem(particle.geometry, fields.shape);
  geo::GeoModel m;
  m.hypothesis_id = hp.spec.id;
  m.thickness = Grid<double>(fields.shape);
  m.grade = Grid<double>(fields.shape);

  const auto prior = gp::shared_grid_prior(fields.shape, fields.kernel);
  std::vector<double> rt, rg;
  model.residuals(particle.geometry, rt, rg);
  const std::vector<int> idx = model.cell_indices();
  const Eigen::VectorXd ft = prior->conditional_sample(idx, rt, model.conditioner(), rng);
  const Eigen::VectorXd fg = prior->conditional_sample(idx, rg, model.conditioner(), rng);
  for (int i = 0; i < fields.shape.size(); ++i) {
    m.thickness.at(i) = fields.thickness_mean(graben.at(i) != 0) + ft(i);
    m.grade.at(i) = fields.grade_mean(geochem.at(i) != 0) + fg(i);
  }
  m.graben_mask = std::move(graben);
  m.geochem_mask = std::move(geochem);
  return m;
}

ProfitEstimate expected_profit(const Belief& b, const geo::EconParams& e, int n_mc, RngStream& rng) {
  if (n_mc < 1) throw std::invalid_argument("expected_profit: n_mc must be >= 1");
  // Welford accumulation.
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    const double p = geo::profit(sample_state(b, rng), e, 0);
    const double d = p - mean;
    mean += d / (i + 1);
    m2 += d * (p - mean);
  }
  ProfitEstimate out;
  out.mean = mean;
  out.std = n_mc > 1 ? std::sqrt(m2 / (n_mc - 1)) : 0.0;
  return out;
}

}  // namespace prospector::belief

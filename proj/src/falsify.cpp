#include "prospector/falsify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "prospector/belief.hpp"

namespace prospector::falsify {

void NullModel::validate() const {
  for (const auto* mix : {&thickness_mixture, &grade_mixture}) {
    if (mix->empty()) throw std::invalid_argument("null mixture has no components");
    double total = 0.0;
    for (const auto& c : *mix) {
      if (!(c.weight > 0.0) || !(c.std > 0.0)) throw std::invalid_argument("null mixture component is degenerate");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("null mixture weights do not sum to 1");
  }
}

double mixture_logpdf(std::span<const MixtureComponent> mix, double x) {
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(mix.size());
  for (const auto& c : mix) {
    const double z = (x - c.mean) / c.std;
    terms.push_back(std::log(c.weight) - 0.5 * z * z - std::log(c.std) - 0.5 * std::log(2.0 * std::numbers::pi));
    mx = std::max(mx, terms.back());
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

namespace {

struct Moments {
  long n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double std() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

std::vector<MixtureComponent> two_component(const Moments& out, const Moments& in) {
  const double total = static_cast<double>(out.n + in.n);
  std::vector<MixtureComponent> mix;
  for (const auto* m : {&out, &in}) {
    if (m->n == 0) continue;
    mix.push_back({static_cast<double>(m->n) / total, m->mean, std::max(1e-6, m->std())});
  }
  return mix;
}

}  // namespace

NullModel build_null(std::span<const geo::HypothesisSpec> hypotheses, int n_calibration, const geo::GeometryPrior& prior,
                     const geo::FieldParams& fields, RngStream& rng) {
  if (hypotheses.empty()) throw std::invalid_argument("build_null: empty hypothesis list");
  if (n_calibration < 100) throw std::invalid_argument("build_null: n_calibration must be >= 100");
  std::vector<double> w;
  double total = 0.0;
  for (const auto& h : hypotheses) {
    w.push_back(std::max(0.0, h.prior_prob));
    total += w.back();
  }
  if (total <= 0.0) std::fill(w.begin(), w.end(), 1.0);

  Moments th_out, th_in, g_out, g_in;
  std::discrete_distribution<std::size_t> choose(w.begin(), w.end());
  for (int t = 0; t < n_calibration; ++t) {
    const auto& h = hypotheses[choose(rng.engine())];
    const geo::GeoModel m = geo::sample_truth(h, prior, fields, rng);
    for (int i = 0; i < fields.shape.size(); ++i) {
      (m.graben_mask.at(i) ? th_in : th_out).add(m.thickness.at(i));
      (m.geochem_mask.at(i) ? g_in : g_out).add(m.grade.at(i));
    }
  }
  NullModel null{two_component(th_out, th_in), two_component(g_out, g_in)};
  null.validate();
  return null;
}

double null_loglik(const NullModel& model, std::span<const belief::DrillObservation> obs) {
  double total = 0.0;
  for (const auto& o : obs) {
    total += mixture_logpdf(model.thickness_mixture, o.thickness);
    total += mixture_logpdf(model.grade_mixture, o.grade);
    total += 2.0 * std::log(0.5);
  }
  return total;
}

FalsificationStatus falsification_status(const belief::Belief& b, const NullModel& model, double margin) {
  if (margin < 0.0) throw std::invalid_argument("falsification margin must be >= 0");
  FalsificationStatus s;
  s.null_loglik = null_loglik(model, b.observations());
  const auto evidence = b.log_evidence();
  s.all_falsified = !b.hypotheses().empty();
  for (std::size_t i = 0; i < b.hypotheses().size(); ++i) {
    s.hypothesis_ids.push_back(b.hypotheses()[i].spec.id);
    s.hypothesis_loglik.push_back(evidence[i]);
    const bool f = is_falsified(evidence[i], s.null_loglik, margin);
    s.falsified.push_back(f);
    s.all_falsified = s.all_falsified && f;
  }
  return s;
}

}  // namespace prospector::falsify

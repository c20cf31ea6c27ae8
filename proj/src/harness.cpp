#include "prospector/harness.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "prospector/serialize.hpp"

namespace prospector::harness {

std::string to_string(PolicyKind p) { return p == PolicyKind::Grid ? "grid" : "pomdp"; }

std::string to_string(Decision d) {
  switch (d) {
    case Decision::Develop:
      return "develop";
    case Decision::Abandon:
      return "abandon";
    case Decision::None:
      break;
  }
  return "none";
}

PolicyKind parse_policy(const std::string& s) {
  if (s == "grid") return PolicyKind::Grid;
  if (s == "pomdp") return PolicyKind::Pomdp;
  throw std::invalid_argument("unknown policy '" + s + "'");
}

Decision parse_decision(const std::string& s) {
  if (s == "develop") return Decision::Develop;
  if (s == "abandon") return Decision::Abandon;
  if (s == "none") return Decision::None;
  throw std::invalid_argument("unknown decision '" + s + "'");
}

Cell grid_cell(int step, GridShape shape) {
  if (step < 0 || step >= kGridHoles) throw std::out_of_range("grid_cell: step outside 0..35");
  auto coord = [](int i, int n) { return static_cast<int>(std::round((i + 0.5) * n / 6.0)); };
  return {coord(step % 6, shape.nx), coord(step / 6, shape.ny)};
}

pomdp::Action sign_decision(double expected_profit) {
  return expected_profit > 0.0 ? pomdp::Action::develop() : pomdp::Action::abandon();
}

pomdp::Action grid_policy(int step, const belief::Belief& b, const geo::EconParams& e, int n_mc, RngStream& rng) {
  if (step < 0 || step > kGridHoles) throw std::out_of_range("grid_policy: step outside 0..36");
  if (step < kGridHoles) return pomdp::Action::drill(grid_cell(step, b.config().fields.shape));
  return sign_decision(belief::expected_profit(b, e, n_mc, rng).mean);
}

bool decision_correct(Decision d, double true_profit) {
  return (d == Decision::Develop && true_profit > 0.0) || (d == Decision::Abandon && true_profit <= 0.0);
}

namespace {

Decision decision_of(const pomdp::Action& a) {
  if (a.kind == pomdp::ActionKind::Develop) return Decision::Develop;
  if (a.kind == pomdp::ActionKind::Abandon) return Decision::Abandon;
  return Decision::None;
}

}  // namespace

TrialResult run_trial(const geo::GeoModel& truth, std::span<const geo::HypothesisSpec> hypotheses, PolicyKind policy,
                      const TrialConfig& cfg, const std::shared_ptr<const falsify::NullModel>& null, RngStream& rng) {
  TrialResult r;
  r.policy = policy;
  r.truth_hypothesis = truth.hypothesis_id;
  r.true_profit = geo::profit(truth, cfg.econ, 0);
  for (const auto& h : hypotheses) r.hypothesis_ids.push_back(h.id);
  r.falsified_at.assign(hypotheses.size(), std::nullopt);

  RngStream init_rng = rng.derive(1);
  belief::Belief b = belief::init_belief(hypotheses, cfg.belief, init_rng, null);
  const double noise = cfg.belief.fields.noise_std;
  const int cap = policy == PolicyKind::Grid ? std::min(kGridHoles, cfg.max_holes) : cfg.max_holes;

  for (int k = 0;; ++k) {
    RngStream step_rng = rng.derive(100 + static_cast<std::uint64_t>(k));
    RngStream profit_rng = step_rng.derive(1);
    const double ep = belief::expected_profit(b, cfg.econ, cfg.profit_mc, profit_rng).mean;
    r.expected_profit_curve.push_back(ep);
    r.value_error_curve.push_back(std::abs(ep - r.true_profit));

    StepRecord rec;
    rec.step = k;
    rec.weights = b.hypothesis_weights();
    rec.expected_profit = ep;
    rec.value_error = r.value_error_curve.back();

    if (null) {
      const auto status = falsify::falsification_status(b, *null, cfg.margin);
      for (std::size_t h = 0; h < status.falsified.size(); ++h)
        if (status.falsified[h] && !r.falsified_at[h]) r.falsified_at[h] = k;
      if (status.all_falsified && !r.all_falsified_at) r.all_falsified_at = k;
      rec.all_falsified = status.all_falsified;
    }
    if (cfg.stop_on_falsified && rec.all_falsified) {
      rec.action = "stop";
      r.steps.push_back(std::move(rec));
      r.decision = Decision::None;
      break;
    }

    pomdp::Action action;
    if (k >= cap) {
      action = sign_decision(ep);
      r.hit_cap = policy == PolicyKind::Pomdp;
    } else if (policy == PolicyKind::Grid) {
      action = pomdp::Action::drill(grid_cell(k, cfg.belief.fields.shape));
    } else {
      RngStream plan_rng = step_rng.derive(2);
      action = sarsop::plan_step(b, cfg.planner, cfg.econ, plan_rng, cfg.defer_decision).action;
    }
    rec.action = pomdp::to_string(action);
    if (action.terminal()) {
      r.steps.push_back(std::move(rec));
      r.decision = decision_of(action);
      break;
    }

    RngStream noise_rng = step_rng.derive(3);
    const Cell c = action.cell;
    const belief::DrillObservation o{c,
                                     truth.thickness[c] + noise * noise_rng.normal(),
                                     truth.grade[c] + noise * noise_rng.normal(),
                                     truth.graben_mask[c] != 0,
                                     truth.geochem_mask[c] != 0,
                                     k};
    rec.observation = o;
    r.steps.push_back(std::move(rec));
    RngStream update_rng = step_rng.derive(4);
    b = belief::update_belief(b, o, cfg.belief.ess_sweeps, update_rng);
    r.holes_drilled = k + 1;
  }
  r.decision_correct = decision_correct(r.decision, r.true_profit);
  return r;
}

std::uint64_t truth_seed(std::uint64_t root, int trial) {
  return RngStream(root).derive(static_cast<std::uint64_t>(trial) + 1).seed();
}

geo::HypothesisSpec truth_class() { return {4, 2, 2, 1.0}; }

namespace {

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& x) {
  MeanSe out;
  if (x.empty()) return out;
  for (double v : x) out.mean += v;
  out.mean /= static_cast<double>(x.size());
  if (x.size() < 2) return out;
  double s2 = 0.0;
  for (double v : x) s2 += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(s2 / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
  return out;
}

std::vector<PolicyKind> policies_in(std::span<const TrialResult> trials) {
  std::vector<PolicyKind> out;
  for (const auto& t : trials)
    if (std::find(out.begin(), out.end(), t.policy) == out.end()) out.push_back(t.policy);
  return out;
}

}  // namespace

std::vector<PolicySummary> summarize(std::span<const TrialResult> trials) {
  std::vector<PolicySummary> out;
  for (PolicyKind p : policies_in(trials)) {
    std::vector<double> acc, holes;
    std::vector<double> err_sum;
    std::vector<int> err_n;
    for (const auto& t : trials) {
      if (t.policy != p) continue;
      acc.push_back(t.decision_correct ? 1.0 : 0.0);
      holes.push_back(t.holes_drilled);
      if (err_sum.size() < t.value_error_curve.size()) {
        err_sum.resize(t.value_error_curve.size(), 0.0);
        err_n.resize(t.value_error_curve.size(), 0);
      }
      for (std::size_t k = 0; k < t.value_error_curve.size(); ++k) {
        err_sum[k] += t.value_error_curve[k];
        ++err_n[k];
      }
    }
    PolicySummary s;
    s.policy = p;
    s.trials = static_cast<int>(acc.size());
    const auto a = mean_se(acc), h = mean_se(holes);
    s.accuracy = a.mean;
    s.accuracy_std = a.se;
    s.holes = h.mean;
    s.holes_std = h.se;
    for (std::size_t k = 0; k < err_sum.size(); ++k) s.mean_value_error.push_back(err_sum[k] / err_n[k]);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FalsifySummary> summarize_falsification(std::span<const TrialResult> trials, int cap) {
  std::vector<FalsifySummary> out;
  for (PolicyKind p : policies_in(trials)) {
    const int policy_cap = p == PolicyKind::Grid ? std::min(cap, kGridHoles) : cap;
    std::vector<double> holes;
    int failed = 0;
    for (const auto& t : trials) {
      if (t.policy != p) continue;
      if (t.all_falsified_at) {
        holes.push_back(*t.all_falsified_at);
      } else {
        holes.push_back(policy_cap);
        ++failed;
      }
    }
    FalsifySummary s;
    s.policy = p;
    s.trials = static_cast<int>(holes.size());
    const auto m = mean_se(holes);
    s.holes_to_falsify = m.mean;
    s.holes_to_falsify_std = m.se;
    s.failed_fraction = holes.empty() ? 0.0 : static_cast<double>(failed) / static_cast<double>(holes.size());
    out.push_back(s);
  }
  return out;
}

namespace {

std::vector<TrialResult> run_trials(const ExperimentConfig& cfg, std::span<const geo::HypothesisSpec> hypotheses,
                                    const TrialConfig& trial, const std::vector<PolicyKind>& policies,
                                    const std::shared_ptr<const falsify::NullModel>& null) {
  std::vector<TrialResult> out;
  for (int i = 0; i < cfg.n_trials; ++i) {
    const std::uint64_t seed = truth_seed(cfg.seed, i);
    RngStream truth_rng(seed);
    const geo::GeoModel truth =
        geo::sample_truth(truth_class(), trial.belief.geometry_prior, trial.belief.fields, truth_rng);
    for (PolicyKind p : policies) {
      // Both policies share the initial belief and observation noise streams.
      RngStream rng = RngStream(seed).derive(7);
      TrialResult r = run_trial(truth, hypotheses, p, trial, null, rng);
      r.truth_seed = seed;
      if (cfg.on_trial) cfg.on_trial(r);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::shared_ptr<const falsify::NullModel> make_null(const ExperimentConfig& cfg,
                                                    std::span<const geo::HypothesisSpec> hypotheses) {
  RngStream rng = RngStream(cfg.seed).derive(999);
  return std::make_shared<const falsify::NullModel>(falsify::build_null(
      hypotheses, cfg.null_calibration, cfg.trial.belief.geometry_prior, cfg.trial.belief.fields, rng));
}

}  // namespace

ExperimentReport experiment_aleatoric(const ExperimentConfig& cfg) {
  if (cfg.n_trials < 2) throw std::invalid_argument("experiment_aleatoric: n_trials must be >= 2");
  ExperimentReport rep;
  rep.kind = "aleatoric";
  rep.config = cfg;
  const auto hyps = geo::default_hypotheses();
  rep.trials = run_trials(cfg, hyps, cfg.trial, cfg.policies, make_null(cfg, hyps));
  rep.summary = summarize(rep.trials);
  return rep;
}

ExperimentReport experiment_falsification(const ExperimentConfig& cfg) {
  if (cfg.n_trials < 1) throw std::invalid_argument("experiment_falsification: n_trials must be >= 1");
  ExperimentReport rep;
  rep.kind = "falsify";
  rep.config = cfg;
  std::vector<geo::HypothesisSpec> hyps;
  for (auto h : geo::default_hypotheses())
    if (!(h.n_grabens == truth_class().n_grabens && h.n_geochem == truth_class().n_geochem)) hyps.push_back(h);
  for (auto& h : hyps) h.prior_prob = 1.0 / static_cast<double>(hyps.size());
  const auto null = make_null(cfg, hyps);

  TrialConfig checked = cfg.trial;
  checked.stop_on_falsified = true;
  checked.defer_decision = true;
  rep.trials = run_trials(cfg, hyps, checked, cfg.policies, null);
  rep.summary = summarize(rep.trials);
  rep.falsification = summarize_falsification(rep.trials, cfg.trial.max_holes);

  if (std::find(cfg.policies.begin(), cfg.policies.end(), PolicyKind::Pomdp) != cfg.policies.end()) {
    TrialConfig unchecked = cfg.trial;
    unchecked.stop_on_falsified = false;
    unchecked.defer_decision = false;
    rep.unchecked_trials = run_trials(cfg, hyps, unchecked, {PolicyKind::Pomdp}, null);
    int wrong = 0;
    for (const auto& t : rep.unchecked_trials) wrong += t.decision == Decision::Abandon && t.true_profit > 0.0;
    rep.unchecked_wrong_abandon = static_cast<double>(wrong) / static_cast<double>(rep.unchecked_trials.size());
  }
  return rep;
}

namespace {

std::string fmt(double v) { return format_double(v); }
std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void write_trials(std::ofstream& os, std::span<const TrialResult> trials, const char* set) {
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    os << set << "," << i << "," << t.truth_seed << "," << to_string(t.policy) << "," << t.truth_hypothesis << ","
       << t.holes_drilled << "," << to_string(t.decision) << "," << (t.decision_correct ? 1 : 0) << ","
       << fmt(t.true_profit) << "," << fmt(t.expected_profit_curve.empty() ? 0.0 : t.expected_profit_curve.back())
       << "," << opt_int(t.all_falsified_at) << "," << (t.hit_cap ? 1 : 0) << "\n";
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& file, const std::string& header) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot read " + file.string());
  std::string line;
  if (!std::getline(is, line) || line != header) throw std::runtime_error(file.string() + ": unexpected header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line))
    if (!line.empty()) rows.push_back(split_csv(line));
  return rows;
}

const char* kSummaryHeader = "policy,trials,accuracy,accuracy_std,holes,holes_std";
const char* kFalsifyHeader = "policy,trials,holes_to_falsify,holes_to_falsify_std,failed_fraction";

}  // namespace

void emit_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "events", ec);
  if (ec) throw std::runtime_error("cannot create " + (dir / "events").string() + ": " + ec.message());

  {
    auto os = open_out(dir / "summary.csv");
    os << kSummaryHeader << "\n";
    for (const auto& s : rep.summary)
      os << to_string(s.policy) << "," << s.trials << "," << fmt(s.accuracy) << "," << fmt(s.accuracy_std) << ","
         << fmt(s.holes) << "," << fmt(s.holes_std) << "\n";
  }
  {
    auto os = open_out(dir / "falsification.csv");
    os << kFalsifyHeader << "\n";
    for (const auto& s : rep.falsification)
      os << to_string(s.policy) << "," << s.trials << "," << fmt(s.holes_to_falsify) << ","
         << fmt(s.holes_to_falsify_std) << "," << fmt(s.failed_fraction) << "\n";
  }
  {
    auto os = open_out(dir / "trials.csv");
    os << "set,trial,truth_seed,policy,truth_hypothesis,holes_drilled,decision,decision_correct,true_profit,"
          "final_expected_profit,all_falsified_at,hit_cap\n";
    write_trials(os, rep.trials, "main");
    write_trials(os, rep.unchecked_trials, "unchecked");
  }
  {
    auto os = open_out(dir / "curves.csv");
    os << "trial,policy,holes,expected_profit,value_error\n";
    for (std::size_t i = 0; i < rep.trials.size(); ++i) {
      const auto& t = rep.trials[i];
      for (std::size_t k = 0; k < t.value_error_curve.size(); ++k)
        os << i << "," << to_string(t.policy) << "," << k << "," << fmt(t.expected_profit_curve[k]) << ","
           << fmt(t.value_error_curve[k]) << "\n";
    }
  }
  {
    auto os = open_out(dir / "mean_value_error.csv");
    os << "policy,holes,mean_value_error\n";
    for (const auto& s : rep.summary)
      for (std::size_t k = 0; k < s.mean_value_error.size(); ++k)
        os << to_string(s.policy) << "," << k << "," << fmt(s.mean_value_error[k]) << "\n";
  }
  auto write_events = [&](std::span<const TrialResult> trials, const std::string& set) {
    for (std::size_t i = 0; i < trials.size(); ++i) {
      auto os = open_out(dir / "events" / (set + "_" + std::to_string(i) + "_" + to_string(trials[i].policy) + ".jsonl"));
      for (const auto& s : trials[i].steps) os << Json(s).dump() << "\n";
    }
  };
  write_events(rep.trials, "main");
  write_events(rep.unchecked_trials, "unchecked");

  Json seeds = Json::array();
  for (int i = 0; i < rep.config.n_trials; ++i) seeds.push_back(truth_seed(rep.config.seed, i));
  Json manifest{{"kind", rep.kind},
                {"config", rep.config},
                {"truth_class", truth_class()},
                {"truth_seeds", seeds},
                {"unchecked_wrong_abandon", rep.unchecked_wrong_abandon ? Json(*rep.unchecked_wrong_abandon) : Json()},
                {"files",
                 {{"summary.csv", kSummaryHeader},
                  {"falsification.csv", kFalsifyHeader},
                  {"trials.csv", "one row per trial and policy; set=unchecked rows ran without the falsification stop"},
                  {"curves.csv", "expected profit and |expected - true profit| after each hole count"},
                  {"mean_value_error.csv", "per policy mean value error by hole count"},
                  {"events/", "one JSON object per step: action, observation, weights"}}}};
  auto os = open_out(dir / "manifest.json");
  os << manifest.dump(2) << "\n";
}

std::vector<PolicySummary> read_summary_csv(const std::filesystem::path& file) {
  std::vector<PolicySummary> out;
  for (const auto& r : read_rows(file, kSummaryHeader)) {
    if (r.size() != 6) throw std::runtime_error(file.string() + ": malformed row");
    PolicySummary s;
    s.policy = parse_policy(r[0]);
    s.trials = std::stoi(r[1]);
    s.accuracy = std::stod(r[2]);
    s.accuracy_std = std::stod(r[3]);
    s.holes = std::stod(r[4]);
    s.holes_std = std::stod(r[5]);
    out.push_back(s);
  }
  return out;
}

std::vector<FalsifySummary> read_falsification_csv(const std::filesystem::path& file) {
  std::vector<FalsifySummary> out;
  for (const auto& r : read_rows(file, kFalsifyHeader)) {
    if (r.size() != 5) throw std::runtime_error(file.string() + ": malformed row");
    FalsifySummary s;
    s.policy = parse_policy(r[0]);
    s.trials = std::stoi(r[1]);
    s.holes_to_falsify = std::stod(r[2]);
    s.holes_to_falsify_std = std::stod(r[3]);
    s.failed_fraction = std::stod(r[4]);
    out.push_back(s);
  }
  return out;
}

}  // namespace prospector::harness

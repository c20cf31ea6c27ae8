#include "prospector/service.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

namespace prospector::service {

namespace {

std::string join_fields(const std::vector<FieldError>& errors) {
  std::string out = "invalid configuration:";
  for (const auto& e : errors) out += " " + e.field + " (" + e.message + ")";
  return out;
}

const char* mode_name(SessionMode m) { return m == SessionMode::Field ? "field" : "simulated"; }

}  // namespace

ValidationError::ValidationError(std::vector<FieldError> errors)
    : std::runtime_error(join_fields(errors)), errors_(std::move(errors)) {}

ValidationError::ValidationError(std::string field, std::string message)
    : ValidationError(std::vector<FieldError>{{std::move(field), std::move(message)}}) {}

std::vector<FieldError> validate(const SessionConfig& c) {
  std::vector<FieldError> errs;
  auto need = [&](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) errs.push_back({field, msg});
  };

  need(!c.hypotheses.empty(), "hypotheses", "at least one hypothesis is required");
  double total = c.belief.null_prior;
  std::set<int> ids;
  for (std::size_t i = 0; i < c.hypotheses.size(); ++i) {
    const auto& h = c.hypotheses[i];
    const std::string f = "hypotheses[" + std::to_string(i) + "]";
    need(ids.insert(h.id).second, f + ".id", "duplicate hypothesis id");
    need(h.n_grabens >= 1 && h.n_grabens <= 4, f + ".n_grabens", "must be in 1..4");
    need(h.n_geochem >= 1 && h.n_geochem <= 4, f + ".n_geochem", "must be in 1..4");
    need(h.prior_prob >= 0.0 && h.prior_prob <= 1.0, f + ".prior_prob", "must be in [0, 1]");
    total += h.prior_prob;
  }
  if (!c.hypotheses.empty())
    need(std::abs(total - 1.0) <= 1e-9, "hypotheses.prior_prob",
         "priors plus belief.null_prior sum to " + format_double(total) + ", expected 1");

  const auto& f = c.belief.fields;
  need(f.shape.nx >= 4 && f.shape.ny >= 4 && f.shape.size() <= 4096, "belief.fields.shape",
       "grid must be at least 4x4 and at most 4096 cells");
  need(f.kernel.marginal_std > 0.0, "belief.fields.kernel.marginal_std", "must be > 0");
  need(f.kernel.correlation_length > 0.0, "belief.fields.kernel.correlation_length", "must be > 0");
  need(f.noise_std >= 0.0 && std::isfinite(f.noise_std), "belief.fields.noise_std", "must be >= 0");
  need(c.belief.n_particles >= 1, "belief.n_particles", "must be >= 1");
  need(c.belief.ess_sweeps >= 0, "belief.ess_sweeps", "must be >= 0");
  need(c.belief.null_prior >= 0.0 && c.belief.null_prior < 1.0, "belief.null_prior", "must be in [0, 1)");

  need(c.econ.extraction_cost > 0.0, "econ.extraction_cost", "must be > 0");
  need(c.econ.drill_cost > 0.0, "econ.drill_cost", "must be > 0");
  need(c.econ.price_scale >= 0.0, "econ.price_scale", "must be >= 0");
  need(c.econ.cutoff_grade >= 0.0, "econ.cutoff_grade", "must be >= 0");

  const auto& d = c.planner.discretization;
  need(d.n_states >= 2, "planner.discretization.n_states", "must be >= 2");
  need(d.stride >= 1, "planner.discretization.stride", "must be >= 1");
  need(d.offset >= 0, "planner.discretization.offset", "must be >= 0");
  need(d.n_clusters >= 1, "planner.discretization.n_clusters", "must be >= 1");
  need(d.n_obs_draws >= 1, "planner.discretization.n_obs_draws", "must be >= 1");
  need(d.discount > 0.0 && d.discount <= 1.0, "planner.discretization.discount", "must be in (0, 1]");
  const auto& s = c.planner.solver;
  need(s.epsilon > 0.0, "planner.solver.epsilon", "must be > 0");
  need(s.max_iterations >= 1, "planner.solver.max_iterations", "must be >= 1");
  need(s.time_budget_s >= 0.0, "planner.solver.time_budget_s", "must be >= 0");
  need(s.max_depth >= 1, "planner.solver.max_depth", "must be >= 1");
  need(s.prune_every >= 1, "planner.solver.prune_every", "must be >= 1");

  need(c.margin >= 0.0, "margin", "must be >= 0");
  need(c.null_calibration >= 100, "null_calibration", "must be >= 100");
  need(c.profit_mc >= 1, "profit_mc", "must be >= 1");
  need(c.truth_hypothesis.n_grabens >= 1 && c.truth_hypothesis.n_geochem >= 1, "truth_hypothesis",
       "needs at least one graben and one domain");
  return errs;
}

Json to_json(const SessionConfig& c) {
  return Json{{"mode", mode_name(c.mode)},       {"seed", c.seed},
              {"hypotheses", c.hypotheses},      {"belief", c.belief},
              {"planner", c.planner},            {"econ", c.econ},
              {"margin", c.margin},              {"null_calibration", c.null_calibration},
              {"profit_mc", c.profit_mc},        {"truth_hypothesis", c.truth_hypothesis}};
}

SessionConfig config_from_json(const Json& j) {
  SessionConfig c;
  std::vector<FieldError> errs;
  if (!j.is_object()) throw ValidationError("config", "must be a JSON object");
  static const std::set<std::string> known{"mode",   "seed",   "hypotheses",       "belief",    "planner",
                                           "econ",   "margin", "null_calibration", "profit_mc", "truth_hypothesis"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) errs.push_back({key, "unknown field"});
  auto field = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      if constexpr (std::is_same_v<std::decay_t<decltype(out)>, std::uint64_t>) {
        const auto& v = j.at(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
          throw std::invalid_argument("must be a non-negative integer");
      }
      j.at(key).get_to(out);
    } catch (const std::exception& e) {
      errs.push_back({key, e.what()});
    }
  };
  if (j.contains("mode")) {
    const auto& m = j.at("mode");
    if (m == "field")
      c.mode = SessionMode::Field;
    else if (m == "simulated")
      c.mode = SessionMode::Simulated;
    else
      errs.push_back({"mode", "must be 'field' or 'simulated'"});
  }
  field("seed", c.seed);
  field("hypotheses", c.hypotheses);
  field("belief", c.belief);
  field("planner", c.planner);
  field("econ", c.econ);
  field("margin", c.margin);
  field("null_calibration", c.null_calibration);
  field("profit_mc", c.profit_mc);
  field("truth_hypothesis", c.truth_hypothesis);
  if (!errs.empty()) throw ValidationError(std::move(errs));
  auto v = validate(c);
  if (!v.empty()) throw ValidationError(std::move(v));
  return c;
}

namespace {

Json recommendation_json(const Recommendation& r) {
  return Json{{"step", r.step},
              {"action", r.action},
              {"expected_profit", {{"mean", r.expected_profit.mean}, {"std", r.expected_profit.std}}},
              {"diagnostics", r.diagnostics}};
}

Recommendation recommendation_from_json(const Json& j) {
  Recommendation r;
  r.step = j.at("step").get<int>();
  r.action = j.at("action").get<pomdp::Action>();
  r.expected_profit.mean = j.at("expected_profit").at("mean").get<double>();
  r.expected_profit.std = j.at("expected_profit").at("std").get<double>();
  const auto& d = j.at("diagnostics");
  r.diagnostics.lower_bound = d.at("lower_bound").get<double>();
  r.diagnostics.upper_bound = d.at("upper_bound").get<double>();
  r.diagnostics.converged = d.at("converged").get<bool>();
  r.diagnostics.iterations = d.at("iterations").get<int>();
  r.diagnostics.n_alphas = d.at("n_alphas").get<std::size_t>();
  r.diagnostics.n_states = d.at("n_states").get<int>();
  r.diagnostics.n_actions = d.at("n_actions").get<int>();
  r.diagnostics.n_observations = d.at("n_observations").get<int>();
  return r;
}

// Keys of the per-session random streams.
constexpr std::uint64_t kBeliefKey = 1, kNullKey = 2, kTruthKey = 3;
constexpr std::uint64_t kUpdateKey = 100, kNoiseKey = 200, kPlanKey = 10000, kProfitKey = 20000, kFinalKey = 30000;

}  // namespace

Session::Session(std::string id, SessionConfig config) : Session(std::move(id), std::move(config), true) {}

Session::Session(std::string id, SessionConfig config, bool record_creation)
    : id_(std::move(id)), config_(std::move(config)), belief_([&] {
        const RngStream root(config_.seed);
        RngStream null_rng = root.derive(kNullKey);
        null_ = std::make_shared<const falsify::NullModel>(
            falsify::build_null(config_.hypotheses, config_.null_calibration, config_.belief.geometry_prior,
                                config_.belief.fields, null_rng));
        RngStream belief_rng = root.derive(kBeliefKey);
        return belief::init_belief(config_.hypotheses, config_.belief, belief_rng, null_);
      }()) {
  if (config_.mode == SessionMode::Simulated) {
    RngStream truth_rng = RngStream(config_.seed).derive(kTruthKey);
    truth_ = geo::sample_truth(config_.truth_hypothesis, config_.belief.geometry_prior, config_.belief.fields,
                               truth_rng);
  }
  if (record_creation) append(Json{{"type", "created"}, {"version", 1}, {"config", to_json(config_)}});
}

void Session::append(Json event) { events_.push_back(std::move(event)); }

void Session::apply_observation(const belief::DrillObservation& o) {
  const auto k = static_cast<std::uint64_t>(belief_.observations().size());
  RngStream rng = RngStream(config_.seed).derive(kUpdateKey + k);
  belief_ = belief::update_belief(belief_, o, config_.belief.ess_sweeps, rng);
  recommendation_.reset();
}

Json Session::add_observation(const Json& request) {
  if (terminal()) throw Conflict("session terminal");
  std::vector<FieldError> errs;
  if (!request.is_object()) throw ValidationError("observation", "must be a JSON object");
  Cell c{};
  try {
    request.at("location").get_to(c);
  } catch (const std::exception&) {
    throw ValidationError("location", "required object {x, y} of integers");
  }
  if (!config_.belief.fields.shape.contains(c)) throw ValidationError("location", "outside the grid");
  if (belief_.drilled(c))
    throw Conflict("cell (" + std::to_string(c.x) + "," + std::to_string(c.y) + ") already drilled");

  const int k = static_cast<int>(belief_.observations().size());
  belief::DrillObservation o{c, 0.0, 0.0, false, false, k};
  if (config_.mode == SessionMode::Simulated) {
    RngStream noise = RngStream(config_.seed).derive(kNoiseKey + static_cast<std::uint64_t>(k));
    const double sd = config_.belief.fields.noise_std;
    o.thickness = truth_->thickness[c] + sd * noise.normal();
    o.grade = truth_->grade[c] + sd * noise.normal();
    o.graben = truth_->graben_mask[c] != 0;
    o.geochem = truth_->geochem_mask[c] != 0;
  } else {
    auto number = [&](const char* key, double& out) {
      if (!request.contains(key) || !request.at(key).is_number() || !std::isfinite(request.at(key).get<double>()))
        errs.push_back({key, "required finite number"});
      else
        out = request.at(key).get<double>();
    };
    auto flag = [&](const char* key, bool& out) {
      if (!request.contains(key) || !request.at(key).is_boolean())
        errs.push_back({key, "required boolean"});
      else
        out = request.at(key).get<bool>();
    };
    number("thickness", o.thickness);
    number("grade", o.grade);
    flag("graben", o.graben);
    flag("geochem", o.geochem);
    if (!errs.empty()) throw ValidationError(std::move(errs));
  }
  apply_observation(o);
  append(Json{{"type", "observation_added"}, {"observation", o}});
  return Json{{"observation", o}, {"belief", belief_summary()}, {"falsification", falsification()}};
}

Json Session::recommendation() {
  if (terminal()) throw Conflict("session terminal");
  const int k = static_cast<int>(belief_.observations().size());
  if (!recommendation_ || recommendation_->step != k) {
    Recommendation r;
    r.step = k;
    RngStream plan_rng = RngStream(config_.seed).derive(kPlanKey + static_cast<std::uint64_t>(k));
    const auto plan = sarsop::plan_step(belief_, config_.planner, config_.econ, plan_rng);
    r.action = plan.action;
    r.diagnostics = plan.diagnostics;
    r.diagnostics.seconds = 0.0;  // keeps the record reproducible
    RngStream profit_rng = RngStream(config_.seed).derive(kProfitKey + static_cast<std::uint64_t>(k));
    r.expected_profit = belief::expected_profit(belief_, config_.econ, config_.profit_mc, profit_rng);
    recommendation_ = r;
    append(Json{{"type", "recommendation_issued"}, {"recommendation", recommendation_json(r)}});
  }
  return recommendation_json(*recommendation_);
}

Json Session::record_decision(const std::string& decision) {
  if (terminal()) throw Conflict("session terminal");
  if (decision != "develop" && decision != "abandon")
    throw ValidationError("decision", "must be 'develop' or 'abandon'");
  RngStream rng = RngStream(config_.seed).derive(kFinalKey);
  final_profit_ = belief::expected_profit(belief_, config_.econ, config_.profit_mc, rng);
  decision_ = decision;
  append(Json{{"type", "decision_made"},
              {"decision", decision},
              {"expected_profit", {{"mean", final_profit_->mean}, {"std", final_profit_->std}}}});
  return summary();
}

std::unique_ptr<Session> Session::replay(std::string id, const std::vector<Json>& events) {
  if (events.empty() || events.front().value("type", "") != "created")
    throw std::runtime_error("event log must start with a 'created' event");
  std::unique_ptr<Session> s(new Session(std::move(id), config_from_json(events.front().at("config")), false));
  s->events_.push_back(events.front());
  for (std::size_t i = 1; i < events.size(); ++i) {
    const Json& e = events[i];
    const std::string type = e.at("type").get<std::string>();
    if (s->terminal()) throw std::runtime_error("event after the terminal decision");
    if (type == "observation_added") {
      s->apply_observation(e.at("observation").get<belief::DrillObservation>());
    } else if (type == "recommendation_issued") {
      s->recommendation_ = recommendation_from_json(e.at("recommendation"));
    } else if (type == "decision_made") {
      RngStream rng = RngStream(s->config_.seed).derive(kFinalKey);
      s->final_profit_ = belief::expected_profit(s->belief_, s->config_.econ, s->config_.profit_mc, rng);
      s->decision_ = e.at("decision").get<std::string>();
    } else {
      throw std::runtime_error("unknown event type '" + type + "'");
    }
    s->events_.push_back(e);
  }
  s->persisted_ = s->events_.size();
  return s;
}

Json Session::summary() const {
  Json hyps = Json::array();
  const auto& w = belief_.hypothesis_weights();
  for (std::size_t i = 0; i < config_.hypotheses.size(); ++i) {
    const auto& h = config_.hypotheses[i];
    hyps.push_back(Json{{"id", h.id},
                        {"n_grabens", h.n_grabens},
                        {"n_geochem", h.n_geochem},
                        {"prior_prob", h.prior_prob},
                        {"weight", w[i]}});
  }
  Json out{{"id", id_},
           {"mode", mode_name(config_.mode)},
           {"status", terminal() ? "terminal" : "open"},
           {"decision", decision_ ? Json(*decision_) : Json()},
           {"n_observations", belief_.observations().size()},
           {"observations", belief_.observations()},
           {"hypotheses", hyps},
           {"null_weight", w.size() > config_.hypotheses.size() ? w.back() : 0.0},
           {"falsification", falsification()},
           {"recommendation", recommendation_ ? recommendation_json(*recommendation_) : Json()}};
  if (final_profit_) out["expected_profit"] = Json{{"mean", final_profit_->mean}, {"std", final_profit_->std}};
  return out;
}

Json Session::belief_summary() const {
  const auto grids = belief::predictive_grids(belief_);
  Json ids = Json::array();
  for (const auto& h : config_.hypotheses) ids.push_back(h.id);
  const auto& w = belief_.hypothesis_weights();
  const std::size_t n = config_.hypotheses.size();
  Json trace = Json::array();
  for (const auto& step : belief_.loglik_trace())
    trace.push_back(Json{{"hypotheses", std::vector<double>(step.begin(), step.begin() + n)},
                         {"null", step.size() > n ? Json(step.back()) : Json()}});
  return Json{{"step", belief_.observations().size()},
              {"hypothesis_ids", ids},
              {"hypothesis_weights", std::vector<double>(w.begin(), w.begin() + n)},
              {"null_weight", w.size() > n ? w.back() : 0.0},
              {"loglik_trace", trace},
              {"grids",
               {{"nx", grids.thickness_mean.shape().nx},
                {"ny", grids.thickness_mean.shape().ny},
                {"layout", "row-major, index = y * nx + x"},
                {"thickness_mean", grids.thickness_mean.values()},
                {"thickness_std", grids.thickness_std.values()},
                {"grade_mean", grids.grade_mean.values()},
                {"grade_std", grids.grade_std.values()}}}};
}

Json Session::falsification() const {
  Json j = falsify::falsification_status(belief_, *null_, config_.margin);
  j["margin"] = config_.margin;
  return j;
}

bool valid_session_id(const std::string& id) {
  static const std::regex re("[A-Za-z0-9_-]{1,64}");
  return std::regex_match(id, re);
}

std::vector<Json> read_event_log(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot read " + file.string());
  std::vector<Json> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(Json::parse(line));
  return out;
}

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw std::runtime_error("cannot create data directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path SessionStore::log_path(const std::string& id) const { return dir_ / (id + ".events.jsonl"); }

std::shared_ptr<Session> SessionStore::create(const Json& config, std::optional<std::string> id) {
  SessionConfig cfg = config_from_json(config);
  std::string sid;
  if (id) {
    if (!valid_session_id(*id)) throw ValidationError("id", "must match [A-Za-z0-9_-]{1,64}");
    sid = *id;
  } else {
    std::random_device rd;
    std::ostringstream os;
    os << std::hex << (static_cast<std::uint64_t>(rd()) << 32 | rd());
    sid = os.str();
  }
  std::lock_guard lock(mutex_);
  if (sessions_.contains(sid) || std::filesystem::exists(log_path(sid)))
    throw Conflict("session '" + sid + "' already exists");
  auto s = std::make_shared<Session>(sid, std::move(cfg));
  persist(*s);
  sessions_[sid] = s;
  return s;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) {
  if (!valid_session_id(id)) throw NotFound("unknown session '" + id + "'");
  std::lock_guard lock(mutex_);
  if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  const auto path = log_path(id);
  if (!std::filesystem::exists(path)) throw NotFound("unknown session '" + id + "'");
  std::shared_ptr<Session> s = Session::replay(id, read_event_log(path));
  sessions_[id] = s;
  return s;
}

void SessionStore::persist(Session& s) {
  if (s.persisted_ == s.events_.size()) return;
  std::ofstream os(log_path(s.id()), std::ios::app | std::ios::binary);
  if (!os) throw std::runtime_error("cannot append to " + log_path(s.id()).string());
  for (std::size_t i = s.persisted_; i < s.events_.size(); ++i) os << s.events_[i].dump() << "\n";
  os.flush();
  if (!os) throw std::runtime_error("write failed for " + log_path(s.id()).string());
  s.persisted_ = s.events_.size();
}

}  // namespace prospector::service

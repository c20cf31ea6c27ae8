#include "prospector/serialize.hpp"

#include <charconv>

namespace prospector {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

template <class T>
void get_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(Json& j, const Cell& c) { j = Json{{"x", c.x}, {"y", c.y}}; }
void from_json(const Json& j, Cell& c) {
  j.at("x").get_to(c.x);
  j.at("y").get_to(c.y);
}
void to_json(Json& j, const GridShape& g) { j = Json{{"nx", g.nx}, {"ny", g.ny}}; }
void from_json(const Json& j, GridShape& g) {
  get_opt(j, "nx", g.nx);
  get_opt(j, "ny", g.ny);
}

namespace gp {

void to_json(Json& j, const KernelParams& k) {
  const char* order = k.order == MaternOrder::Half ? "1/2" : k.order == MaternOrder::ThreeHalves ? "3/2" : "5/2";
  j = Json{{"marginal_std", k.marginal_std}, {"correlation_length", k.correlation_length}, {"order", order}};
}

void from_json(const Json& j, KernelParams& k) {
  get_opt(j, "marginal_std", k.marginal_std);
  get_opt(j, "correlation_length", k.correlation_length);
  if (j.contains("order")) {
    const auto o = j.at("order").get<std::string>();
    if (o == "1/2")
      k.order = MaternOrder::Half;
    else if (o == "3/2")
      k.order = MaternOrder::ThreeHalves;
    else if (o == "5/2")
      k.order = MaternOrder::FiveHalves;
    else
      throw std::invalid_argument("kernel.order must be one of 1/2, 3/2, 5/2");
  }
}

}  // namespace gp

namespace geo {

void to_json(Json& j, const HypothesisSpec& h) {
  j = Json{{"id", h.id}, {"n_grabens", h.n_grabens}, {"n_geochem", h.n_geochem}, {"prior_prob", h.prior_prob}};
}
void from_json(const Json& j, HypothesisSpec& h) {
  get_opt(j, "id", h.id);
  get_opt(j, "n_grabens", h.n_grabens);
  get_opt(j, "n_geochem", h.n_geochem);
  get_opt(j, "prior_prob", h.prior_prob);
}

void to_json(Json& j, const GeometryPrior& p) {
  j = Json{{"start_mean", p.start_mean},   {"start_std", p.start_std},   {"width_mean", p.width_mean},
           {"width_std", p.width_std},     {"center_mean", p.center_mean}, {"center_std", p.center_std},
           {"radius_mean", p.radius_mean}, {"radius_std", p.radius_std}};
}
void from_json(const Json& j, GeometryPrior& p) {
  get_opt(j, "start_mean", p.start_mean);
  get_opt(j, "start_std", p.start_std);
  get_opt(j, "width_mean", p.width_mean);
  get_opt(j, "width_std", p.width_std);
  get_opt(j, "center_mean", p.center_mean);
  get_opt(j, "center_std", p.center_std);
  get_opt(j, "radius_mean", p.radius_mean);
  get_opt(j, "radius_std", p.radius_std);
}

void to_json(Json& j, const FieldParams& f) {
  j = Json{{"shape", f.shape},
           {"kernel", f.kernel},
           {"thickness_outside", f.thickness_outside},
           {"thickness_inside", f.thickness_inside},
           {"grade_outside", f.grade_outside},
           {"grade_inside", f.grade_inside},
           {"noise_std", f.noise_std}};
}
void from_json(const Json& j, FieldParams& f) {
  get_opt(j, "shape", f.shape);
  get_opt(j, "kernel", f.kernel);
  get_opt(j, "thickness_outside", f.thickness_outside);
  get_opt(j, "thickness_inside", f.thickness_inside);
  get_opt(j, "grade_outside", f.grade_outside);
  get_opt(j, "grade_inside", f.grade_inside);
  get_opt(j, "noise_std", f.noise_std);
}

void to_json(Json& j, const EconParams& e) {
  j = Json{{"cutoff_grade", e.cutoff_grade},
           {"extraction_cost", e.extraction_cost},
           {"drill_cost", e.drill_cost},
           {"price_scale", e.price_scale}};
}
void from_json(const Json& j, EconParams& e) {
  get_opt(j, "cutoff_grade", e.cutoff_grade);
  get_opt(j, "extraction_cost", e.extraction_cost);
  get_opt(j, "drill_cost", e.drill_cost);
  get_opt(j, "price_scale", e.price_scale);
}

}  // namespace geo

namespace belief {

void to_json(Json& j, const DrillObservation& o) {
  j = Json{{"location", o.location}, {"thickness", o.thickness}, {"grade", o.grade},
           {"graben", o.graben},     {"geochem", o.geochem},     {"step_index", o.step_index}};
}
void from_json(const Json& j, DrillObservation& o) {
  j.at("location").get_to(o.location);
  j.at("thickness").get_to(o.thickness);
  j.at("grade").get_to(o.grade);
  j.at("graben").get_to(o.graben);
  j.at("geochem").get_to(o.geochem);
  get_opt(j, "step_index", o.step_index);
}

void to_json(Json& j, const BeliefConfig& c) {
  j = Json{{"fields", c.fields},
           {"geometry_prior", c.geometry_prior},
           {"n_particles", c.n_particles},
           {"ess_sweeps", c.ess_sweeps},
           {"null_prior", c.null_prior}};
}
void from_json(const Json& j, BeliefConfig& c) {
  get_opt(j, "fields", c.fields);
  get_opt(j, "geometry_prior", c.geometry_prior);
  get_opt(j, "n_particles", c.n_particles);
  get_opt(j, "ess_sweeps", c.ess_sweeps);
  get_opt(j, "null_prior", c.null_prior);
}

}  // namespace belief

namespace falsify {

void to_json(Json& j, const NullModel& n) {
  auto mix = [](const std::vector<MixtureComponent>& m) {
    Json a = Json::array();
    for (const auto& c : m) a.push_back(Json{{"weight", c.weight}, {"mean", c.mean}, {"std", c.std}});
    return a;
  };
  j = Json{{"thickness_mixture", mix(n.thickness_mixture)}, {"grade_mixture", mix(n.grade_mixture)}};
}

void to_json(Json& j, const FalsificationStatus& s) {
  Json hyps = Json::array();
  for (std::size_t i = 0; i < s.hypothesis_ids.size(); ++i)
    hyps.push_back(Json{{"id", s.hypothesis_ids[i]},
                        {"loglik", s.hypothesis_loglik[i]},
                        {"falsified", static_cast<bool>(s.falsified[i])}});
  j = Json{{"null_loglik", s.null_loglik}, {"hypotheses", hyps}, {"all_falsified", s.all_falsified}};
}

}  // namespace falsify

namespace pomdp {

void to_json(Json& j, const Action& a) {
  switch (a.kind) {
    case ActionKind::Drill:
      j = Json{{"kind", "drill"}, {"cell", a.cell}};
      return;
    case ActionKind::Abandon:
      j = Json{{"kind", "abandon"}};
      return;
    case ActionKind::Develop:
      j = Json{{"kind", "develop"}};
      return;
  }
}

void from_json(const Json& j, Action& a) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "drill")
    a = Action::drill(j.at("cell").get<Cell>());
  else if (kind == "abandon")
    a = Action::abandon();
  else if (kind == "develop")
    a = Action::develop();
  else
    throw std::invalid_argument("unknown action kind '" + kind + "'");
}

void to_json(Json& j, const DiscretizationConfig& c) {
  j = Json{{"n_states", c.n_states},       {"stride", c.stride},           {"offset", c.offset},
           {"n_clusters", c.n_clusters},   {"n_obs_draws", c.n_obs_draws}, {"discount", c.discount}};
}
void from_json(const Json& j, DiscretizationConfig& c) {
  get_opt(j, "n_states", c.n_states);
  get_opt(j, "stride", c.stride);
  get_opt(j, "offset", c.offset);
  get_opt(j, "n_clusters", c.n_clusters);
  get_opt(j, "n_obs_draws", c.n_obs_draws);
  get_opt(j, "discount", c.discount);
}

}  // namespace pomdp

namespace sarsop {

void to_json(Json& j, const SolverOptions& o) {
  j = Json{{"epsilon", o.epsilon},
           {"max_iterations", o.max_iterations},
           {"time_budget_s", o.time_budget_s},
           {"max_depth", o.max_depth},
           {"prune_every", o.prune_every}};
}
void from_json(const Json& j, SolverOptions& o) {
  get_opt(j, "epsilon", o.epsilon);
  get_opt(j, "max_iterations", o.max_iterations);
  get_opt(j, "time_budget_s", o.time_budget_s);
  get_opt(j, "max_depth", o.max_depth);
  get_opt(j, "prune_every", o.prune_every);
}

void to_json(Json& j, const PlannerConfig& c) {
  j = Json{{"discretization", c.discretization}, {"solver", c.solver}};
}
void from_json(const Json& j, PlannerConfig& c) {
  get_opt(j, "discretization", c.discretization);
  get_opt(j, "solver", c.solver);
}

void to_json(Json& j, const PlanDiagnostics& d) {
  j = Json{{"lower_bound", d.lower_bound},   {"upper_bound", d.upper_bound}, {"converged", d.converged},
           {"iterations", d.iterations},     {"n_alphas", d.n_alphas},       {"n_states", d.n_states},
           {"n_actions", d.n_actions},       {"n_observations", d.n_observations}};
}

}  // namespace sarsop

namespace harness {

void to_json(Json& j, const TrialConfig& c) {
  j = Json{{"belief", c.belief},       {"planner", c.planner}, {"econ", c.econ},
           {"max_holes", c.max_holes}, {"profit_mc", c.profit_mc}, {"margin", c.margin},
           {"stop_on_falsified", c.stop_on_falsified},
           {"defer_decision", c.defer_decision}};
}
void from_json(const Json& j, TrialConfig& c) {
  get_opt(j, "belief", c.belief);
  get_opt(j, "planner", c.planner);
  get_opt(j, "econ", c.econ);
  get_opt(j, "max_holes", c.max_holes);
  get_opt(j, "profit_mc", c.profit_mc);
  get_opt(j, "margin", c.margin);
  get_opt(j, "stop_on_falsified", c.stop_on_falsified);
  get_opt(j, "defer_decision", c.defer_decision);
}

void to_json(Json& j, const ExperimentConfig& c) {
  Json pol = Json::array();
  for (auto p : c.policies) pol.push_back(to_string(p));
  j = Json{{"trial", c.trial},
           {"seed", c.seed},
           {"n_trials", c.n_trials},
           {"null_calibration", c.null_calibration},
           {"policies", pol}};
}

void to_json(Json& j, const StepRecord& s) {
  j = Json{{"step", s.step},
           {"action", s.action},
           {"observation", s.observation ? Json(*s.observation) : Json()},
           {"weights", s.weights},
           {"expected_profit", s.expected_profit},
           {"value_error", s.value_error},
           {"all_falsified", s.all_falsified}};
}

}  // namespace harness

}  // namespace prospector

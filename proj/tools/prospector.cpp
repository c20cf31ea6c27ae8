// prospector: drill-campaign planning from the command line.
//
//   prospector simulate [--seed S] [--policy pomdp|grid]
//   prospector experiment aleatoric|falsify --trials N [--out DIR]
//   prospector serve --port P --data-dir D
//   prospector session new|observe|recommend|decide|show|belief ...
//
// PROSPECTOR_DATA_DIR and PROSPECTOR_SEED replace the built-in defaults;
// explicit flags win. Exit codes: 0 ok, 1 invalid input, 2 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "prospector/harness.hpp"
#include "prospector/http.hpp"
#include "prospector/serialize.hpp"
#include "prospector/service.hpp"

using namespace prospector;

namespace {

constexpr int kOk = 0, kInvalid = 1, kRuntime = 2;

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::uint64_t default_seed() {
  const std::string s = env_or("PROSPECTOR_SEED", "1");
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw service::ValidationError("PROSPECTOR_SEED", "must be a non-negative integer, got '" + s + "'");
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw service::ValidationError("config", "cannot read " + path);
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw service::ValidationError("config", path + ": " + e.what());
  }
}

harness::TrialConfig trial_config(const std::string& path) {
  harness::TrialConfig c;
  if (path.empty()) return c;
  try {
    read_json_file(path).get_to(c);
  } catch (const Json::exception& e) {
    throw service::ValidationError("config", e.what());
  }
  return c;
}

void print_summary(const harness::ExperimentReport& rep) {
  std::cout << "policy  trials  accuracy        holes\n";
  for (const auto& s : rep.summary)
    std::cout << harness::to_string(s.policy) << "  " << s.trials << "  " << format_double(s.accuracy) << " +- "
              << format_double(s.accuracy_std) << "  " << format_double(s.holes) << " +- "
              << format_double(s.holes_std) << "\n";
  for (const auto& f : rep.falsification)
    std::cout << harness::to_string(f.policy) << " holes to falsify " << format_double(f.holes_to_falsify) << " +- "
              << format_double(f.holes_to_falsify_std) << ", failed " << format_double(f.failed_fraction) << "\n";
  if (rep.unchecked_wrong_abandon)
    std::cout << "unchecked pomdp wrong-abandon fraction " << format_double(*rep.unchecked_wrong_abandon) << "\n";
}

Json trial_json(const harness::TrialResult& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back(s);
  return Json{{"truth_seed", t.truth_seed},
              {"policy", harness::to_string(t.policy)},
              {"truth_hypothesis", t.truth_hypothesis},
              {"holes_drilled", t.holes_drilled},
              {"decision", harness::to_string(t.decision)},
              {"decision_correct", t.decision_correct},
              {"hit_cap", t.hit_cap},
              {"true_profit", t.true_profit},
              {"steps", steps}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential drill planning with falsifiable geological hypotheses"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  auto add_seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed",
        [&](std::uint64_t v) {
          seed = v;
          seed_given = true;
        },
        "Root seed (default: $PROSPECTOR_SEED or 1)");
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one seeded trial and print its record as JSON");
  std::string policy = "pomdp";
  int truth_index = 0;
  add_seed(sim);
  sim->add_option("--policy", policy, "pomdp or grid")->check(CLI::IsMember({"pomdp", "grid"}));
  sim->add_option("--trial-index", truth_index, "Truth index under the root seed")->check(CLI::NonNegativeNumber);
  sim->add_option("--config", config_path, "Trial configuration JSON");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run a batch experiment and write its report");
  exp->require_subcommand(1);
  int trials = 17;
  std::string out_dir;
  int null_calibration = 200;
  double margin = 0.0;
  auto add_exp = [&](CLI::App* c) {
    add_seed(c);
    c->add_option("--trials", trials, "Number of seeded trials")->check(CLI::PositiveNumber);
    c->add_option("--out", out_dir, "Report directory (default: results/<kind>)");
    c->add_option("--config", config_path, "Trial configuration JSON");
    c->add_option("--null-calibration", null_calibration, "Prior truths used to fit the null model");
    c->add_option("--margin", margin, "Falsification margin in nats")->check(CLI::NonNegativeNumber);
  };
  auto* aleatoric = exp->add_subcommand("aleatoric", "Truths from a class the belief contains");
  auto* falsify_cmd = exp->add_subcommand("falsify", "Truths from a class the belief excludes");
  add_exp(aleatoric);
  add_exp(falsify_cmd);

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir;
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--data-dir", data_dir, "Session directory (default: $PROSPECTOR_DATA_DIR)");

  // session
  auto* session = app.add_subcommand("session", "File-backed sessions without a server");
  session->require_subcommand(1);
  session->add_option("--data-dir", data_dir, "Session directory (default: $PROSPECTOR_DATA_DIR)");
  std::string id, mode, decision;
  auto* s_new = session->add_subcommand("new", "Create a session and print its summary");
  s_new->add_option("--config", config_path, "Session configuration JSON");
  s_new->add_option("--id", id, "Session id (default: random)");
  s_new->add_option("--mode", mode, "field or simulated")->check(CLI::IsMember({"field", "simulated"}));
  add_seed(s_new);
  auto* s_obs = session->add_subcommand("observe", "Add one drill result");
  int x = -1, y = -1;
  double thickness = 0.0, grade = 0.0;
  std::string graben, geochem;
  bool full = false;
  s_obs->add_option("id", id, "Session id")->required();
  s_obs->add_option("--x", x, "Column")->required();
  s_obs->add_option("--y", y, "Row")->required();
  auto* th_opt = s_obs->add_option("--thickness", thickness, "Measured thickness (field mode)");
  auto* g_opt = s_obs->add_option("--grade", grade, "Measured grade fraction (field mode)");
  s_obs->add_option("--graben", graben, "Inside a graben: true/false (field mode)")
      ->check(CLI::IsMember({"true", "false"}));
  s_obs->add_option("--geochem", geochem, "Inside a geochemical domain: true/false (field mode)")
      ->check(CLI::IsMember({"true", "false"}));
  s_obs->add_flag("--full", full, "Print predictive grids too");
  auto* s_rec = session->add_subcommand("recommend", "Print the recommended next action");
  s_rec->add_option("id", id, "Session id")->required();
  auto* s_dec = session->add_subcommand("decide", "Record the terminal decision");
  s_dec->add_option("id", id, "Session id")->required();
  s_dec->add_option("decision", decision, "develop or abandon")->required();
  auto* s_show = session->add_subcommand("show", "Print the session summary");
  s_show->add_option("id", id, "Session id")->required();
  auto* s_belief = session->add_subcommand("belief", "Print predictive grids, weights and the loglik trace");
  s_belief->add_option("id", id, "Session id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    const std::uint64_t root = seed_given ? seed : default_seed();
    if (data_dir.empty()) data_dir = env_or("PROSPECTOR_DATA_DIR", "prospector-data");

    if (sim->parsed()) {
      const auto cfg = trial_config(config_path);
      const auto hyps = geo::default_hypotheses();
      RngStream null_rng = RngStream(root).derive(999);
      const auto null = std::make_shared<const falsify::NullModel>(
          falsify::build_null(hyps, null_calibration, cfg.belief.geometry_prior, cfg.belief.fields, null_rng));
      const auto tseed = harness::truth_seed(root, truth_index);
      RngStream truth_rng(tseed);
      const auto truth =
          geo::sample_truth(harness::truth_class(), cfg.belief.geometry_prior, cfg.belief.fields, truth_rng);
      RngStream rng = RngStream(tseed).derive(7);
      auto r = harness::run_trial(truth, hyps, harness::parse_policy(policy), cfg, null, rng);
      r.truth_seed = tseed;
      std::cout << trial_json(r).dump(2) << "\n";
      return kOk;
    }

    if (exp->parsed()) {
      harness::ExperimentConfig cfg;
      cfg.trial = trial_config(config_path);
      cfg.trial.margin = margin;
      cfg.seed = root;
      cfg.n_trials = trials;
      cfg.null_calibration = null_calibration;
      int done = 0;
      cfg.on_trial = [&](const harness::TrialResult& t) {
        std::cerr << "trial " << ++done << ": " << harness::to_string(t.policy) << " holes " << t.holes_drilled
                  << " decision " << harness::to_string(t.decision) << (t.decision_correct ? " (correct)" : "")
                  << std::endl;
      };
      const bool is_falsify = falsify_cmd->parsed();
      const auto rep = is_falsify ? harness::experiment_falsification(cfg) : harness::experiment_aleatoric(cfg);
      const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path("results") / rep.kind : std::filesystem::path(out_dir);
      harness::emit_report(rep, dir);
      print_summary(rep);
      std::cout << "report written to " << dir.string() << "\n";
      return kOk;
    }

    if (serve->parsed()) {
      service::SessionStore store(data_dir);
      std::cerr << "serving on http://" << host << ":" << port << " with sessions in " << data_dir << std::endl;
      if (!service::serve(store, host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return kRuntime;
      }
      return kOk;
    }

    service::SessionStore store(data_dir);
    Json out;
    if (s_new->parsed()) {
      Json cfg = config_path.empty() ? Json::object() : read_json_file(config_path);
      if (!mode.empty()) cfg["mode"] = mode;
      if (seed_given || std::getenv("PROSPECTOR_SEED")) cfg["seed"] = root;
      out = store.create(cfg, id.empty() ? std::nullopt : std::optional<std::string>(id))->summary();
    } else if (s_obs->parsed()) {
      Json req{{"location", {{"x", x}, {"y", y}}}};
      if (*th_opt) req["thickness"] = thickness;
      if (*g_opt) req["grade"] = grade;
      if (!graben.empty()) req["graben"] = graben == "true";
      if (!geochem.empty()) req["geochem"] = geochem == "true";
      out = store.mutate(id, [&](service::Session& s) { return s.add_observation(req); });
      if (!full) out["belief"].erase("grids");
    } else if (s_rec->parsed()) {
      out = store.mutate(id, [](service::Session& s) { return s.recommendation(); });
    } else if (s_dec->parsed()) {
      out = store.mutate(id, [&](service::Session& s) { return s.record_decision(decision); });
    } else if (s_show->parsed()) {
      out = store.read(id, [](service::Session& s) { return s.summary(); });
    } else if (s_belief->parsed()) {
      out = store.read(id, [](service::Session& s) { return s.belief_summary(); });
    }
    std::cout << out.dump(2) << "\n";
    return kOk;
  } catch (const service::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const service::NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const service::Conflict& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

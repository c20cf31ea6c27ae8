#include <doctest.h>

#include <fstream>

#include "prospector/http.hpp"
#include "prospector/service.hpp"

using namespace prospector;
using namespace prospector::service;

namespace {

// Small grid and solver so sessions build in well under a second.
Json cheap_config(const std::string& mode = "field") {
  Json j = Json::parse(R"({
    "belief": {"fields": {"shape": {"nx": 16, "ny": 16}}, "n_particles": 8, "ess_sweeps": 1},
    "planner": {"discretization": {"n_states": 10, "n_obs_draws": 20, "n_clusters": 3, "stride": 8, "offset": 4},
                "solver": {"max_iterations": 5}},
    "null_calibration": 100,
    "profit_mc": 8,
    "seed": 9
  })");
  j["mode"] = mode;
  return j;
}

Json field_obs(int x, int y, double th = 7.4, double g = 0.08, bool grab = true, bool chem = true) {
  return Json{{"location", {{"x", x}, {"y", y}}}, {"thickness", th}, {"grade", g}, {"graben", grab}, {"geochem", chem}};
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("prospector_" + name);
  std::filesystem::remove_all(d);
  return d;
}

bool has_field(const ValidationError& e, const std::string& f) {
  for (const auto& x : e.errors())
    if (x.field == f) return true;
  return false;
}

}  // namespace

TEST_CASE("default config validates and seeds equal weights") {
  SessionConfig c;
  CHECK(validate(c).empty());
  Session s("d", config_from_json(cheap_config()));
  const auto b = s.belief_summary();
  REQUIRE(b["hypothesis_weights"].size() == 4);
  for (const auto& w : b["hypothesis_weights"]) CHECK(w.get<double>() == doctest::Approx(0.25));
  CHECK(b["null_weight"] == 0.0);
  CHECK(s.falsification()["hypotheses"].size() == 4);
  CHECK(s.events().size() == 1);
  CHECK(s.events()[0]["type"] == "created");
}

TEST_CASE("config validation names the offending fields") {
  auto bad = cheap_config();
  bad["hypotheses"] = Json::parse(R"([{"id":1,"n_grabens":1,"n_geochem":1,"prior_prob":0.5},
                                      {"id":2,"n_grabens":1,"n_geochem":2,"prior_prob":0.4}])");
  try {
    config_from_json(bad);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "hypotheses.prior_prob"));
    CHECK(std::string(e.what()).find("0.9") != std::string::npos);
  }

  auto many = cheap_config();
  many["econ"] = Json{{"drill_cost", -1.0}, {"extraction_cost", 0.0}};
  many["belief"]["n_particles"] = 0;
  many["colour"] = "blue";
  try {
    config_from_json(many);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "colour"));
  }
  many.erase("colour");
  try {
    config_from_json(many);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "econ.drill_cost"));
    CHECK(has_field(e, "econ.extraction_cost"));
    CHECK(has_field(e, "belief.n_particles"));
  }

  auto wrong_type = cheap_config();
  wrong_type["margin"] = "wide";
  CHECK_THROWS_AS(config_from_json(wrong_type), ValidationError);
  auto wrong_mode = cheap_config("dream");
  CHECK_THROWS_AS(config_from_json(wrong_mode), ValidationError);
  auto tiny = cheap_config();
  tiny["belief"]["fields"]["shape"] = Json{{"nx", 2}, {"ny", 16}};
  CHECK_THROWS_AS(config_from_json(tiny), ValidationError);
}

TEST_CASE("config round-trips through JSON") {
  const auto c = config_from_json(cheap_config("simulated"));
  const auto j = to_json(c);
  CHECK(to_json(config_from_json(j)).dump() == j.dump());
  CHECK(c.mode == SessionMode::Simulated);
  CHECK(c.belief.fields.shape.nx == 16);
  CHECK(c.planner.solver.max_iterations == 5);
}

TEST_CASE("observations update the belief and guard the grid") {
  Session s("o", config_from_json(cheap_config()));
  const auto r = s.add_observation(field_obs(3, 4));
  CHECK(r["belief"]["loglik_trace"].size() == 1);
  CHECK(r["belief"]["loglik_trace"][0]["hypotheses"].size() == 4);
  double sum = 0.0;
  for (const auto& w : r["belief"]["hypothesis_weights"]) {
    CHECK(w.get<double>() >= 0.0);
    sum += w.get<double>();
  }
  CHECK(sum + r["belief"]["null_weight"].get<double>() == doctest::Approx(1.0));
  CHECK(r["belief"]["grids"]["thickness_mean"].size() == 256);
  CHECK(r["falsification"].contains("all_falsified"));
  CHECK(r["observation"]["step_index"] == 0);

  CHECK_THROWS_AS(s.add_observation(field_obs(3, 4)), Conflict);
  CHECK_THROWS_AS(s.add_observation(field_obs(16, 0)), ValidationError);
  auto missing = field_obs(5, 5);
  missing.erase("grade");
  missing.erase("graben");
  try {
    s.add_observation(missing);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "grade"));
    CHECK(has_field(e, "graben"));
  }
  CHECK_THROWS_AS(s.add_observation(Json{{"thickness", 1.0}}), ValidationError);
  CHECK(s.belief().observations().size() == 1);
}

TEST_CASE("domain-contradicting data eventually falsifies everything") {
  auto cfg = cheap_config();
  Session s("f", config_from_json(cfg));
  // Thick ore everywhere but no graben anywhere: no hypothesis explains it.
  bool all = false;
  for (int i = 0; i < 12 && !all; ++i) {
    const auto r = s.add_observation(field_obs(1 + i, 2 + i % 5, 7.5, 0.085, false, false));
    all = r["falsification"]["all_falsified"].get<bool>();
  }
  CHECK(all);
}

TEST_CASE("recommendations are cached between observations") {
  Session s("r", config_from_json(cheap_config()));
  const auto r1 = s.recommendation();
  const auto r2 = s.recommendation();
  CHECK(r1.dump() == r2.dump());
  CHECK(s.events().size() == 2);
  CHECK(r1["step"] == 0);
  CHECK(r1["action"].contains("kind"));
  CHECK(r1["diagnostics"]["n_states"] == 10);
  s.add_observation(field_obs(4, 4));
  const auto r3 = s.recommendation();
  CHECK(r3["step"] == 1);
  CHECK(s.events().size() == 4);
}

TEST_CASE("fresh default session recommends drilling") {
  Session s("p", config_from_json(Json::object()));
  const auto r = s.recommendation();
  CHECK(r["action"]["kind"] == "drill");
  CHECK(r["diagnostics"]["n_actions"] == 66);
}

TEST_CASE("decisions close the session") {
  Session s("c", config_from_json(cheap_config()));
  s.add_observation(field_obs(2, 2));
  CHECK_THROWS_AS(s.record_decision("maybe"), ValidationError);
  const auto closed = s.record_decision("develop");
  CHECK(closed["status"] == "terminal");
  CHECK(closed["decision"] == "develop");
  CHECK(closed.contains("expected_profit"));
  CHECK(std::isfinite(closed["expected_profit"]["mean"].get<double>()));
  CHECK(s.terminal());
  CHECK_THROWS_AS(s.add_observation(field_obs(3, 3)), Conflict);
  CHECK_THROWS_AS(s.recommendation(), Conflict);
  CHECK_THROWS_AS(s.record_decision("abandon"), Conflict);
  try {
    s.recommendation();
  } catch (const Conflict& e) {
    CHECK(std::string(e.what()) == "session terminal");
  }
}

TEST_CASE("same config and seed give identical sessions") {
  Session a("x", config_from_json(cheap_config()));
  Session b("x", config_from_json(cheap_config()));
  CHECK(a.belief_summary().dump() == b.belief_summary().dump());
  a.add_observation(field_obs(6, 6));
  b.add_observation(field_obs(6, 6));
  CHECK(a.belief_summary().dump() == b.belief_summary().dump());
  auto other = cheap_config();
  other["seed"] = 10;
  Session c("x", config_from_json(other));
  c.add_observation(field_obs(6, 6));
  CHECK(a.belief_summary().dump() != c.belief_summary().dump());
}

TEST_CASE("replaying the event log reproduces the session") {
  for (const std::string mode : {"field", "simulated"}) {
    CAPTURE(mode);
    Session s("rp", config_from_json(cheap_config(mode)));
    s.add_observation(mode == "field" ? field_obs(3, 3) : Json{{"location", {{"x", 3}, {"y", 3}}}});
    s.recommendation();
    s.add_observation(mode == "field" ? field_obs(9, 12, 1.0, 0.0, false, false)
                                      : Json{{"location", {{"x", 9}, {"y", 12}}}});
    s.recommendation();
    s.record_decision("abandon");
    const auto r = Session::replay("rp", s.events());
    CHECK(r->summary().dump() == s.summary().dump());
    CHECK(r->belief_summary().dump() == s.belief_summary().dump());
    CHECK(r->terminal());
    // Replay of every prefix matches too.
    for (std::size_t n = 1; n < s.events().size(); ++n) {
      std::vector<Json> prefix(s.events().begin(), s.events().begin() + static_cast<long>(n));
      CHECK_NOTHROW(Session::replay("rp", prefix));
    }
  }
  CHECK_THROWS(Session::replay("z", {}));
  CHECK_THROWS(Session::replay("z", {Json{{"type", "observation_added"}}}));
}

TEST_CASE("simulated sessions never expose the truth") {
  Session s("sim", config_from_json(cheap_config("simulated")));
  const auto r = s.add_observation(Json{{"location", {{"x", 5}, {"y", 5}}}});
  CHECK(r["observation"]["location"]["x"] == 5);
  const std::string all = s.summary().dump() + s.belief_summary().dump() + Json(s.events()).dump();
  CHECK(all.find("truth\"") == std::string::npos);
  CHECK(all.find("graben_mask") == std::string::npos);
  CHECK(all.find("geochem_mask") == std::string::npos);
}

TEST_CASE("store persists logs and reloads sessions") {
  const auto dir = fresh_dir("store");
  {
    SessionStore store(dir);
    auto s = store.create(cheap_config(), std::string("s1"));
    CHECK(s->id() == "s1");
    store.mutate("s1", [](Session& x) { return x.add_observation(field_obs(1, 1)); });
    store.mutate("s1", [](Session& x) { return x.recommendation(); });
    CHECK_THROWS_AS(store.create(cheap_config(), std::string("s1")), Conflict);
    CHECK_THROWS_AS(store.create(cheap_config(), std::string("bad id")), ValidationError);
    CHECK_THROWS_AS(store.get("nope"), NotFound);
    CHECK_THROWS_AS(store.get("../etc"), NotFound);
    auto generated = store.create(cheap_config());
    CHECK(valid_session_id(generated->id()));
  }
  const auto events = read_event_log(dir / "s1.events.jsonl");
  REQUIRE(events.size() == 3);
  CHECK(events[1]["type"] == "observation_added");
  CHECK(events[2]["type"] == "recommendation_issued");

  SessionStore reopened(dir);
  const auto before = reopened.read("s1", [](Session& s) { return s.summary(); });
  CHECK(before["n_observations"] == 1);
  const auto rec = reopened.mutate("s1", [](Session& s) { return s.recommendation(); });
  CHECK(read_event_log(dir / "s1.events.jsonl").size() == 3);  // cached, nothing new
  CHECK(rec.dump() == before["recommendation"].dump());
  reopened.mutate("s1", [](Session& s) { return s.record_decision("abandon"); });
  CHECK(read_event_log(dir / "s1.events.jsonl").size() == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("http routes map errors to status codes") {
  const auto dir = fresh_dir("http");
  SessionStore store(dir);
  const auto created = handle_request(store, "POST", "/sessions", Json{{"id", "h1"}, {"config", cheap_config()}}.dump());
  REQUIRE(created.status == 201);
  CHECK(created.body["id"] == "h1");
  CHECK(handle_request(store, "GET", "/sessions/h1", "").status == 200);
  CHECK(handle_request(store, "GET", "/sessions/h1/belief", "").body.contains("grids"));
  CHECK(handle_request(store, "GET", "/sessions/h1/falsification", "").body.contains("null_loglik"));
  CHECK(handle_request(store, "POST", "/sessions/h1/observations", field_obs(2, 3).dump()).status == 200);
  const auto dup = handle_request(store, "POST", "/sessions/h1/observations", field_obs(2, 3).dump());
  CHECK(dup.status == 409);
  CHECK(dup.body["error"]["code"] == "conflict");
  const auto bad = handle_request(store, "POST", "/sessions/h1/observations", "{not json");
  CHECK(bad.status == 400);
  auto invalid = cheap_config();
  invalid["econ"] = Json{{"drill_cost", 0.0}};
  const auto v = handle_request(store, "POST", "/sessions", Json{{"config", invalid}}.dump());
  CHECK(v.status == 400);
  CHECK(v.body["error"]["fields"][0]["field"] == "econ.drill_cost");
  CHECK(handle_request(store, "GET", "/sessions/none", "").status == 404);
  CHECK(handle_request(store, "GET", "/elsewhere", "").status == 404);
  CHECK(handle_request(store, "DELETE", "/sessions/h1", "").status == 405);
  CHECK(handle_request(store, "GET", "/sessions/h1/recommendation", "").status == 200);
  CHECK(handle_request(store, "POST", "/sessions/h1/decision", R"({"decision":"wait"})").status == 400);
  const auto done = handle_request(store, "POST", "/sessions/h1/decision", R"({"decision":"develop"})");
  CHECK(done.status == 200);
  CHECK(done.body["status"] == "terminal");
  const auto after = handle_request(store, "GET", "/sessions/h1/recommendation", "");
  CHECK(after.status == 409);
  CHECK(after.body["error"]["message"] == "session terminal");
  std::filesystem::remove_all(dir);
}

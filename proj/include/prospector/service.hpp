#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prospector/belief.hpp"
#include "prospector/falsify.hpp"
#include "prospector/sarsop.hpp"
#include "prospector/serialize.hpp"

namespace prospector::service {

struct FieldError {
  std::string field;
  std::string message;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<FieldError> errors);
  ValidationError(std::string field, std::string message);
  const std::vector<FieldError>& errors() const { return errors_; }

 private:
  std::vector<FieldError> errors_;
};

class NotFound : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The request conflicts with session state (terminal session, drilled cell).
class Conflict : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SessionMode { Field, Simulated };

struct SessionConfig {
  SessionMode mode = SessionMode::Field;
  std::uint64_t seed = 1;
  std::vector<geo::HypothesisSpec> hypotheses = geo::default_hypotheses();
  belief::BeliefConfig belief{};
  sarsop::PlannerConfig planner{};
  geo::EconParams econ{};
  double margin = 0.0;
  int null_calibration = 200;
  int profit_mc = 64;
  /// Simulated mode: structural class of the hidden truth.
  geo::HypothesisSpec truth_hypothesis{4, 2, 2, 1.0};
};

std::vector<FieldError> validate(const SessionConfig& c);
Json to_json(const SessionConfig& c);
/// Parses and validates; throws ValidationError naming the offending fields.
SessionConfig config_from_json(const Json& j);

struct Recommendation {
  int step = 0;
  pomdp::Action action;
  belief::ProfitEstimate expected_profit;
  sarsop::PlanDiagnostics diagnostics;
};

/// One campaign. State is a pure function of the config and the event log.
class Session {
 public:
  /// Fresh session; appends the creation event.
  Session(std::string id, SessionConfig config);
  /// Rebuilds a session from its event log.
  static std::unique_ptr<Session> replay(std::string id, const std::vector<Json>& events);

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }
  const std::vector<Json>& events() const { return events_; }
  const belief::Belief& belief() const { return belief_; }
  bool terminal() const { return decision_.has_value(); }

  /// In simulated mode only `location` is read; the hidden truth answers.
  Json add_observation(const Json& request);
  Json recommendation();
  Json record_decision(const std::string& decision);

  Json summary() const;
  Json belief_summary() const;
  Json falsification() const;

  std::mutex& mutex() const { return mutex_; }

 private:
  Session(std::string id, SessionConfig config, bool record_creation);
  void apply_observation(const belief::DrillObservation& o);
  void append(Json event);

  std::string id_;
  SessionConfig config_;
  std::vector<Json> events_;
  std::shared_ptr<const falsify::NullModel> null_;
  belief::Belief belief_;
  std::optional<geo::GeoModel> truth_;
  std::optional<Recommendation> recommendation_;
  std::optional<std::string> decision_;
  std::optional<belief::ProfitEstimate> final_profit_;
  std::size_t persisted_ = 0;
  mutable std::mutex mutex_;

  friend class SessionStore;
};

/// Sessions persisted as one append-only JSON-lines event log per session.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  std::shared_ptr<Session> create(const Json& config, std::optional<std::string> id = std::nullopt);
  std::shared_ptr<Session> get(const std::string& id);

  /// Runs `fn` under the session's lock and persists new events.
  template <class Fn>
  Json mutate(const std::string& id, Fn&& fn) {
    auto s = get(id);
    std::lock_guard lock(s->mutex());
    Json out = fn(*s);
    persist(*s);
    return out;
  }
  template <class Fn>
  Json read(const std::string& id, Fn&& fn) {
    auto s = get(id);
    std::lock_guard lock(s->mutex());
    return fn(*s);
  }

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path log_path(const std::string& id) const;

 private:
  void persist(Session& s);

  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

std::vector<Json> read_event_log(const std::filesystem::path& file);
bool valid_session_id(const std::string& id);

}  // namespace prospector::service

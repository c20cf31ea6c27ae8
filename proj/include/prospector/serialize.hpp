#pragma once

#include <string>

#include <json.hpp>

#include "prospector/belief.hpp"
#include "prospector/falsify.hpp"
#include "prospector/geo.hpp"
#include "prospector/harness.hpp"
#include "prospector/pomdp.hpp"
#include "prospector/sarsop.hpp"

// JSON encodings shared by the service, the CLI and the reports. Decoders
// start from the defaults, so absent keys keep their default values.

namespace prospector {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

void to_json(Json& j, const Cell& c);
void from_json(const Json& j, Cell& c);
void to_json(Json& j, const GridShape& g);
void from_json(const Json& j, GridShape& g);

namespace gp {
void to_json(Json& j, const KernelParams& k);
void from_json(const Json& j, KernelParams& k);
}  // namespace gp

namespace geo {
void to_json(Json& j, const HypothesisSpec& h);
void from_json(const Json& j, HypothesisSpec& h);
void to_json(Json& j, const GeometryPrior& p);
void from_json(const Json& j, GeometryPrior& p);
void to_json(Json& j, const FieldParams& f);
void from_json(const Json& j, FieldParams& f);
void to_json(Json& j, const EconParams& e);
void from_json(const Json& j, EconParams& e);
}  // namespace geo

namespace belief {
void to_json(Json& j, const DrillObservation& o);
void from_json(const Json& j, DrillObservation& o);
void to_json(Json& j, const BeliefConfig& c);
void from_json(const Json& j, BeliefConfig& c);
}  // namespace belief

namespace falsify {
void to_json(Json& j, const NullModel& n);
void to_json(Json& j, const FalsificationStatus& s);
}  // namespace falsify

namespace pomdp {
void to_json(Json& j, const Action& a);
void from_json(const Json& j, Action& a);
void to_json(Json& j, const DiscretizationConfig& c);
void from_json(const Json& j, DiscretizationConfig& c);
}  // namespace pomdp

namespace sarsop {
void to_json(Json& j, const SolverOptions& o);
void from_json(const Json& j, SolverOptions& o);
void to_json(Json& j, const PlannerConfig& c);
void from_json(const Json& j, PlannerConfig& c);
void to_json(Json& j, const PlanDiagnostics& d);
}  // namespace sarsop

namespace harness {
void to_json(Json& j, const TrialConfig& c);
void from_json(const Json& j, TrialConfig& c);
void to_json(Json& j, const ExperimentConfig& c);
void to_json(Json& j, const StepRecord& s);
}  // namespace harness

}  // namespace prospector

#pragma once

// JSON shapes shared by the service and the CLI.

#include <nlohmann/json.hpp>

#include "catrag/catrag.hpp"
#include "catrag/kgraph.hpp"

namespace catrag::wire {

nlohmann::json to_json(const ScoredHit& hit, const RegulationGraph& graph);
nlohmann::json to_json(const RelationTriplet& r);
nlohmann::json to_json(const GraphStats& s);
nlohmann::json to_json(const StageTimings& t);
nlohmann::json to_json(const QueryResult& r, const RegulationGraph& graph);
nlohmann::json to_json(const Prediction& p, const RouterModel& router);

nlohmann::json error_envelope(std::string_view code, std::string_view message);

}  // namespace catrag::wire

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "wassdoe/bench.hpp"
#include "wassdoe/design.hpp"
#include "wassdoe/gp.hpp"
#include "wassdoe/measure.hpp"
#include "wassdoe/metrosim.hpp"

namespace wassdoe::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Adds "schema" and "kind" to a top-level document.
json document(const std::string& kind, json body);
/// ValidationError unless the document carries schema 1 and the given kind.
void check_document(const json& j, const std::string& kind);

json to_json(const DiscretizedMeasure& mu);
DiscretizedMeasure measure_from_json(const json& j);

json to_json(const MixedPoint& p);
MixedPoint point_from_json(const json& j);

json to_json(const WassersteinOrder& order);
WassersteinOrder order_from_json(const json& j);

json to_json(const MeasureDesign& design);
MeasureDesign measure_design_from_json(const json& j);

json to_json(const MixedDesign& design);
MixedDesign mixed_design_from_json(const json& j);

json to_json(const GpModel& model);
/// Rebuilds the model from its stored parameters (no refit).
GpModel model_from_json(const json& j);

json to_json(const metro::MetroScenario& scenario);
/// Either an explicit scenario or {"synthetic": {...options}}.
metro::MetroScenario scenario_from_json(const json& j);
metro::SyntheticOptions synthetic_options_from_json(const json& j);

json to_json(const bench::CellSummary& summary);
json summary_to_json(const bench::GridResult& result);

/// Parses a JSON file; ValidationError on unreadable or malformed input.
json read_json(const std::filesystem::path& path);
std::string dump(const json& j);
/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace wassdoe::io

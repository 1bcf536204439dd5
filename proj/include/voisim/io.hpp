#pragma once

#include <string>

#include "voisim/episode_log.hpp"
#include "voisim/harness.hpp"
#include "voisim/model.hpp"
#include "voisim/value_function.hpp"

namespace voisim {

/// Scenario files are nested key-value JSON. Matrices are row-major nested
/// arrays; every time-indexed field is either one value (broadcast) or a
/// length-(T+1) list (Q: T+2). Parse errors throw std::invalid_argument
/// with the offending path.
ScenarioConfig scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioConfig& config, int indent = 2);

ScenarioConfig load_scenario_file(const std::string& path);
void save_scenario_file(const ScenarioConfig& config, const std::string& path);

/// Flat comma-separated trajectory table: one row per slot, header row,
/// floats rendered with 17 significant digits so re-reading is exact.
/// Columns: k, sigma, gamma (empty unless sent), delivered, lambda,
/// voi (empty if n/a), mse, then x/xcheck/xhat[/u] components by index.
void write_trajectory(const EpisodeLog& log, const std::string& path);

/// Parse a trajectory file written by write_trajectory.
EpisodeLog read_trajectory(const std::string& path);

std::string report_to_json(const AggregateReport& report, int indent = 2);
void write_report(const AggregateReport& report, const std::string& path);

/// Tabulated value function and decision regions: one row per grid node per
/// slot with columns (k, state coordinates, value, voi, transmit).
void write_value_table(const ValueFunctionGrid& grid, const std::string& path);

}  // namespace voisim

#pragma once

#include <string>

#include <json.hpp>

#include "omnifht/geometry.hpp"
#include "omnifht/inr.hpp"
#include "omnifht/phantom.hpp"
#include "omnifht/pose_search.hpp"

namespace omnifht {

// One JSON file holds every knob of a run. Partial files are fine (missing
// keys keep their defaults); unknown keys and type mismatches are rejected
// with the JSON-pointer path of the offender, so typos cannot silently fall
// back to defaults.
struct RunConfig {
  OpticsConfig optics;
  TrainConfig train;
  SearchConfig search;
  TrajectorySpec trajectory;
  int threads = 1;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);  // fully resolved

// Reads and parses the file (DataError), then config_from_json (ConfigError).
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& c);

}  // namespace omnifht

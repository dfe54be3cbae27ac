#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "tailrisk/tail_regression.hpp"

namespace tailrisk::tasks {

using json = nlohmann::json;

/// One CLI run. `params` holds the task-specific block; resolve() fills in
/// defaults so the echoed config reproduces the run on its own.
struct RunConfig {
  std::string task;   // c1, c2, c3, c4, bench, fixture
  std::string phase;  // c1: train|predict|bootstrap; fixture: c1_synth|c3_trivariate|c4_blocks
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";
  json params = json::object();
};

json to_json(const RunConfig& c);
RunConfig run_config_from_json(const json& j);

// Default parameter block of a task (and phase, for fixtures).
json default_params(const std::string& task, const std::string& phase = "");

// Validates task/phase, merges defaults under params and rejects unknown keys
// or values of the wrong JSON type (ConfigError).
RunConfig resolve(const RunConfig& c);

// Resolves, runs, writes the output files under out_dir and returns the result
// JSON (also written to out_dir/<task>[_<phase>].json). The result's "config"
// member is the resolved config.
json run(const RunConfig& c);

// Name of the result JSON written by run().
std::string result_file_name(const RunConfig& c);

// c1 model files: fitted networks plus the preparation metadata needed to
// transform new covariates.
json model_to_json(const TailRegressionModel& model, const Dataset& prepared);
TailRegressionModel model_from_json(const json& j, Dataset& preparation);

}  // namespace tailrisk::tasks

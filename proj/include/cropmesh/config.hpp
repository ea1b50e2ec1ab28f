#pragma once

#include <optional>
#include <string>

#include "cropmesh/baselines.hpp"
#include "cropmesh/sim.hpp"
#include "cropmesh/workload.hpp"

namespace cropmesh {

struct ConfigError : Error {
  using Error::Error;
};

// One experiment: model source, workload, policy, engine and sim parameters.
struct RunConfig {
  std::string trace_path;   // fit models from a trace CSV...
  std::string models_path;  // ...or load a fitted models.json

  std::string generator;  // "scenario1" | "scenario2" | "" when replaying
  uint64_t workload_seed = 1;
  double scale = 1.0;
  std::string workload_file;
  std::string topology_json;  // raw topology section for task-list replays

  PolicyId policy = PolicyId::CentralRouting;
  TeParams te;
  SimParams sim;
  int64_t horizon_override = -1;  // <0: take the scenario's horizon

  std::string out_root;  // default $CROPMESH_OUT or "runs"
  bool full_dumps = false;
};

struct CliOverrides {
  std::optional<std::string> policy;
  std::optional<uint64_t> seed;
  std::optional<double> scale;
  std::optional<std::string> trace;
  std::optional<std::string> out;
};

RunConfig load_run_config(const std::string& path, const CliOverrides& ov);

// Canonical config echo after default filling; hashing and the round-trip
// guarantee both hang off this form.
std::string effective_config_json(const RunConfig& c);
std::string config_hash8(const RunConfig& c);
std::string run_dir(const RunConfig& c);

ThroughputModel load_model_for(const RunConfig& c);
Scenario build_scenario(const RunConfig& c, const ThroughputModel& model);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace cropmesh

#include "cropmesh/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cropmesh/rng.hpp"
#include "json.hpp"

namespace cropmesh {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
}

RunConfig load_run_config(const std::string& path, const CliOverrides& ov) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  // Relative paths in the config resolve against the config's directory.
  fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string p) {
    if (p.empty() || fs::path(p).is_absolute() || fs::exists(p)) return p;
    fs::path joined = base / p;
    return fs::exists(joined) ? joined.string() : p;
  };

  RunConfig c;
  c.trace_path = resolve(j.value("trace", ""));
  c.models_path = resolve(j.value("models", ""));
  if (ov.trace) c.trace_path = *ov.trace;

  if (j.contains("workload")) {
    const json& w = j["workload"];
    c.generator = w.value("generator", "");
    c.workload_file = resolve(w.value("file", ""));
    if (w.contains("seed")) c.workload_seed = w["seed"].get<uint64_t>();
    c.scale = w.value("scale", 1.0);
  }
  if (j.contains("topology")) c.topology_json = j["topology"].dump();

  std::string policy = j.value("policy", "central");
  if (ov.policy) policy = *ov.policy;
  auto pid = policy_from_name(policy);
  if (!pid) throw ConfigError("unknown policy: " + policy);
  c.policy = *pid;

  if (j.contains("te")) {
    const json& t = j["te"];
    c.te.invocation_period = t.value("invocation_period", c.te.invocation_period);
    c.te.headroom = t.value("headroom", c.te.headroom);
    c.te.hop_epsilon = t.value("hop_epsilon", c.te.hop_epsilon);
    c.te.channel_switch_penalty_s =
        t.value("channel_switch_penalty_s", c.te.channel_switch_penalty_s);
  }
  if (j.contains("sim")) {
    const json& s = j["sim"];
    c.sim.epoch_length_s = s.value("epoch_length_s", c.sim.epoch_length_s);
    if (s.contains("horizon")) c.horizon_override = s["horizon"].get<int64_t>();
    c.sim.channel_switch_penalty_s =
        s.value("channel_switch_penalty_s", c.sim.channel_switch_penalty_s);
    c.sim.control_propagation_s =
        s.value("control_propagation_s", c.sim.control_propagation_s);
    if (s.contains("seed")) c.sim.seed = s["seed"].get<uint64_t>();
    c.sim.spatial_stddev = s.value("spatial_stddev", c.sim.spatial_stddev);
    c.sim.temporal_stddev = s.value("temporal_stddev", c.sim.temporal_stddev);
  }
  if (!j.contains("sim") || !j["sim"].contains("seed"))
    throw ConfigError("config requires an explicit sim.seed");

  if (ov.seed) {
    c.sim.seed = *ov.seed;
    c.workload_seed = *ov.seed;
  }
  if (ov.scale) c.scale = *ov.scale;

  c.out_root = j.value("out", "");
  if (ov.out) c.out_root = *ov.out;
  if (c.out_root.empty()) {
    const char* env = std::getenv("CROPMESH_OUT");
    c.out_root = env != nullptr && *env != '\0' ? env : "runs";
  }
  c.full_dumps = j.value("full_dumps", false);

  // Validation.
  if (c.trace_path.empty() == c.models_path.empty())
    throw ConfigError("config needs exactly one of trace / models");
  std::string model_file = c.trace_path.empty() ? c.models_path : c.trace_path;
  if (!fs::exists(model_file))
    throw ConfigError("model input not found: " + model_file);
  if (c.generator.empty() == c.workload_file.empty())
    throw ConfigError("workload needs exactly one of generator / file");
  if (!c.generator.empty() && c.generator != "scenario1" &&
      c.generator != "scenario2")
    throw ConfigError("unknown generator: " + c.generator);
  if (!c.workload_file.empty() && !fs::exists(c.workload_file))
    throw ConfigError("workload file not found: " + c.workload_file);
  if (!(c.scale > 0.0 && c.scale <= 1.0))
    throw ConfigError("scale must be in (0, 1]");
  if (c.te.invocation_period < 1 || c.te.headroom < 0 || c.te.headroom >= 1)
    throw ConfigError("bad te parameters");
  if (c.sim.epoch_length_s <= 0 ||
      c.sim.channel_switch_penalty_s >= c.sim.epoch_length_s)
    throw ConfigError("switch penalty must be shorter than an epoch");
  return c;
}

std::string effective_config_json(const RunConfig& c) {
  ordered_json j;
  if (!c.trace_path.empty()) j["trace"] = c.trace_path;
  if (!c.models_path.empty()) j["models"] = c.models_path;
  ordered_json w;
  if (!c.generator.empty()) {
    w["generator"] = c.generator;
    w["seed"] = c.workload_seed;
    w["scale"] = c.scale;
  } else {
    w["file"] = c.workload_file;
  }
  j["workload"] = w;
  if (!c.topology_json.empty()) j["topology"] = json::parse(c.topology_json);
  j["policy"] = policy_name(c.policy);
  j["te"] = {{"invocation_period", c.te.invocation_period},
             {"headroom", c.te.headroom},
             {"hop_epsilon", c.te.hop_epsilon},
             {"channel_switch_penalty_s", c.te.channel_switch_penalty_s}};
  ordered_json s;
  s["epoch_length_s"] = c.sim.epoch_length_s;
  if (c.horizon_override >= 0) s["horizon"] = c.horizon_override;
  s["channel_switch_penalty_s"] = c.sim.channel_switch_penalty_s;
  s["control_propagation_s"] = c.sim.control_propagation_s;
  s["seed"] = c.sim.seed;
  s["spatial_stddev"] = c.sim.spatial_stddev;
  s["temporal_stddev"] = c.sim.temporal_stddev;
  j["sim"] = s;
  return j.dump(2) + "\n";
}

std::string config_hash8(const RunConfig& c) {
  std::string text = effective_config_json(c);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf).substr(0, 8);
}

std::string run_dir(const RunConfig& c) {
  return c.out_root + "/" + config_hash8(c) + "-s" +
         std::to_string(c.sim.seed);
}

ThroughputModel load_model_for(const RunConfig& c) {
  if (!c.models_path.empty())
    return ThroughputModel::from_json(read_file(c.models_path));
  return fit_trace(load_trace_csv(c.trace_path));
}

Scenario build_scenario(const RunConfig& c, const ThroughputModel& model) {
  (void)model;
  Scenario s;
  if (c.generator == "scenario1") {
    s = generate_scenario1(c.workload_seed, c.scale);
  } else if (c.generator == "scenario2") {
    s = generate_scenario2(c.workload_seed, c.scale);
  } else {
    std::string text = read_file(c.workload_file);
    json j = json::parse(text);
    if (j.is_array()) {
      // Bare task list; the topology section must describe the field.
      if (c.topology_json.empty())
        throw ConfigError("task-list workload needs a topology section");
      json t = json::parse(c.topology_json);
      ordered_json merged;
      merged["horizon"] = 250;
      merged["grid"] = t.at("grid");
      merged["gateways"] = t.at("gateways");
      merged["devices"] = t.value("devices", json::array());
      merged["tasks"] = j;
      s = scenario_from_json(merged.dump());
    } else {
      s = scenario_from_json(text);
    }
  }
  s.topo.validate_trajectories(10.0);
  for (const TaskSpec& t : s.tasks) {
    if (t.deadline_epoch < t.request_epoch)
      throw ConfigError("task deadline precedes request");
    if (t.kind == TaskKind::RealTime &&
        (t.demand_mbps <= 0 || t.duration_epochs <= 0))
      throw ConfigError("real-time task needs demand and duration");
    if (t.kind == TaskKind::DataCollection && t.data_volume_mb <= 0)
      throw ConfigError("collection task needs a data volume");
    if (s.topo.device_index(t.device_id) < 0)
      throw ConfigError("task names unknown device " +
                        std::to_string(t.device_id));
  }
  return s;
}

}  // namespace cropmesh

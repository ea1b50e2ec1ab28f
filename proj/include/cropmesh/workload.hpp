#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cropmesh/mesh.hpp"

namespace cropmesh {

enum class TaskKind : uint8_t { RealTime, DataCollection };
enum class FlowStatus : uint8_t { Pending, Active, Paused, Done, Expired };

const char* task_kind_name(TaskKind k);
const char* flow_status_name(FlowStatus s);

struct TaskSpec {
  int64_t id = -1;
  TaskKind kind = TaskKind::RealTime;
  int32_t device_id = -1;
  int64_t request_epoch = 0;
  double demand_mbps = 0;    // RealTime
  double data_volume_mb = 0; // DataCollection
  int duration_epochs = 0;   // RealTime
  int64_t deadline_epoch = 0;
  bool preemptible = true;
};

struct FlowState {
  FlowStatus status = FlowStatus::Pending;
  int remaining_duration = 0;
  double remaining_mb = 0;
  double last_rate_mbps = -1;  // last assigned rate; <0 before any assignment

  static FlowState initial(const TaskSpec& t) {
    FlowState s;
    s.remaining_duration = t.duration_epochs;
    s.remaining_mb = t.data_volume_mb;
    return s;
  }
};

// Epochs the task can still afford to wait. Real-time: (deadline - now)
// minus remaining streaming epochs. Data collection: drain time at the last
// assigned rate, +inf before any assignment.
double slack(const TaskSpec& task, const FlowState& state, int64_t now,
             double epoch_length_s = 60.0);

struct Scenario {
  MeshTopology topo;
  std::vector<TaskSpec> tasks;
  int64_t horizon = 250;
};

struct ScenarioParams {
  double scale = 1.0;
  double spacing_m = 90.0;
  int64_t horizon = 250;
};

Scenario generate_scenario1(uint64_t seed, double scale);
Scenario generate_scenario2(uint64_t seed, double scale);

std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);

}  // namespace cropmesh

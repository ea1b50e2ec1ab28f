#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cropmesh/te.hpp"
#include "cropmesh/workload.hpp"

namespace cropmesh {

struct SimParams {
  double epoch_length_s = 60.0;
  int64_t horizon = 250;
  double channel_switch_penalty_s = 5.2;
  double control_propagation_s = 1.3;  // folded into the switch outage
  uint64_t seed = 0;
  double spatial_stddev = 0.30;   // device-to-AP hop
  double temporal_stddev = 0.10;  // above-canopy hops
};

struct FlowEpochRecord {
  int64_t flow;
  int64_t epoch;
  double assigned_mbps;
  double delivered_mbps;
};

struct FlowSummary {
  int64_t flow = -1;
  TaskKind kind = TaskKind::RealTime;
  double demand_mbps = 0;
  double delivered_mb = 0;
  int64_t active_epochs = 0;
  double normalized_throughput = 0;  // mean delivered/demand over active epochs
  int64_t waiting_epochs = -1;       // first active - request, -1 if never served
  bool completed = false;
  bool violated = false;
};

struct SimReport {
  std::vector<FlowEpochRecord> records;
  std::vector<FlowSummary> flows;
  double total_mb = 0;
  double realtime_mb = 0;
  double collection_mb = 0;
  int violations = 0;
  int realtime_flows = 0;
  int completed_realtime = 0;
  double norm_mean = 0;
  double norm_p10 = 0, norm_p25 = 0, norm_p50 = 0, norm_p75 = 0, norm_p90 = 0;

  std::string report_csv() const;
  std::string summary_json() const;
};

struct RunHooks {
  // Called with each fresh plan and the world it was computed against.
  std::function<void(const TePlan&, const WorldView&)> on_plan;
  // Delivered-based per-slot load after each epoch.
  std::function<void(int64_t epoch, const std::vector<double>& load,
                     const SlotSpace& slots)> on_epoch_load;
};

SimReport run(const Scenario& scenario, Planner& planner,
              const ThroughputModel& model, const SimParams& sim,
              const TeParams& te, const RunHooks& hooks = {});

// Saturating end-to-end rate of a single flow over an n-hop serial chain of
// routers with uniform spacing; the capacity calculus sets the bottleneck.
double chain_throughput(int n_hops, double spacing_m,
                        const ThroughputModel& model);

}  // namespace cropmesh

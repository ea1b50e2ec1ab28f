#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cropmesh/capacity.hpp"
#include "cropmesh/propagation.hpp"
#include "cropmesh/workload.hpp"

namespace cropmesh::oracle {

// Literal re-derivation of the per-flow footprint from the rate/throughput
// relations, kept free of the capacity module's charging code so the two can
// be compared blindly.
std::map<int32_t, double> recompute_footprint(const FlowPath& path,
                                              double rate_mbps,
                                              const RadioEnv& env);

// A scheduling instance small enough to optimize exhaustively.
struct TinyInstance {
  Scenario scn;  // grid within 2x3, at most 3 real-time flows, horizon <= 5
  uint64_t seed = 0;
};

TinyInstance make_tiny_instance(uint64_t seed);

struct OracleFlowPlan {
  int64_t flow = -1;
  int64_t start = -1;  // -1: never scheduled
  int32_t ap = -1;
  int channel = 0;
  std::vector<int32_t> route;
};

struct OracleResult {
  double objective_mb = 0;  // max total delivered data
  std::vector<OracleFlowPlan> plan;
  uint64_t structures_tried = 0;
};

// Exhaustive search over start epochs, APs, channels and 4-neighbor routes,
// with per-epoch rates set to the exact optimum for each structure. Throws
// when the search space exceeds `budget`.
OracleResult brute_force_optimal(const TinyInstance& inst,
                                 const ThroughputModel& model,
                                 double epoch_length_s = 60.0,
                                 uint64_t budget = 10'000'000);

}  // namespace cropmesh::oracle

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cropmesh/capacity.hpp"
#include "cropmesh/mesh.hpp"
#include "cropmesh/workload.hpp"

namespace cropmesh {

struct TeParams {
  int invocation_period = 5;          // epochs between engine runs
  double headroom = 0.10;             // capacity fraction left unallocated
  double hop_epsilon = 1e-6;          // route cost per hop
  double channel_switch_penalty_s = 5.2;
};

struct FlowKnobs {
  int64_t flow = -1;
  bool paused = false;
  double rate_mbps = 0;
  int32_t ap = -1;
  int channel = kNoChannel;
  std::vector<int32_t> route;  // route[0] = AP ... back() = gateway
};

struct EpochPlan {
  int64_t epoch = 0;
  std::vector<FlowKnobs> flows;  // sorted by flow id
  std::vector<int> router_ch24;  // committed channels; kNoChannel = free
  const FlowKnobs* find(int64_t flow) const;
};

struct TePlan {
  int64_t start = 0;
  std::vector<EpochPlan> rows;
  const EpochPlan* row(int64_t epoch) const;
};

// Live picture of one task's flow as the simulator tracks it.
struct FlowRuntime {
  FlowState state;
  int sticky_channel = kNoChannel;  // 2.4 channel pinned while an RT flow runs
  int32_t current_ap = -1;
  int device_channel = kNoChannel;  // what the device radio is tuned to
  int64_t first_active = -1;
  int64_t active_epochs = 0;
  double norm_sum = 0;       // sum of delivered/demand over active epochs
  double delivered_mb = 0;
};

// Snapshot handed to a planner at each invocation.
struct WorldView {
  const MeshTopology* topo = nullptr;
  const ThroughputModel* model = nullptr;
  const std::vector<TaskSpec>* tasks = nullptr;
  const std::vector<FlowRuntime>* flows = nullptr;  // index == task index
  TeParams te;
  int64_t now = 0;
  int64_t horizon = 0;
  uint64_t seed = 0;
  double epoch_length_s = 60.0;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual TePlan plan(const WorldView& w) = 0;
  virtual std::string name() const = 0;
};

enum class ApRule { Nearest, MinF };
enum class RouteRule { RandomMonotone, HopCountDet, Weighted, WeightedTwoFour };
enum class ChannelRule { RandomFixed, MinF };

struct PolicyConfig {
  std::string name = "central";
  bool managed = true;  // slack admission + explicit rates; false = naive mesh
  ApRule ap_rule = ApRule::MinF;
  RouteRule route_rule = RouteRule::Weighted;
  ChannelRule channel_rule = ChannelRule::MinF;
};

// One planner implements the full engine and, with the knobs above, each of
// the comparison policies.
class GreedyPlanner : public Planner {
 public:
  explicit GreedyPlanner(PolicyConfig cfg) : cfg_(std::move(cfg)) {}
  TePlan plan(const WorldView& w) override;
  std::string name() const override { return cfg_.name; }
  const PolicyConfig& config() const { return cfg_; }

 private:
  PolicyConfig cfg_;
};

// Max-min fair allocation in Mbps under per-slot unit budgets. This is the
// engine's enforcement policy: contended capacity divides evenly in Mbps.
struct RateProblem {
  struct Coef {
    int32_t slot;
    double per_mbps;
  };
  struct FlowVars {
    std::vector<Coef> coef;
    double cap = 0;  // demand / attempted rate
  };
  std::vector<FlowVars> flows;
  std::vector<double> base;  // pre-committed load per slot
  double budget = 1.0;       // uniform per-slot budget
};
std::vector<double> maxmin_rates(const RateProblem& p);

// Unenforced spectrum arbitration: contending flows win equal shares of the
// channel (resource units) at each saturated device, so datarates fall out of
// link quality rather than fairness in Mbps. Used by the simulator to resolve
// oversubscription when flows just transmit.
std::vector<double> natural_rates(const RateProblem& p);

// Selection internals exposed for verification against exhaustive search.
struct ApChoice {
  int32_t ap = -1;
  int channel = kNoChannel;
  double score = 0;
};
// F(AP) for a sender at `pos` with desired rate, against committed 2.4GHz
// state described by `sources` (all currently scheduled 2.4 hops).
struct Hop24 {
  Vec2 sender;
  double hop_dist;
  double units;      // direct units at the hop's desired rate
  int channel;
  int32_t router_a;  // charged endpoints (either may be -1)
  int32_t router_b;
  Mode mode;
};
double f_ap_score(Vec2 sender_pos, double demand_mbps, int32_t ap, int channel,
                  Mode access_mode, const std::vector<Hop24>& sources,
                  const std::vector<int>& router_ch24, const MeshTopology& topo,
                  const ThroughputModel& model);

// Argmin of F over (AP, channel): committed APs keep their channel, free APs
// try all three. `sticky` pins the device's channel when nonzero. Ties break
// toward lower F, nearer AP, lower id, lower channel.
std::optional<ApChoice> select_access_point(
    Vec2 sender_pos, double demand_mbps, Mode access_mode, int sticky,
    const std::vector<Hop24>& sources, const std::vector<int>& router_ch24,
    const MeshTopology& topo, const ThroughputModel& model);

// Contention-weighted node cost for route search.
double route_node_weight(int32_t router, double desired_mbps,
                         const std::vector<double>& committed5,
                         const MeshTopology& topo, const ThroughputModel& model);
double route_path_cost(const std::vector<int32_t>& path, double desired_mbps,
                       const std::vector<double>& committed5,
                       const MeshTopology& topo, const ThroughputModel& model,
                       double hop_epsilon);

// Min-cost route over the 4-neighbor grid to the cheapest gateway, node
// weights from route_node_weight plus hop_epsilon per hop; equal-cost
// choices break by seeded coin.
std::vector<int32_t> weighted_route_search(int32_t ap, double desired_mbps,
                                           const std::vector<double>& committed5,
                                           const MeshTopology& topo,
                                           const ThroughputModel& model,
                                           double hop_epsilon, uint64_t tie_key);

// Structural checks shared by every policy's output.
void validate_plan(const TePlan& plan, const MeshTopology& topo);

}  // namespace cropmesh

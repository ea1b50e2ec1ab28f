#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cropmesh/mesh.hpp"
#include "cropmesh/propagation.hpp"

namespace cropmesh {

// One resource unit = the whole channel at a (node, band). Consumed fractions
// are tracked per slot; values above 1 mean overcommit and are representable.
//
// Slot layout for a topology with R routers and D devices:
//   [0, R)      router 2.4GHz
//   [R, 2R)     router 5GHz
//   [2R, 2R+D)  device 2.4GHz (devices have no 5GHz radio)
class SlotSpace {
 public:
  SlotSpace() = default;
  explicit SlotSpace(const MeshTopology& topo)
      : num_routers_(static_cast<int32_t>(topo.routers().size())),
        num_devices_(static_cast<int32_t>(topo.devices().size())) {}

  int32_t count() const { return 2 * num_routers_ + num_devices_; }
  int32_t router24(int32_t r) const { return r; }
  int32_t router5(int32_t r) const { return num_routers_ + r; }
  int32_t device24(int32_t device_index) const {
    return 2 * num_routers_ + device_index;
  }

  bool is_router(int32_t slot) const { return slot < 2 * num_routers_; }
  Band band(int32_t slot) const {
    return (slot >= num_routers_ && slot < 2 * num_routers_) ? Band::GHz5
                                                             : Band::GHz24;
  }
  // Router id or device index, depending on is_router().
  int32_t owner(int32_t slot) const {
    if (slot < num_routers_) return slot;
    if (slot < 2 * num_routers_) return slot - num_routers_;
    return slot - 2 * num_routers_;
  }
  int32_t routers() const { return num_routers_; }

 private:
  int32_t num_routers_ = 0;
  int32_t num_devices_ = 0;
};

// Sparse per-slot consumed fractions, kept sorted by slot.
class ResourceFootprint {
 public:
  void add(int32_t slot, double units);
  void finalize();  // sort + merge duplicate slots
  double at(int32_t slot) const;
  bool empty() const { return entries_.empty(); }
  const std::vector<std::pair<int32_t, double>>& entries() const {
    return entries_;
  }
  ResourceFootprint scaled(double factor) const;

 private:
  std::vector<std::pair<int32_t, double>> entries_;
  bool finalized_ = true;
};

// r(f, src) = r(f, dst) = rate / capacity, where capacity is throughput(d)
// possibly rescaled by a variation multiplier.
double direct_units(double rate_mbps, double capacity_mbps);

// delta(f, C): fraction of the sender's channel use that lands on a bystander
// at distance d_bystander, for a hop of length d_hop in the given mode.
double interference_delta(const ThroughputModel& model, Mode mode, double d_hop,
                          double d_bystander);

// Units a hop consumes at a same-channel bystander: direct share times delta.
inline double interference_units(double rate_mbps, double capacity_mbps,
                                 const ThroughputModel& model, Mode mode,
                                 double d_hop, double d_bystander) {
  double delta = interference_delta(model, mode, d_hop, d_bystander);
  return delta <= 0 ? 0.0 : direct_units(rate_mbps, capacity_mbps) * delta;
}

// Channel state the footprint charging runs against.
struct RadioEnv {
  const MeshTopology* topo = nullptr;
  const ThroughputModel* model = nullptr;
  SlotSpace slots;
  std::vector<int> router_ch24;  // per router; kNoChannel = unassigned

  struct ActiveDevice {
    int32_t device_index;
    Vec2 pos;
    int channel24;
  };
  std::vector<ActiveDevice> devices;  // 2.4GHz bystanders (flow sources)

  RadioEnv() = default;
  RadioEnv(const MeshTopology& t, const ThroughputModel& m)
      : topo(&t), model(&m), slots(t),
        router_ch24(t.routers().size(), kNoChannel) {}
};

// A device-to-gateway path: optional 2.4GHz access hop plus mesh hops.
struct FlowPath {
  int32_t device_index = -1;  // -1: no access hop (router-sourced)
  Vec2 device_pos;
  Mode access_mode = Mode::Uc24;
  int access_channel = kNoChannel;

  std::vector<int32_t> route;     // route[0] is the AP, back() the gateway
  std::vector<Mode> mesh_modes;   // one per hop; Ac5, or Ac24 when bridged
  std::vector<int> mesh_channels; // channel per 2.4GHz mesh hop, else 0

  int mesh_hops() const {
    return route.size() < 2 ? 0 : static_cast<int>(route.size()) - 1;
  }
};

// Per-hop capacity overrides (variation multipliers applied by the caller);
// empty vectors mean the unscaled model values.
struct HopCapacityScale {
  double access = 1.0;
  std::vector<double> mesh;
  double mesh_at(size_t i) const { return i < mesh.size() ? mesh[i] : 1.0; }
};

// Full footprint of one flow at `rate_mbps`: direct units at each hop's
// endpoints, interference units at every same-channel node in range of each
// hop's sender. Contributions from multiple hops at one node are summed.
ResourceFootprint flow_footprint(const FlowPath& path, double rate_mbps,
                                 const RadioEnv& env,
                                 const HopCapacityScale& scale = {});

// Committed fractions per slot for the currently scheduled flows.
// Removal recomputes from the surviving footprints (ascending flow id), so
// add/remove histories reaching the same flow set agree exactly.
class ContentionLedger {
 public:
  explicit ContentionLedger(const SlotSpace& slots)
      : slots_(slots), committed_(slots.count(), 0.0) {}

  void add(int64_t flow_id, ResourceFootprint fp);
  void remove(int64_t flow_id);
  bool contains(int64_t flow_id) const { return flows_.count(flow_id) > 0; }
  double committed(int32_t slot) const { return committed_[slot]; }
  const std::vector<double>& committed() const { return committed_; }
  const SlotSpace& slots() const { return slots_; }

  struct Overcommit {
    int32_t slot;
    double committed;
  };
  // Slots where committed exceeds 1 - headroom (plus a 1e-9 float guard).
  std::vector<Overcommit> check(double headroom) const;

 private:
  void recompute();
  SlotSpace slots_;
  std::map<int64_t, ResourceFootprint> flows_;
  std::vector<double> committed_;
};

// "r12"/"d7" label for ledger dumps.
std::string slot_node_name(const SlotSpace& slots, const MeshTopology& topo,
                           int32_t slot);
std::string slot_band_name(const SlotSpace& slots, int32_t slot);

}  // namespace cropmesh

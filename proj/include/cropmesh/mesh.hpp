#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cropmesh/propagation.hpp"

namespace cropmesh {

struct Vec2 {
  double x = 0;
  double y = 0;
};

inline double distance(Vec2 a, Vec2 b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

constexpr int kChannels24[3] = {1, 6, 11};
constexpr int kNoChannel = 0;

inline bool valid_channel24(int c) { return c == 1 || c == 6 || c == 11; }

struct Router {
  int32_t id = -1;
  Vec2 pos;
  int channel24 = kNoChannel;  // default assignment; planners may override
  int channel5 = 36;           // single shared mesh channel
  bool is_gateway = false;
};

struct Waypoint {
  Vec2 pos;
  int64_t epoch = 0;
};

struct Device {
  int32_t id = -1;
  Vec2 start;
  std::vector<Waypoint> waypoints;  // sorted by epoch; empty means static
  bool above_canopy = false;        // selects the AC mode for the access hop

  Vec2 position_at(int64_t epoch) const;
  bool mobile() const { return waypoints.size() > 1; }
};

// Routers on a rectangular grid (row 0 is the gateway row, origin at its
// corner), plus the under-canopy devices.
class MeshTopology {
 public:
  static MeshTopology grid(int rows, int cols, double spacing_m,
                           std::vector<int32_t> gateway_ids);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double spacing() const { return spacing_; }

  const std::vector<Router>& routers() const { return routers_; }
  const Router& router(int32_t id) const;
  Router& router(int32_t id);
  const std::vector<int32_t>& gateways() const { return gateway_ids_; }

  const std::vector<Device>& devices() const { return devices_; }
  void add_device(Device d);
  const Device& device(int32_t id) const;
  int device_index(int32_t id) const;  // -1 when unknown

  // Up/down/left/right grid neighbors.
  const std::vector<int32_t>& grid_neighbors(int32_t router_id) const;

  // All routers whose link to `pos` has positive throughput in `mode`,
  // excluding `exclude_router` (the querying node itself, when it is one).
  std::vector<int32_t> routers_in_range(Vec2 pos, Mode mode,
                                        const ThroughputModel& model,
                                        int32_t exclude_router = -1) const;

  // Routers within AC5 cutoff of each router, with distances; used for
  // interference neighborhoods. Cached per (model cutoff).
  struct RangedNeighbor {
    int32_t id;
    double dist;
  };
  const std::vector<RangedNeighbor>& mesh_neighborhood(
      int32_t router_id, Mode mode, const ThroughputModel& model) const;

  void validate_trajectories(double max_speed_m_per_epoch) const;

 private:
  int rows_ = 0, cols_ = 0;
  double spacing_ = 0;
  std::vector<Router> routers_;
  std::vector<int32_t> gateway_ids_;
  std::vector<Device> devices_;
  std::unordered_map<int32_t, int> device_index_;
  std::vector<std::vector<int32_t>> grid_neighbors_;

  mutable double cached_cutoff_ = -1;
  mutable std::vector<std::vector<RangedNeighbor>> mesh_nbrs_;
};

}  // namespace cropmesh

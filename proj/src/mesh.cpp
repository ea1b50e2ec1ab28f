#include "cropmesh/mesh.hpp"

#include <algorithm>

namespace cropmesh {

Vec2 Device::position_at(int64_t epoch) const {
  if (waypoints.empty()) return start;
  if (epoch <= waypoints.front().epoch) return waypoints.front().pos;
  for (size_t i = 1; i < waypoints.size(); ++i) {
    if (epoch <= waypoints[i].epoch) {
      const Waypoint& a = waypoints[i - 1];
      const Waypoint& b = waypoints[i];
      double span = static_cast<double>(b.epoch - a.epoch);
      double t = span <= 0 ? 1.0 : static_cast<double>(epoch - a.epoch) / span;
      return {a.pos.x + t * (b.pos.x - a.pos.x),
              a.pos.y + t * (b.pos.y - a.pos.y)};
    }
  }
  return waypoints.back().pos;
}

MeshTopology MeshTopology::grid(int rows, int cols, double spacing_m,
                                std::vector<int32_t> gateway_ids) {
  if (rows < 1 || cols < 1 || spacing_m <= 0)
    throw Error("grid dimensions and spacing must be positive");
  MeshTopology t;
  t.rows_ = rows;
  t.cols_ = cols;
  t.spacing_ = spacing_m;
  t.routers_.reserve(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Router rt;
      rt.id = r * cols + c;
      rt.pos = {c * spacing_m, r * spacing_m};
      t.routers_.push_back(rt);
    }
  }
  if (gateway_ids.empty()) throw Error("topology needs at least one gateway");
  std::sort(gateway_ids.begin(), gateway_ids.end());
  for (int32_t g : gateway_ids) {
    if (g < 0 || g >= static_cast<int32_t>(t.routers_.size()))
      throw Error("gateway id out of range: " + std::to_string(g));
    t.routers_[g].is_gateway = true;
  }
  t.gateway_ids_ = std::move(gateway_ids);

  t.grid_neighbors_.resize(t.routers_.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto& nb = t.grid_neighbors_[r * cols + c];
      if (r > 0) nb.push_back((r - 1) * cols + c);
      if (r + 1 < rows) nb.push_back((r + 1) * cols + c);
      if (c > 0) nb.push_back(r * cols + (c - 1));
      if (c + 1 < cols) nb.push_back(r * cols + (c + 1));
    }
  }
  return t;
}

const Router& MeshTopology::router(int32_t id) const {
  if (id < 0 || id >= static_cast<int32_t>(routers_.size()))
    throw Error("unknown router id: " + std::to_string(id));
  return routers_[id];
}

Router& MeshTopology::router(int32_t id) {
  if (id < 0 || id >= static_cast<int32_t>(routers_.size()))
    throw Error("unknown router id: " + std::to_string(id));
  return routers_[id];
}

void MeshTopology::add_device(Device d) {
  if (device_index_.count(d.id))
    throw Error("duplicate device id: " + std::to_string(d.id));
  device_index_[d.id] = static_cast<int>(devices_.size());
  devices_.push_back(std::move(d));
}

const Device& MeshTopology::device(int32_t id) const {
  int idx = device_index(id);
  if (idx < 0) throw Error("unknown device id: " + std::to_string(id));
  return devices_[idx];
}

int MeshTopology::device_index(int32_t id) const {
  auto it = device_index_.find(id);
  return it == device_index_.end() ? -1 : it->second;
}

const std::vector<int32_t>& MeshTopology::grid_neighbors(int32_t router_id) const {
  if (router_id < 0 || router_id >= static_cast<int32_t>(routers_.size()))
    throw Error("unknown router id: " + std::to_string(router_id));
  return grid_neighbors_[router_id];
}

std::vector<int32_t> MeshTopology::routers_in_range(
    Vec2 pos, Mode mode, const ThroughputModel& model,
    int32_t exclude_router) const {
  std::vector<int32_t> out;
  for (const Router& r : routers_) {
    if (r.id == exclude_router) continue;
    double d = distance(pos, r.pos);
    if (d <= 0) d = 1e-3;  // co-located: treat as in range
    if (model.throughput(mode, d) > 0) out.push_back(r.id);
  }
  return out;
}

const std::vector<MeshTopology::RangedNeighbor>& MeshTopology::mesh_neighborhood(
    int32_t router_id, Mode mode, const ThroughputModel& model) const {
  double cutoff = model.cutoff(mode);
  if (cached_cutoff_ != cutoff) {
    mesh_nbrs_.assign(routers_.size(), {});
    for (const Router& a : routers_) {
      for (const Router& b : routers_) {
        if (a.id == b.id) continue;
        double d = distance(a.pos, b.pos);
        if (d < cutoff) mesh_nbrs_[a.id].push_back({b.id, d});
      }
    }
    cached_cutoff_ = cutoff;
  }
  if (router_id < 0 || router_id >= static_cast<int32_t>(routers_.size()))
    throw Error("unknown router id: " + std::to_string(router_id));
  return mesh_nbrs_[router_id];
}

void MeshTopology::validate_trajectories(double max_speed_m_per_epoch) const {
  for (const Device& d : devices_) {
    for (size_t i = 1; i < d.waypoints.size(); ++i) {
      const Waypoint& a = d.waypoints[i - 1];
      const Waypoint& b = d.waypoints[i];
      if (b.epoch < a.epoch)
        throw Error("device " + std::to_string(d.id) + ": waypoints not sorted");
      double span = static_cast<double>(b.epoch - a.epoch);
      double dist = distance(a.pos, b.pos);
      if (span <= 0 && dist > 0)
        throw Error("device " + std::to_string(d.id) + ": teleporting waypoint");
      if (span > 0 && dist / span > max_speed_m_per_epoch + 1e-9)
        throw Error("device " + std::to_string(d.id) + " exceeds max speed");
    }
  }
}

}  // namespace cropmesh

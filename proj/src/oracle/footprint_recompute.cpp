#include <cmath>

#include "cropmesh/oracle.hpp"

namespace cropmesh::oracle {

// Transcribed directly from the rate-over-throughput form:
//   units(src) = units(dst) = X / T(d_hop)
//   units(bystander) = units(src) * min(1, T(d_bystander) / T(d_hop))
// summed over hops, with the 2.4GHz charges restricted to the hop's channel.
std::map<int32_t, double> recompute_footprint(const FlowPath& path,
                                              double rate_mbps,
                                              const RadioEnv& env) {
  std::map<int32_t, double> units;
  if (rate_mbps == 0.0) return units;
  const MeshTopology& topo = *env.topo;
  const ThroughputModel& model = *env.model;

  struct RawHop {
    Vec2 from;
    Vec2 to;
    Mode mode;
    int channel;
    int32_t slot_src;
    int32_t slot_dst;
    int32_t end_a, end_b;  // router ids to skip as bystanders
    int32_t end_dev;       // device index to skip
  };
  std::vector<RawHop> hops;

  if (path.device_index >= 0) {
    const Router& ap = topo.router(path.route.at(0));
    hops.push_back({path.device_pos, ap.pos, path.access_mode,
                    path.access_channel,
                    env.slots.device24(path.device_index),
                    env.slots.router24(ap.id), ap.id, -1, path.device_index});
  }
  for (size_t h = 0; h + 1 < path.route.size(); ++h) {
    const Router& a = topo.router(path.route[h]);
    const Router& b = topo.router(path.route[h + 1]);
    Mode m = h < path.mesh_modes.size() ? path.mesh_modes[h] : Mode::Ac5;
    int ch = h < path.mesh_channels.size() ? path.mesh_channels[h] : kNoChannel;
    bool five = m == Mode::Uc5 || m == Mode::Ac5;
    hops.push_back({a.pos, b.pos, m, ch,
                    five ? env.slots.router5(a.id) : env.slots.router24(a.id),
                    five ? env.slots.router5(b.id) : env.slots.router24(b.id),
                    a.id, b.id, -1});
  }

  for (const RawHop& hop : hops) {
    double d_hop = distance(hop.from, hop.to);
    if (d_hop <= 0) d_hop = 1e-3;
    double t_hop = model.throughput(hop.mode, d_hop);
    if (t_hop <= 0) throw Error("dead link in oracle recompute");
    double u = rate_mbps / t_hop;
    units[hop.slot_src] += u;
    units[hop.slot_dst] += u;

    bool five = hop.mode == Mode::Uc5 || hop.mode == Mode::Ac5;
    for (const Router& r : topo.routers()) {
      if (r.id == hop.end_a || r.id == hop.end_b) continue;
      if (!five && env.router_ch24[r.id] != hop.channel) continue;
      double d = distance(hop.from, r.pos);
      if (d <= 0) d = 1e-3;
      double t_by = model.throughput(hop.mode, d);
      if (t_by <= 0) continue;
      double delta = t_by / t_hop;
      if (delta > 1.0) delta = 1.0;
      int32_t slot = five ? env.slots.router5(r.id) : env.slots.router24(r.id);
      units[slot] += u * delta;
    }
    if (!five) {
      for (const auto& dev : env.devices) {
        if (dev.device_index == hop.end_dev) continue;
        if (dev.channel24 != hop.channel) continue;
        double d = distance(hop.from, dev.pos);
        if (d <= 0) d = 1e-3;
        double t_by = model.throughput(hop.mode, d);
        if (t_by <= 0) continue;
        double delta = t_by / t_hop;
        if (delta > 1.0) delta = 1.0;
        units[env.slots.device24(dev.device_index)] += u * delta;
      }
    }
  }
  return units;
}

}  // namespace cropmesh::oracle

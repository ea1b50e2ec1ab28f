#include "cropmesh/capacity.hpp"

#include <algorithm>
#include <cmath>

namespace cropmesh {

void ResourceFootprint::add(int32_t slot, double units) {
  if (units == 0.0) return;
  entries_.emplace_back(slot, units);
  finalized_ = false;
}

void ResourceFootprint::finalize() {
  if (finalized_) return;
  std::sort(entries_.begin(), entries_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  size_t w = 0;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (w > 0 && entries_[w - 1].first == entries_[i].first) {
      entries_[w - 1].second += entries_[i].second;
    } else {
      entries_[w++] = entries_[i];
    }
  }
  entries_.resize(w);
  finalized_ = true;
}

double ResourceFootprint::at(int32_t slot) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), slot,
      [](const auto& e, int32_t s) { return e.first < s; });
  return (it != entries_.end() && it->first == slot) ? it->second : 0.0;
}

ResourceFootprint ResourceFootprint::scaled(double factor) const {
  ResourceFootprint out;
  out.entries_ = entries_;
  for (auto& [slot, v] : out.entries_) v *= factor;
  return out;
}

double direct_units(double rate_mbps, double capacity_mbps) {
  if (rate_mbps < 0) throw Error("negative flow rate");
  if (rate_mbps == 0.0) return 0.0;
  if (capacity_mbps <= 0)
    throw Error("transmission at positive rate over a dead link");
  return rate_mbps / capacity_mbps;
}

double interference_delta(const ThroughputModel& model, Mode mode, double d_hop,
                          double d_bystander) {
  double t_by = model.throughput(mode, d_bystander);
  if (t_by <= 0) return 0.0;  // beyond cutoff, no effect
  double t_hop = model.throughput(mode, std::max(d_hop, 1e-3));
  if (t_hop <= 0) return 1.0;
  return std::min(1.0, t_by / t_hop);
}

namespace {

// Charges one hop: direct units at both endpoints, interference at every
// same-channel node in range of the sender (excluding the hop endpoints).
struct HopCharger {
  const RadioEnv& env;
  ResourceFootprint& fp;

  void charge(Vec2 sender_pos, double hop_dist, Mode mode, int channel,
              double units, int32_t src_slot, int32_t dst_slot,
              int32_t skip_router_a, int32_t skip_router_b,
              int32_t skip_device_index) {
    fp.add(src_slot, units);
    fp.add(dst_slot, units);
    const ThroughputModel& model = *env.model;
    bool band5 = band_of(mode) == Band::GHz5;
    for (const Router& r : env.topo->routers()) {
      if (r.id == skip_router_a || r.id == skip_router_b) continue;
      if (!band5 && env.router_ch24[r.id] != channel) continue;
      double d = distance(sender_pos, r.pos);
      if (d <= 0) d = 1e-3;
      double delta = interference_delta(model, mode, hop_dist, d);
      if (delta <= 0) continue;
      fp.add(band5 ? env.slots.router5(r.id) : env.slots.router24(r.id),
             units * delta);
    }
    if (!band5) {
      for (const auto& dev : env.devices) {
        if (dev.device_index == skip_device_index) continue;
        if (dev.channel24 != channel) continue;
        double d = distance(sender_pos, dev.pos);
        if (d <= 0) d = 1e-3;
        double delta = interference_delta(model, mode, hop_dist, d);
        if (delta <= 0) continue;
        fp.add(env.slots.device24(dev.device_index), units * delta);
      }
    }
  }
};

}  // namespace

ResourceFootprint flow_footprint(const FlowPath& path, double rate_mbps,
                                 const RadioEnv& env,
                                 const HopCapacityScale& scale) {
  ResourceFootprint fp;
  if (rate_mbps == 0.0) return fp;
  if (rate_mbps < 0) throw Error("negative flow rate");
  if (!env.topo || !env.model) throw Error("footprint needs a radio environment");
  const ThroughputModel& model = *env.model;
  HopCharger charger{env, fp};

  if (path.device_index >= 0) {
    if (path.route.empty()) throw Error("path has no access point");
    const Router& ap = env.topo->router(path.route.front());
    double d = distance(path.device_pos, ap.pos);
    if (d <= 0) d = 1e-3;
    double cap = model.throughput(path.access_mode, d) * scale.access;
    double u = direct_units(rate_mbps, cap);
    charger.charge(path.device_pos, d, path.access_mode, path.access_channel, u,
                   env.slots.device24(path.device_index),
                   env.slots.router24(ap.id),
                   ap.id, -1, path.device_index);
  }

  for (int h = 0; h < path.mesh_hops(); ++h) {
    const Router& a = env.topo->router(path.route[h]);
    const Router& b = env.topo->router(path.route[h + 1]);
    Mode mode = h < static_cast<int>(path.mesh_modes.size())
                    ? path.mesh_modes[h]
                    : Mode::Ac5;
    int channel = h < static_cast<int>(path.mesh_channels.size())
                      ? path.mesh_channels[h]
                      : kNoChannel;
    double d = distance(a.pos, b.pos);
    if (d <= 0) d = 1e-3;
    double cap = model.throughput(mode, d) * scale.mesh_at(h);
    double u = direct_units(rate_mbps, cap);
    bool band5 = band_of(mode) == Band::GHz5;
    charger.charge(a.pos, d, mode, channel, u,
                   band5 ? env.slots.router5(a.id) : env.slots.router24(a.id),
                   band5 ? env.slots.router5(b.id) : env.slots.router24(b.id),
                   a.id, b.id, -1);
  }

  fp.finalize();
  return fp;
}

void ContentionLedger::add(int64_t flow_id, ResourceFootprint fp) {
  fp.finalize();
  auto [it, inserted] = flows_.emplace(flow_id, std::move(fp));
  if (!inserted) throw Error("flow already in ledger: " + std::to_string(flow_id));
  for (const auto& [slot, v] : it->second.entries()) committed_[slot] += v;
}

void ContentionLedger::remove(int64_t flow_id) {
  if (flows_.erase(flow_id) == 0)
    throw Error("flow not in ledger: " + std::to_string(flow_id));
  recompute();
}

void ContentionLedger::recompute() {
  std::fill(committed_.begin(), committed_.end(), 0.0);
  for (const auto& [id, fp] : flows_)
    for (const auto& [slot, v] : fp.entries()) committed_[slot] += v;
}

std::vector<ContentionLedger::Overcommit> ContentionLedger::check(
    double headroom) const {
  std::vector<Overcommit> out;
  double limit = 1.0 - headroom + 1e-9;
  for (int32_t s = 0; s < static_cast<int32_t>(committed_.size()); ++s)
    if (committed_[s] > limit) out.push_back({s, committed_[s]});
  return out;
}

std::string slot_node_name(const SlotSpace& slots, const MeshTopology& topo,
                           int32_t slot) {
  if (slots.is_router(slot)) return "r" + std::to_string(slots.owner(slot));
  return "d" + std::to_string(topo.devices()[slots.owner(slot)].id);
}

std::string slot_band_name(const SlotSpace& slots, int32_t slot) {
  return slots.band(slot) == Band::GHz5 ? "5" : "24";
}

}  // namespace cropmesh

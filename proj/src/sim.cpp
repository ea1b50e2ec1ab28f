#include "cropmesh/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "cropmesh/rng.hpp"
#include "json.hpp"

namespace cropmesh {

namespace {

double quantile(std::vector<double> v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  size_t i = std::min(v.size() - 1,
                      static_cast<size_t>(p * static_cast<double>(v.size())));
  return v[i];
}

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

std::string SimReport::report_csv() const {
  std::string out = "flow_id,epoch,assigned_mbps,delivered_mbps\n";
  for (const auto& r : records) {
    out += std::to_string(r.flow) + "," + std::to_string(r.epoch) + "," +
           fmt(r.assigned_mbps) + "," + fmt(r.delivered_mbps) + "\n";
  }
  return out;
}

std::string SimReport::summary_json() const {
  nlohmann::ordered_json j;
  j["total_mb"] = total_mb;
  j["realtime_mb"] = realtime_mb;
  j["collection_mb"] = collection_mb;
  j["violations"] = violations;
  j["realtime_flows"] = realtime_flows;
  j["completed_realtime"] = completed_realtime;
  j["normalized_throughput"] = {{"mean", norm_mean}, {"p10", norm_p10},
                                {"p25", norm_p25},   {"p50", norm_p50},
                                {"p75", norm_p75},   {"p90", norm_p90}};
  auto& fl = j["flows"] = nlohmann::ordered_json::array();
  for (const auto& f : flows) {
    fl.push_back({{"flow", f.flow},
                  {"kind", task_kind_name(f.kind)},
                  {"delivered_mb", f.delivered_mb},
                  {"active_epochs", f.active_epochs},
                  {"normalized_throughput", f.normalized_throughput},
                  {"waiting_epochs", f.waiting_epochs},
                  {"completed", f.completed},
                  {"violated", f.violated}});
  }
  return j.dump(2) + "\n";
}

SimReport run(const Scenario& scenario, Planner& planner,
              const ThroughputModel& model, const SimParams& sim,
              const TeParams& te, const RunHooks& hooks) {
  const MeshTopology& topo = scenario.topo;
  const auto& tasks = scenario.tasks;
  std::vector<FlowRuntime> flows(tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i)
    flows[i].state = FlowState::initial(tasks[i]);

  std::map<int64_t, int> task_index;
  for (size_t i = 0; i < tasks.size(); ++i)
    task_index[tasks[i].id] = static_cast<int>(i);

  VariationModel var;
  var.seed = sim.seed;
  var.spatial_stddev = sim.spatial_stddev;
  var.temporal_stddev = sim.temporal_stddev;
  double penalty_keep = 1.0 - sim.channel_switch_penalty_s / sim.epoch_length_s;

  SlotSpace slots(topo);
  std::vector<int> last_ch(topo.routers().size(), kNoChannel);
  TePlan plan;
  SimReport report;

  for (int64_t epoch = 0; epoch < sim.horizon; ++epoch) {
    // Deadline sweep: flows that can no longer finish stop consuming.
    for (size_t i = 0; i < tasks.size(); ++i) {
      const TaskSpec& t = tasks[i];
      FlowRuntime& f = flows[i];
      FlowStatus st = f.state.status;
      if (st == FlowStatus::Done || st == FlowStatus::Expired) continue;
      bool late = t.kind == TaskKind::RealTime
                      ? epoch + f.state.remaining_duration > t.deadline_epoch
                      : epoch >= t.deadline_epoch && f.state.remaining_mb > 1e-9;
      if (late) f.state.status = FlowStatus::Expired;
    }

    if (plan.row(epoch) == nullptr || epoch % te.invocation_period == 0) {
      WorldView w;
      w.topo = &topo;
      w.model = &model;
      w.tasks = &tasks;
      w.flows = &flows;
      w.te = te;
      w.now = epoch;
      w.horizon = sim.horizon;
      w.seed = sim.seed;
      w.epoch_length_s = sim.epoch_length_s;
      plan = planner.plan(w);
      if (hooks.on_plan) hooks.on_plan(plan, w);
    }
    const EpochPlan* row = plan.row(epoch);
    if (row == nullptr) throw Error("plan does not cover epoch");

    // Effective channel map: fresh commitments override, idle routers park on
    // their last channel. A changed commitment is a switch.
    std::vector<int> eff_ch(topo.routers().size());
    std::vector<bool> switching(topo.routers().size(), false);
    for (size_t r = 0; r < eff_ch.size(); ++r) {
      int want = row->router_ch24[r];
      if (want != kNoChannel) {
        if (last_ch[r] != kNoChannel && last_ch[r] != want) switching[r] = true;
        last_ch[r] = want;
      }
      eff_ch[r] = last_ch[r];
    }

    // Active set for this epoch.
    struct Active {
      int idx;
      const FlowKnobs* knob;
      FlowPath path;
      bool device_switched = false;
    };
    std::vector<Active> active;
    RadioEnv env(topo, model);
    env.router_ch24 = eff_ch;
    for (const FlowKnobs& k : row->flows) {
      auto it = task_index.find(k.flow);
      if (it == task_index.end()) throw Error("plan names an unknown flow");
      int idx = it->second;
      const TaskSpec& t = tasks[idx];
      FlowRuntime& f = flows[idx];
      FlowStatus st = f.state.status;
      if (st == FlowStatus::Done || st == FlowStatus::Expired) continue;
      if (k.paused) {
        f.state.status = FlowStatus::Paused;
        continue;
      }
      if (t.kind == TaskKind::DataCollection && f.state.remaining_mb <= 1e-9)
        continue;

      Active a;
      a.idx = idx;
      a.knob = &k;
      a.path.device_index = topo.device_index(t.device_id);
      const Device& dev = topo.devices()[a.path.device_index];
      a.path.device_pos = dev.position_at(epoch);
      a.path.access_mode = dev.above_canopy ? Mode::Ac24 : Mode::Uc24;
      a.path.access_channel = k.channel;
      a.path.route = k.route;
      if (f.device_channel != kNoChannel && f.device_channel != k.channel)
        a.device_switched = true;
      f.device_channel = k.channel;
      f.current_ap = k.ap;
      if (f.state.status != FlowStatus::Active) {
        f.state.status = FlowStatus::Active;
        if (f.first_active < 0) f.first_active = epoch;
      }
      f.sticky_channel = k.channel;
      f.state.last_rate_mbps = k.rate_mbps;
      env.devices.push_back({a.path.device_index, a.path.device_pos, k.channel});
      active.push_back(std::move(a));
    }

    // Delivered rates: natural spectrum arbitration over the one-unit
    // budgets (equal unit shares at saturated devices), with this epoch's
    // variation multipliers scaling each hop's capacity. Enforced plans sit
    // below their caps, so for them delivered equals assigned.
    RateProblem prob;
    prob.budget = 1.0;
    prob.base.assign(slots.count(), 0.0);
    for (const Active& a : active) {
      const TaskSpec& t = tasks[a.idx];
      HopCapacityScale scale;
      if (sim.spatial_stddev > 0)
        scale.access = var.spatial_multiplier(t.device_id, epoch);
      int hops = a.path.mesh_hops();
      if (sim.temporal_stddev > 0 && hops > 0) {
        scale.mesh.resize(hops);
        for (int h = 0; h < hops; ++h)
          scale.mesh[h] = var.temporal_multiplier(a.path.route[h], epoch);
      }
      RateProblem::FlowVars v;
      ResourceFootprint fp = flow_footprint(a.path, 1.0, env, scale);
      for (const auto& [slot, u] : fp.entries()) v.coef.push_back({slot, u});
      v.cap = a.knob->rate_mbps;
      prob.flows.push_back(std::move(v));
    }
    std::vector<double> delivered = natural_rates(prob);

    std::vector<double> load;
    if (hooks.on_epoch_load) load.assign(slots.count(), 0.0);

    for (size_t k = 0; k < active.size(); ++k) {
      const Active& a = active[k];
      const TaskSpec& t = tasks[a.idx];
      FlowRuntime& f = flows[a.idx];
      double got = delivered[k];

      bool hit = a.device_switched;
      for (int32_t r : a.path.route)
        if (switching[r]) { hit = true; break; }
      if (hit) got *= penalty_keep;

      if (hooks.on_epoch_load) {
        for (const auto& c : prob.flows[k].coef) load[c.slot] += got * c.per_mbps;
      }

      report.records.push_back({t.id, epoch, a.knob->rate_mbps, got});

      double mb = got * sim.epoch_length_s / 8.0;
      if (t.kind == TaskKind::RealTime) {
        f.state.remaining_duration -= 1;
        f.active_epochs += 1;
        f.norm_sum += t.demand_mbps > 0 ? got / t.demand_mbps : 0.0;
        f.delivered_mb += mb;
        if (f.state.remaining_duration <= 0) f.state.status = FlowStatus::Done;
      } else {
        mb = std::min(mb, f.state.remaining_mb);
        f.active_epochs += 1;
        f.delivered_mb += mb;
        f.state.remaining_mb -= mb;
        if (f.state.remaining_mb <= 1e-9) {
          f.state.remaining_mb = 0;
          f.state.status = FlowStatus::Done;
        }
      }
    }
    if (hooks.on_epoch_load) hooks.on_epoch_load(epoch, load, slots);
  }

  // Roll up.
  std::vector<double> norms;
  for (size_t i = 0; i < tasks.size(); ++i) {
    const TaskSpec& t = tasks[i];
    FlowRuntime& f = flows[i];
    FlowSummary s;
    s.flow = t.id;
    s.kind = t.kind;
    s.demand_mbps = t.demand_mbps;
    s.delivered_mb = f.delivered_mb;
    s.active_epochs = f.active_epochs;
    s.completed = f.state.status == FlowStatus::Done;
    s.violated = f.state.status == FlowStatus::Expired ||
                 (t.kind == TaskKind::RealTime && !s.completed &&
                  t.deadline_epoch <= sim.horizon);
    s.waiting_epochs = f.first_active < 0 ? -1 : f.first_active - t.request_epoch;
    if (t.kind == TaskKind::RealTime) {
      s.normalized_throughput =
          f.active_epochs > 0 ? f.norm_sum / static_cast<double>(f.active_epochs)
                              : 0.0;
      norms.push_back(s.normalized_throughput);
      report.realtime_mb += f.delivered_mb;
      report.realtime_flows += 1;
      if (s.completed) report.completed_realtime += 1;
    } else {
      report.collection_mb += f.delivered_mb;
    }
    if (s.violated) report.violations += 1;
    report.flows.push_back(s);
  }
  report.total_mb = report.realtime_mb + report.collection_mb;
  if (!norms.empty()) {
    double sum = 0;
    for (double n : norms) sum += n;
    report.norm_mean = sum / static_cast<double>(norms.size());
    report.norm_p10 = quantile(norms, 0.10);
    report.norm_p25 = quantile(norms, 0.25);
    report.norm_p50 = quantile(norms, 0.50);
    report.norm_p75 = quantile(norms, 0.75);
    report.norm_p90 = quantile(norms, 0.90);
  }
  return report;
}

double chain_throughput(int n_hops, double spacing_m,
                        const ThroughputModel& model) {
  if (n_hops < 1) throw Error("chain needs at least one hop");
  MeshTopology line =
      MeshTopology::grid(1, n_hops + 1, spacing_m, {n_hops});
  RadioEnv env(line, model);
  FlowPath path;
  for (int32_t i = 0; i <= n_hops; ++i) path.route.push_back(i);
  ResourceFootprint fp = flow_footprint(path, 1.0, env);
  double worst = 0;
  for (const auto& [slot, u] : fp.entries()) worst = std::max(worst, u);
  if (worst <= 0) throw Error("chain has no load");
  return 1.0 / worst;
}

}  // namespace cropmesh

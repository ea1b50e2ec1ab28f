#include <algorithm>
#include <cmath>
#include <map>

#include "cropmesh/oracle.hpp"
#include "cropmesh/rng.hpp"

namespace cropmesh::oracle {

namespace {

constexpr int32_t kTinyDeviceBase = 1000;

// All simple 4-neighbor paths from `ap` to any gateway. Grids here are at
// most 2x3, so full enumeration stays tiny.
void enumerate_paths(const MeshTopology& topo, int32_t at,
                     std::vector<int32_t>& cur, std::vector<bool>& used,
                     std::vector<std::vector<int32_t>>& out) {
  if (topo.router(at).is_gateway) out.push_back(cur);
  for (int32_t nb : topo.grid_neighbors(at)) {
    if (used[nb]) continue;
    used[nb] = true;
    cur.push_back(nb);
    enumerate_paths(topo, nb, cur, used, out);
    cur.pop_back();
    used[nb] = false;
  }
}

struct Structure {
  int64_t start;
  int32_t ap;
  int channel;
  int route_idx;
};

// Exact max of sum(r) over { A r <= 1, 0 <= r <= cap } by vertex enumeration;
// n is at most 3.
double lp_max_sum(const std::vector<std::vector<double>>& rows,
                  const std::vector<double>& caps) {
  int n = static_cast<int>(caps.size());
  // Drop dominated rows (all budgets are 1).
  std::vector<std::vector<double>> filt;
  for (const auto& r : rows) {
    bool dominated = false;
    for (const auto& o : rows) {
      if (&o == &r) continue;
      bool geq = true, strict = false;
      for (int k = 0; k < n; ++k) {
        if (o[k] < r[k] - 1e-15) { geq = false; break; }
        if (o[k] > r[k] + 1e-15) strict = true;
      }
      if (geq && strict) { dominated = true; break; }
    }
    if (!dominated) {
      bool dup = false;
      for (const auto& f : filt) {
        bool same = true;
        for (int k = 0; k < n; ++k)
          if (std::abs(f[k] - r[k]) > 1e-15) { same = false; break; }
        if (same) { dup = true; break; }
      }
      if (!dup) filt.push_back(r);
    }
  }

  struct Con {
    std::vector<double> a;
    double b;
  };
  std::vector<Con> cons;
  for (const auto& r : filt) cons.push_back({r, 1.0});
  for (int f = 0; f < n; ++f) {
    std::vector<double> e(n, 0.0);
    e[f] = 1.0;
    cons.push_back({e, caps[f]});
    std::vector<double> e2(n, 0.0);
    e2[f] = -1.0;
    cons.push_back({e2, 0.0});
  }

  int m = static_cast<int>(cons.size());
  std::vector<int> pick(n);
  double best = 0.0;

  std::vector<std::vector<double>> M(n, std::vector<double>(n + 1));
  auto try_vertex = [&]() {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) M[i][k] = cons[pick[i]].a[k];
      M[i][n] = cons[pick[i]].b;
    }
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < n; ++col) {
      int piv = col;
      for (int r = col + 1; r < n; ++r)
        if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
      if (std::abs(M[piv][col]) < 1e-10) return;  // singular pick
      std::swap(M[col], M[piv]);
      for (int r = 0; r < n; ++r) {
        if (r == col) continue;
        double f = M[r][col] / M[col][col];
        if (f == 0) continue;
        for (int k = col; k <= n; ++k) M[r][k] -= f * M[col][k];
      }
    }
    double sum = 0;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) {
      x[i] = M[i][n] / M[i][i];
      sum += x[i];
    }
    if (sum <= best) return;
    for (const Con& c : cons) {
      double lhs = 0;
      for (int k = 0; k < n; ++k) lhs += c.a[k] * x[k];
      if (lhs > c.b + 1e-9) return;
    }
    best = sum;
  };

  // Choose n constraints to make tight.
  if (n == 1) {
    for (pick[0] = 0; pick[0] < m; ++pick[0]) try_vertex();
  } else if (n == 2) {
    for (pick[0] = 0; pick[0] < m; ++pick[0])
      for (pick[1] = pick[0] + 1; pick[1] < m; ++pick[1]) try_vertex();
  } else {
    for (pick[0] = 0; pick[0] < m; ++pick[0])
      for (pick[1] = pick[0] + 1; pick[1] < m; ++pick[1])
        for (pick[2] = pick[1] + 1; pick[2] < m; ++pick[2]) try_vertex();
  }
  return best;
}

}  // namespace

TinyInstance make_tiny_instance(uint64_t seed) {
  SplitMix rng(hash_key(seed, 0x71b9));
  TinyInstance inst;
  inst.seed = seed;

  int shape = static_cast<int>(rng.below(4));
  int rows = shape == 0 || shape == 2 ? 1 : 2;
  int cols = shape == 2 ? 2 : 3;
  if (shape == 0) cols = 2;
  double spacing = rng.uniform(60.0, 110.0);
  inst.scn.topo = MeshTopology::grid(rows, cols, spacing, {0});
  inst.scn.horizon = 5;

  int n_flows = shape == 0 ? 1 + static_cast<int>(rng.below(3))
                           : 1 + static_cast<int>(rng.below(2));
  for (int i = 0; i < n_flows; ++i) {
    const auto& routers = inst.scn.topo.routers();
    const Router& home = routers[rng.below(routers.size())];
    double ang = rng.uniform(0.0, 6.283185307179586);
    double rad = rng.uniform(5.0, 30.0);
    Device d;
    d.id = kTinyDeviceBase + i;
    d.start = {home.pos.x + rad * std::cos(ang),
               home.pos.y + rad * std::sin(ang)};
    inst.scn.topo.add_device(d);

    TaskSpec t;
    t.id = i;
    t.kind = TaskKind::RealTime;
    t.device_id = d.id;
    t.demand_mbps = rng.uniform(2.0, 10.0);
    t.duration_epochs = 1 + static_cast<int>(rng.below(3));  // 1..3
    t.request_epoch = static_cast<int64_t>(rng.below(3));    // 0..2
    int64_t slack = static_cast<int64_t>(rng.below(3));      // 0..2
    t.deadline_epoch =
        std::min<int64_t>(inst.scn.horizon,
                          t.request_epoch + t.duration_epochs + slack);
    t.preemptible = false;
    inst.scn.tasks.push_back(t);
  }
  return inst;
}

OracleResult brute_force_optimal(const TinyInstance& inst,
                                 const ThroughputModel& model,
                                 double epoch_length_s, uint64_t budget) {
  const Scenario& scn = inst.scn;
  const MeshTopology& topo = scn.topo;
  int nf = static_cast<int>(scn.tasks.size());
  int64_t horizon = scn.horizon;

  // Route catalogs per AP.
  std::map<int32_t, std::vector<std::vector<int32_t>>> routes_from;
  for (const Router& r : topo.routers()) {
    std::vector<std::vector<int32_t>> out;
    std::vector<int32_t> cur = {r.id};
    std::vector<bool> used(topo.routers().size(), false);
    used[r.id] = true;
    enumerate_paths(topo, r.id, cur, used, out);
    std::sort(out.begin(), out.end());
    routes_from[r.id] = std::move(out);
  }

  // Structure catalogs per flow.
  std::vector<std::vector<Structure>> cat(nf);
  uint64_t combos = 1;
  for (int f = 0; f < nf; ++f) {
    const TaskSpec& t = scn.tasks[f];
    const Device& dev = topo.device(t.device_id);
    auto aps = topo.routers_in_range(dev.start, Mode::Uc24, model);
    if (aps.empty()) throw Error("tiny instance device out of range");
    int64_t last_start =
        std::min(t.deadline_epoch - t.duration_epochs, horizon - 1);
    for (int64_t s = t.request_epoch; s <= last_start; ++s)
      for (int32_t ap : aps)
        for (int ch : kChannels24)
          for (int ri = 0; ri < static_cast<int>(routes_from[ap].size()); ++ri)
            cat[f].push_back({s, ap, ch, ri});
    if (cat[f].empty()) cat[f].push_back({-1, -1, 0, -1});  // cannot run
    combos *= cat[f].size();
    if (combos * static_cast<uint64_t>(horizon) > budget)
      throw Error("tiny instance search bound exceeded");
  }

  std::map<std::vector<int>, double> lp_memo;

  std::vector<int> pick(nf, 0);
  OracleResult best;
  best.objective_mb = -1;
  std::vector<int> active;

  auto evaluate = [&]() {
    // Reject channel-inconsistent APs.
    for (int a = 0; a < nf; ++a) {
      const Structure& sa = cat[a][pick[a]];
      if (sa.ap < 0) continue;
      for (int b = a + 1; b < nf; ++b) {
        const Structure& sb = cat[b][pick[b]];
        if (sb.ap == sa.ap && sb.ap >= 0 && sb.channel != sa.channel) return;
      }
    }
    double total_mbps_epochs = 0;
    for (int64_t e = 0; e < horizon; ++e) {
      active.clear();
      for (int f = 0; f < nf; ++f) {
        const Structure& s = cat[f][pick[f]];
        if (s.ap < 0) continue;
        if (e >= s.start && e < s.start + scn.tasks[f].duration_epochs)
          active.push_back(f);
      }
      if (active.empty()) continue;
      std::vector<int> key;
      for (int f : active) {
        key.push_back(f);
        key.push_back(pick[f]);
      }
      auto mit = lp_memo.find(key);
      double val;
      if (mit != lp_memo.end()) {
        val = mit->second;
      } else {
        // The same radio environment the spectrum model would see with
        // exactly these flows up: every active AP channel and device counts.
        int n = static_cast<int>(active.size());
        RadioEnv env(topo, model);
        for (int f : active) {
          const Structure& s = cat[f][pick[f]];
          env.router_ch24[s.ap] = s.channel;
          env.devices.push_back(
              {topo.device_index(scn.tasks[f].device_id),
               topo.device(scn.tasks[f].device_id).start, s.channel});
        }
        std::map<int32_t, std::vector<double>> row_map;
        for (int k = 0; k < n; ++k) {
          int f = active[k];
          const Structure& s = cat[f][pick[f]];
          FlowPath path;
          path.device_index = topo.device_index(scn.tasks[f].device_id);
          path.device_pos = topo.device(scn.tasks[f].device_id).start;
          path.access_channel = s.channel;
          path.route = routes_from[s.ap][s.route_idx];
          ResourceFootprint fp = flow_footprint(path, 1.0, env);
          for (const auto& [slot, u] : fp.entries()) {
            auto& row = row_map[slot];
            row.resize(n, 0.0);
            row[k] += u;
          }
        }
        std::vector<std::vector<double>> rows;
        for (auto& [slot, row] : row_map) {
          row.resize(n, 0.0);
          rows.push_back(row);
        }
        std::vector<double> caps;
        for (int f : active) caps.push_back(scn.tasks[f].demand_mbps);
        val = lp_max_sum(rows, caps);
        lp_memo.emplace(std::move(key), val);
      }
      total_mbps_epochs += val;
    }
    double mb = total_mbps_epochs * epoch_length_s / 8.0;
    if (mb > best.objective_mb + 1e-9) {
      best.objective_mb = mb;
      best.plan.clear();
      for (int f = 0; f < nf; ++f) {
        const Structure& s = cat[f][pick[f]];
        OracleFlowPlan p;
        p.flow = scn.tasks[f].id;
        p.start = s.start;
        p.ap = s.ap;
        p.channel = s.channel;
        if (s.ap >= 0) p.route = routes_from[s.ap][s.route_idx];
        best.plan.push_back(p);
      }
    }
  };

  // Odometer over structure combos, lexicographic; first optimum sticks.
  while (true) {
    evaluate();
    ++best.structures_tried;
    int f = nf - 1;
    while (f >= 0) {
      if (++pick[f] < static_cast<int>(cat[f].size())) break;
      pick[f] = 0;
      --f;
    }
    if (f < 0) break;
  }
  if (best.objective_mb < 0) best.objective_mb = 0;
  return best;
}

}  // namespace cropmesh::oracle

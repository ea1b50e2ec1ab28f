#include "cropmesh/te.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "cropmesh/rng.hpp"

namespace cropmesh {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieEps = 1e-12;
}  // namespace

const FlowKnobs* EpochPlan::find(int64_t flow) const {
  auto it = std::lower_bound(
      flows.begin(), flows.end(), flow,
      [](const FlowKnobs& k, int64_t f) { return k.flow < f; });
  return (it != flows.end() && it->flow == flow) ? &*it : nullptr;
}

const EpochPlan* TePlan::row(int64_t epoch) const {
  int64_t off = epoch - start;
  if (off < 0 || off >= static_cast<int64_t>(rows.size())) return nullptr;
  return &rows[off];
}

std::vector<double> maxmin_rates(const RateProblem& p) {
  size_t nf = p.flows.size();
  std::vector<double> rates(nf, 0.0);
  if (nf == 0) return rates;
  std::vector<bool> frozen(nf, false);
  std::vector<double> load = p.base;
  int32_t max_slot = -1;
  for (const auto& f : p.flows)
    for (const auto& c : f.coef) max_slot = std::max(max_slot, c.slot);
  if (static_cast<int32_t>(load.size()) <= max_slot) load.resize(max_slot + 1, 0.0);

  size_t left = nf;
  while (left > 0) {
    // Largest uniform increment all unfrozen flows can take together.
    std::vector<double> denom(load.size(), 0.0);
    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      for (const auto& c : p.flows[f].coef) denom[c.slot] += c.per_mbps;
    }
    double inc = kInf;
    for (size_t s = 0; s < load.size(); ++s) {
      if (denom[s] <= 0) continue;
      inc = std::min(inc, std::max(0.0, p.budget - load[s]) / denom[s]);
    }
    for (size_t f = 0; f < nf; ++f)
      if (!frozen[f]) inc = std::min(inc, p.flows[f].cap - rates[f]);
    if (inc < 0) inc = 0;

    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      rates[f] += inc;
      for (const auto& c : p.flows[f].coef) load[c.slot] += inc * c.per_mbps;
    }

    size_t froze = 0;
    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      bool stop = rates[f] >= p.flows[f].cap - 1e-12;
      if (!stop) {
        for (const auto& c : p.flows[f].coef) {
          if (c.per_mbps > 0 && load[c.slot] >= p.budget - 1e-12) {
            stop = true;
            break;
          }
        }
      }
      if (stop) {
        frozen[f] = true;
        ++froze;
        --left;
      }
    }
    if (froze == 0) {  // numerical stall; pin everything where it is
      for (size_t f = 0; f < nf; ++f) frozen[f] = true;
      left = 0;
    }
  }
  for (size_t f = 0; f < nf; ++f) rates[f] = std::min(rates[f], p.flows[f].cap);
  return rates;
}

std::vector<double> natural_rates(const RateProblem& p) {
  size_t nf = p.flows.size();
  std::vector<double> rates(nf, 0.0);
  if (nf == 0) return rates;
  std::vector<bool> frozen(nf, false);
  std::vector<double> load = p.base;
  int32_t max_slot = -1;
  for (const auto& f : p.flows)
    for (const auto& c : f.coef) max_slot = std::max(max_slot, c.slot);
  if (static_cast<int32_t>(load.size()) <= max_slot) load.resize(max_slot + 1, 0.0);

  // A flow's unit share grows uniformly; its rate grows inversely to the
  // channel share it needs at its own tightest resource.
  std::vector<double> speed(nf, 0.0);
  for (size_t f = 0; f < nf; ++f) {
    double worst = 0;
    for (const auto& c : p.flows[f].coef) worst = std::max(worst, c.per_mbps);
    speed[f] = worst > 0 ? 1.0 / worst : 0.0;
  }

  size_t left = nf;
  while (left > 0) {
    std::vector<double> denom(load.size(), 0.0);
    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      for (const auto& c : p.flows[f].coef)
        denom[c.slot] += c.per_mbps * speed[f];
    }
    double inc = kInf;  // in units at each flow's reference resource
    for (size_t s = 0; s < load.size(); ++s) {
      if (denom[s] <= 0) continue;
      inc = std::min(inc, std::max(0.0, p.budget - load[s]) / denom[s]);
    }
    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      if (speed[f] <= 0) { inc = 0; continue; }
      inc = std::min(inc, (p.flows[f].cap - rates[f]) / speed[f]);
    }
    if (inc < 0) inc = 0;

    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      rates[f] += inc * speed[f];
      for (const auto& c : p.flows[f].coef)
        load[c.slot] += inc * speed[f] * c.per_mbps;
    }

    size_t froze = 0;
    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      bool stop = speed[f] <= 0 || rates[f] >= p.flows[f].cap - 1e-12;
      if (!stop) {
        for (const auto& c : p.flows[f].coef) {
          if (c.per_mbps > 0 && load[c.slot] >= p.budget - 1e-12) {
            stop = true;
            break;
          }
        }
      }
      if (stop) {
        frozen[f] = true;
        ++froze;
        --left;
      }
    }
    if (froze == 0) {
      for (size_t f = 0; f < nf; ++f) frozen[f] = true;
      left = 0;
    }
  }
  for (size_t f = 0; f < nf; ++f) rates[f] = std::min(rates[f], p.flows[f].cap);
  return rates;
}

// Contention a (router, channel) pair would see from the given 2.4GHz hops:
// direct units when the router is a hop endpoint, interference otherwise.
static double contention24(int32_t router, int channel,
                           const std::vector<Hop24>& sources,
                           const MeshTopology& topo,
                           const ThroughputModel& model) {
  double total = 0;
  const Vec2 pos = topo.router(router).pos;
  for (const Hop24& s : sources) {
    if (s.channel != channel) continue;
    if (s.router_a == router || s.router_b == router) {
      total += s.units;
      continue;
    }
    double d = distance(s.sender, pos);
    if (d <= 0) d = 1e-3;
    total += s.units * interference_delta(model, s.mode, s.hop_dist, d);
  }
  return total;
}

double f_ap_score(Vec2 sender_pos, double demand_mbps, int32_t ap, int channel,
                  Mode access_mode, const std::vector<Hop24>& sources,
                  const std::vector<int>& router_ch24, const MeshTopology& topo,
                  const ThroughputModel& model) {
  double d_ap = distance(sender_pos, topo.router(ap).pos);
  if (d_ap <= 0) d_ap = 1e-3;
  double t_ap = model.throughput(access_mode, d_ap);
  if (t_ap <= 0) return kInf;
  double r_f_ap = demand_mbps / t_ap;

  double score = r_f_ap + contention24(ap, channel, sources, topo, model);
  for (const Router& rj : topo.routers()) {
    if (rj.id == ap) continue;
    if (router_ch24[rj.id] != channel) continue;  // unassigned never matches
    double d = distance(sender_pos, rj.pos);
    if (d <= 0) d = 1e-3;
    if (model.throughput(access_mode, d) <= 0) continue;  // out of sender range
    double r_f_rj = r_f_ap * interference_delta(model, access_mode, d_ap, d);
    score += r_f_rj + contention24(rj.id, channel, sources, topo, model);
  }
  return score;
}

std::optional<ApChoice> select_access_point(
    Vec2 sender_pos, double demand_mbps, Mode access_mode, int sticky,
    const std::vector<Hop24>& sources, const std::vector<int>& router_ch24,
    const MeshTopology& topo, const ThroughputModel& model) {
  auto in_range = topo.routers_in_range(sender_pos, access_mode, model);
  ApChoice best;
  best.score = kInf;
  double best_dist = kInf;
  bool have = false;
  for (int pass = 0; pass < 2 && !have; ++pass) {
    int pin = pass == 0 ? sticky : kNoChannel;
    for (int32_t ap : in_range) {
      int committed = router_ch24[ap];
      std::vector<int> chans;
      if (committed != kNoChannel) {
        if (pin == kNoChannel || pin == committed) chans.push_back(committed);
      } else if (pin != kNoChannel) {
        chans.push_back(pin);
      } else {
        chans.assign(std::begin(kChannels24), std::end(kChannels24));
      }
      for (int ch : chans) {
        double d = distance(sender_pos, topo.router(ap).pos);
        if (d <= 0) d = 1e-3;
        double score = f_ap_score(sender_pos, demand_mbps, ap, ch, access_mode,
                                  sources, router_ch24, topo, model);
        if (score >= kInf) continue;
        bool better = score < best.score - kTieEps;
        if (!better && std::abs(score - best.score) <= kTieEps) {
          better = d < best_dist - kTieEps ||
                   (std::abs(d - best_dist) <= kTieEps &&
                    (ap < best.ap || (ap == best.ap && ch < best.channel)));
        }
        if (better) {
          best = {ap, ch, score};
          best_dist = d;
          have = true;
        }
      }
    }
    if (sticky == kNoChannel) break;
  }
  if (!have) return std::nullopt;
  return best;
}

double route_node_weight(int32_t router, double desired_mbps,
                         const std::vector<double>& committed5,
                         const MeshTopology& topo,
                         const ThroughputModel& model) {
  double t_adj = model.throughput(Mode::Ac5, topo.spacing());
  if (t_adj <= 0) return kInf;
  double u = desired_mbps / t_adj;
  double w = std::max(0.0, committed5[router] + 2.0 * u - 1.0);
  for (const auto& nb : topo.mesh_neighborhood(router, Mode::Ac5, model)) {
    double delta = interference_delta(model, Mode::Ac5, topo.spacing(), nb.dist);
    w += std::max(0.0, committed5[nb.id] + u * delta - 1.0);
  }
  return w;
}

double route_path_cost(const std::vector<int32_t>& path, double desired_mbps,
                       const std::vector<double>& committed5,
                       const MeshTopology& topo, const ThroughputModel& model,
                       double hop_epsilon) {
  double cost = 0;
  for (size_t i = 1; i < path.size(); ++i)
    cost += route_node_weight(path[i], desired_mbps, committed5, topo, model) +
            hop_epsilon;
  return cost;
}

// Uniformly random minimum-hop monotone path from `ap` to the hop-nearest
// gateway (seeded); gateways tie-break by the same key.
static std::vector<int32_t> uniform_staircase(int32_t ap,
                                              const MeshTopology& topo,
                                              uint64_t key) {
  int cols = topo.cols();
  int r0 = ap / cols, c0 = ap % cols;
  int32_t best_gw = -1;
  int best_hops = std::numeric_limits<int>::max();
  std::vector<int32_t> ties;
  for (int32_t g : topo.gateways()) {
    int hops = r0 + std::abs(c0 - g % cols);
    if (hops < best_hops) {
      best_hops = hops;
      ties = {g};
    } else if (hops == best_hops) {
      ties.push_back(g);
    }
  }
  SplitMix rng(hash_key(key, 0x57a2));
  best_gw = ties.size() > 1 ? ties[rng.below(ties.size())] : ties.front();
  int gc = best_gw % cols;
  std::vector<int> moves;
  for (int i = 0; i < r0; ++i) moves.push_back(0);
  for (int i = 0; i < std::abs(c0 - gc); ++i) moves.push_back(1);
  rng.shuffle(moves);
  int side = c0 < gc ? 1 : -1;
  std::vector<int32_t> path = {ap};
  int r = r0, c = c0;
  for (int m : moves) {
    if (m == 0) --r; else c += side;
    path.push_back(r * cols + c);
  }
  return path;
}

std::vector<int32_t> weighted_route_search(int32_t ap, double desired_mbps,
                                           const std::vector<double>& committed5,
                                           const MeshTopology& topo,
                                           const ThroughputModel& model,
                                           double hop_epsilon,
                                           uint64_t tie_key) {
  size_t nr = topo.routers().size();
  std::vector<double> wcache(nr, -1.0);
  auto weight = [&](int32_t r) {
    if (wcache[r] < 0)
      wcache[r] = route_node_weight(r, desired_mbps, committed5, topo, model);
    return wcache[r];
  };
  // With no contention anywhere every min-hop path costs the same; sample
  // one uniformly instead of walking a biased tie chain.
  bool all_zero = true;
  for (size_t r = 0; r < nr && all_zero; ++r) all_zero = weight(r) <= 0.0;
  if (all_zero) return uniform_staircase(ap, topo, tie_key);

  std::vector<double> cost(nr, kInf);
  std::vector<int32_t> parent(nr, -1);
  using Item = std::pair<double, int32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  cost[ap] = 0;
  heap.push({0, ap});
  while (!heap.empty()) {
    auto [c, u] = heap.top();
    heap.pop();
    if (c > cost[u] + kTieEps) continue;
    for (int32_t v : topo.grid_neighbors(u)) {
      double c2 = cost[u] + weight(v) + hop_epsilon;
      if (c2 < cost[v] - kTieEps) {
        cost[v] = c2;
        parent[v] = u;
        heap.push({c2, v});
      } else if (std::abs(c2 - cost[v]) <= kTieEps) {
        // Seeded coin so equal-cost routes spread across flows.
        if (hash_key(tie_key, static_cast<uint64_t>(v),
                     static_cast<uint64_t>(u)) & 1)
          parent[v] = u;
      }
    }
  }

  int32_t best_gw = -1;
  double best_cost = kInf;
  for (int32_t g : topo.gateways()) {
    if (cost[g] < best_cost - kTieEps) {
      best_cost = cost[g];
      best_gw = g;
    } else if (best_gw >= 0 && std::abs(cost[g] - best_cost) <= kTieEps &&
               (hash_key(tie_key, 0x6a7e, g) & 1)) {
      best_gw = g;
    }
  }
  if (best_gw < 0 || best_cost >= kInf) throw Error("no gateway reachable");

  std::vector<int32_t> path;
  for (int32_t v = best_gw; v != -1; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  if (path.front() != ap) throw Error("route reconstruction failed");
  return path;
}

void validate_plan(const TePlan& plan, const MeshTopology& topo) {
  for (const EpochPlan& row : plan.rows) {
    if (row.router_ch24.size() != topo.routers().size())
      throw Error("plan row has wrong channel map size");
    for (size_t i = 0; i < row.router_ch24.size(); ++i)
      if (row.router_ch24[i] != kNoChannel && !valid_channel24(row.router_ch24[i]))
        throw Error("invalid 2.4GHz channel in plan");
    int64_t prev = std::numeric_limits<int64_t>::min();
    for (const FlowKnobs& k : row.flows) {
      if (k.flow <= prev) throw Error("plan knobs not sorted by flow id");
      prev = k.flow;
      if (k.paused) continue;
      if (k.route.empty()) throw Error("scheduled flow without a route");
      if (k.ap != k.route.front()) throw Error("flow AP is not the route head");
      if (!topo.router(k.route.back()).is_gateway)
        throw Error("route does not end at a gateway");
      for (size_t i = 1; i < k.route.size(); ++i) {
        const auto& nb = topo.grid_neighbors(k.route[i - 1]);
        if (std::find(nb.begin(), nb.end(), k.route[i]) == nb.end())
          throw Error("route hop is not a grid neighbor");
      }
      if (!valid_channel24(k.channel))
        throw Error("scheduled flow without a 2.4GHz channel");
      if (row.router_ch24[k.ap] != k.channel)
        throw Error("flow channel disagrees with its AP");
      if (k.rate_mbps < 0) throw Error("negative assigned rate");
    }
  }
}

// ---------------------------------------------------------------------------
// Greedy planner
// ---------------------------------------------------------------------------

namespace {

struct WorkFlow {
  int idx = -1;  // task index
  const TaskSpec* task = nullptr;
  bool rt = true;
  bool alive = false;
  bool was_active = false;
  bool preemptible = true;
  double desired = 0;
  int remaining = 0;        // RT epochs left (window hypothesis)
  double remaining_mb = 0;  // DC data left (window hypothesis)
  double last_rate = -1;
  int sticky = kNoChannel;
  int32_t current_ap = -1;

  bool scheduled = false;
  bool paused_row = false;
  bool out_of_coverage = false;
  double hypo_rate = 0;  // what the flow is booked at in the admission ledger
  FlowPath path;
  int channel = kNoChannel;
  double rate = 0;
};

// The engine keeps two radio environments per row. Real-time decisions only
// ever see real-time state, so adding or dropping collection traffic cannot
// move a real-time rate; collection flows are fitted afterwards against the
// full picture.
class PlanBuilder {
 public:
  PlanBuilder(const WorldView& w, const PolicyConfig& cfg)
      : w_(w), cfg_(cfg), topo_(*w.topo), model_(*w.model),
        env_(topo_, model_), hypo_(env_.slots.count(), 0.0),
        rng_seed_(hash_key(w.seed, 0x9e11)) {
    window_end_ = std::min(w.now + w.te.invocation_period, w.horizon);
    if (window_end_ <= w.now) window_end_ = w.now + 1;
  }

  TePlan build();

 private:
  Mode access_mode_of(const WorkFlow& f) const {
    return topo_.devices()[dev_index(f)].above_canopy ? Mode::Ac24 : Mode::Uc24;
  }
  int dev_index(const WorkFlow& f) const {
    return topo_.device_index(f.task->device_id);
  }
  int static_channel(int32_t router) const {
    return kChannels24[hash_key(w_.seed, 0xc4a7, router) % 3];
  }
  double access_capacity(const WorkFlow& f, Vec2 pos, int32_t ap) const {
    double d = distance(pos, topo_.router(ap).pos);
    if (d <= 0) d = 1e-3;
    return model_.throughput(access_mode_of(f), d);
  }

  void gather_flows();
  void plan_first_row();
  void advance_row(int64_t epoch);
  void plan_naive_row(int64_t epoch);

  bool allocate_rt(WorkFlow& f, int64_t epoch, bool unconditional);
  bool pick_access(const WorkFlow& f, Vec2 pos, ApChoice* out) const;
  std::vector<int32_t> make_route(const WorkFlow& f, int32_t ap,
                                  const std::vector<double>& committed);
  std::vector<int32_t> staircase(int64_t flow_id, int32_t ap, bool randomized);
  std::vector<int32_t> weighted_route(const WorkFlow& f, int32_t ap,
                                      const std::vector<double>& committed);
  void maybe_bridge_hops(WorkFlow& f, RadioEnv& env, std::vector<Hop24>& sources,
                         const std::vector<double>& committed);
  void handle_mobility(int64_t epoch, EpochPlan* prev_row);
  void rebuild_hypothesis();
  void assign_rt_rates();
  void fill_collection(int64_t epoch);
  void emit_row(int64_t epoch);

  const WorldView& w_;
  const PolicyConfig& cfg_;
  const MeshTopology& topo_;
  const ThroughputModel& model_;
  int64_t window_end_;

  std::vector<WorkFlow> wf_;
  // Real-time-only state.
  RadioEnv env_;
  std::vector<Hop24> sources24_;
  std::vector<double> hypo_;  // committed at desired rates
  // Full-row state, rebuilt by fill_collection.
  RadioEnv full_env_;
  std::vector<int> row_channels_;

  uint64_t rng_seed_;
  TePlan plan_;
};

void PlanBuilder::gather_flows() {
  const auto& tasks = *w_.tasks;
  const auto& flows = *w_.flows;
  for (size_t i = 0; i < tasks.size(); ++i) {
    const TaskSpec& t = tasks[i];
    const FlowRuntime& rt = flows[i];
    WorkFlow f;
    f.idx = static_cast<int>(i);
    f.task = &t;
    f.rt = t.kind == TaskKind::RealTime;
    f.alive = rt.state.status == FlowStatus::Pending ||
              rt.state.status == FlowStatus::Active ||
              rt.state.status == FlowStatus::Paused;
    f.was_active = rt.state.status == FlowStatus::Active;
    f.preemptible = t.preemptible;
    f.desired = f.rt ? t.demand_mbps : 0.0;
    f.remaining = rt.state.remaining_duration;
    f.remaining_mb = rt.state.remaining_mb;
    f.last_rate = rt.state.last_rate_mbps;
    f.sticky = rt.sticky_channel;
    f.current_ap = rt.current_ap;
    wf_.push_back(f);
  }
}

// Channel options for one candidate AP under the flow's sticky constraint.
static void channel_options(int committed, int sticky, ChannelRule rule,
                            int fixed_channel, std::vector<int>* out) {
  out->clear();
  if (committed != kNoChannel) {
    if (sticky == kNoChannel || sticky == committed) out->push_back(committed);
    return;
  }
  if (sticky != kNoChannel) {
    out->push_back(sticky);
    return;
  }
  if (rule == ChannelRule::RandomFixed) {
    out->push_back(fixed_channel);
  } else {
    out->assign(std::begin(kChannels24), std::end(kChannels24));
  }
}

bool PlanBuilder::pick_access(const WorkFlow& f, Vec2 pos, ApChoice* out) const {
  Mode mode = access_mode_of(f);
  if (cfg_.ap_rule == ApRule::MinF) {
    auto choice = select_access_point(pos, f.desired, mode, f.sticky,
                                      sources24_, env_.router_ch24, topo_,
                                      model_);
    if (!choice) return false;
    *out = *choice;
    return true;
  }

  // Nearest AP; channel from the commitment, sticky pin, or the run-static map.
  auto in_range = topo_.routers_in_range(pos, mode, model_);
  ApChoice best;
  double best_dist = kInf;
  bool have = false;
  std::vector<int> chans;
  for (int pass = 0; pass < 2 && !have; ++pass) {
    int sticky = pass == 0 ? f.sticky : kNoChannel;
    for (int32_t ap : in_range) {
      channel_options(env_.router_ch24[ap], sticky, cfg_.channel_rule,
                      static_channel(ap), &chans);
      for (int ch : chans) {
        double d = distance(pos, topo_.router(ap).pos);
        if (d <= 0) d = 1e-3;
        bool better = d < best_dist - kTieEps ||
                      (std::abs(d - best_dist) <= kTieEps &&
                       (ap < best.ap || (ap == best.ap && ch < best.channel)));
        if (better) {
          best = {ap, ch, d};
          best_dist = d;
          have = true;
        }
      }
    }
    if (f.sticky == kNoChannel) break;
  }
  if (!have) return false;
  *out = best;
  return true;
}

std::vector<int32_t> PlanBuilder::staircase(int64_t flow_id, int32_t ap,
                                            bool randomized) {
  int cols = topo_.cols();
  int r0 = ap / cols, c0 = ap % cols;
  int32_t best_gw = -1;
  int best_hops = std::numeric_limits<int>::max();
  std::vector<int32_t> ties;
  for (int32_t g : topo_.gateways()) {
    int hops = r0 + std::abs(c0 - g % cols);  // gateways sit in row 0
    if (hops < best_hops) {
      best_hops = hops;
      ties = {g};
    } else if (hops == best_hops) {
      ties.push_back(g);
    }
  }
  if (randomized && ties.size() > 1) {
    SplitMix rng(hash_key(rng_seed_, 0x96a7, flow_id, ap));
    best_gw = ties[rng.below(ties.size())];
  } else {
    best_gw = ties.front();
  }

  int gc = best_gw % cols;
  std::vector<int> moves;  // 0 = toward row 0, 1 = sideways
  for (int i = 0; i < r0; ++i) moves.push_back(0);
  for (int i = 0; i < std::abs(c0 - gc); ++i) moves.push_back(1);
  if (randomized) {
    SplitMix rng(hash_key(rng_seed_, 0x57a1, flow_id, ap));
    rng.shuffle(moves);
  }
  int side = c0 < gc ? 1 : -1;
  std::vector<int32_t> path = {ap};
  int r = r0, c = c0;
  for (int m : moves) {
    if (m == 0) --r; else c += side;
    path.push_back(r * cols + c);
  }
  return path;
}

std::vector<int32_t> PlanBuilder::weighted_route(
    const WorkFlow& f, int32_t ap, const std::vector<double>& committed) {
  size_t nr = topo_.routers().size();
  std::vector<double> committed5(nr);
  for (size_t r = 0; r < nr; ++r)
    committed5[r] = committed.empty() ? 0.0 : committed[env_.slots.router5(r)];
  return weighted_route_search(ap, f.desired, committed5, topo_, model_,
                               w_.te.hop_epsilon,
                               hash_key(rng_seed_, 0xd17, f.task->id));
}

std::vector<int32_t> PlanBuilder::make_route(const WorkFlow& f, int32_t ap,
                                             const std::vector<double>& committed) {
  if (topo_.router(ap).is_gateway) return {ap};
  switch (cfg_.route_rule) {
    case RouteRule::RandomMonotone: return staircase(f.task->id, ap, true);
    case RouteRule::HopCountDet: return staircase(f.task->id, ap, false);
    case RouteRule::Weighted:
    case RouteRule::WeightedTwoFour: return weighted_route(f, ap, committed);
  }
  return {ap};
}

// Above-canopy 2.4GHz augmentation: shift a congested 5GHz hop onto a 2.4
// channel when both endpoints can take it.
void PlanBuilder::maybe_bridge_hops(WorkFlow& f, RadioEnv& env,
                                    std::vector<Hop24>& sources,
                                    const std::vector<double>& committed) {
  if (cfg_.route_rule != RouteRule::WeightedTwoFour) return;
  const SlotSpace& slots = env.slots;
  int hops = f.path.mesh_hops();
  f.path.mesh_modes.assign(hops, Mode::Ac5);
  f.path.mesh_channels.assign(hops, kNoChannel);
  for (int h = 0; h < hops; ++h) {
    int32_t a = f.path.route[h], b = f.path.route[h + 1];
    double d = distance(topo_.router(a).pos, topo_.router(b).pos);
    double t5 = model_.throughput(Mode::Ac5, d);
    double t24 = model_.throughput(Mode::Ac24, d);
    if (t5 <= 0 || t24 <= 0) continue;
    double u5 = f.desired / t5;
    double load5 = committed.empty()
                       ? 0.0
                       : std::max(committed[slots.router5(a)],
                                  committed[slots.router5(b)]);
    double u24 = f.desired / t24;
    int ca = env.router_ch24[a], cb = env.router_ch24[b];
    int ch = kNoChannel;
    if (ca != kNoChannel && (cb == kNoChannel || cb == ca)) ch = ca;
    else if (cb != kNoChannel && ca == kNoChannel) ch = cb;
    else if (ca == kNoChannel && cb == kNoChannel) {
      double best = kInf;
      for (int c : kChannels24) {
        double load = std::max(contention24(a, c, sources, topo_, model_),
                               contention24(b, c, sources, topo_, model_));
        if (load < best) { best = load; ch = c; }
      }
    }
    if (ch == kNoChannel) continue;
    double load24 = std::max(contention24(a, ch, sources, topo_, model_),
                             contention24(b, ch, sources, topo_, model_));
    // The hop moves to 2.4GHz whenever that plane looks no more loaded than
    // the 5GHz one. The comparison is local; the wide 2.4 interference that
    // lands on under-canopy senders does not enter it.
    if (load24 + u24 > load5 + 2 * u5) continue;
    f.path.mesh_modes[h] = Mode::Ac24;
    f.path.mesh_channels[h] = ch;
    env.router_ch24[a] = ch;
    env.router_ch24[b] = ch;
    sources.push_back({topo_.router(a).pos, d, u24, ch, a, b, Mode::Ac24});
  }
}

void PlanBuilder::rebuild_hypothesis() {
  hypo_.assign(env_.slots.count(), 0.0);
  for (const WorkFlow& f : wf_) {
    if (!f.scheduled || !f.rt || f.hypo_rate <= 0) continue;
    ResourceFootprint fp = flow_footprint(f.path, f.hypo_rate, env_);
    for (const auto& [slot, v] : fp.entries()) hypo_[slot] += v;
  }
}

bool PlanBuilder::allocate_rt(WorkFlow& f, int64_t epoch, bool unconditional) {
  const Device& dev = topo_.devices()[dev_index(f)];
  Vec2 pos = dev.position_at(epoch);
  ApChoice choice;
  if (!pick_access(f, pos, &choice)) {
    f.paused_row = f.was_active;
    f.out_of_coverage = true;
    return false;
  }
  f.out_of_coverage = false;

  FlowPath path;
  path.device_index = dev_index(f);
  path.device_pos = pos;
  path.access_mode = access_mode_of(f);
  path.access_channel = choice.channel;
  path.route = make_route(f, choice.ap, hypo_);

  if (!unconditional) {
    ResourceFootprint fp = flow_footprint(path, f.desired, env_);
    double limit = 1.0 - w_.te.headroom + 1e-9;
    for (const auto& [slot, v] : fp.entries()) {
      if (hypo_[slot] + v > limit) return false;
    }
  }

  f.path = std::move(path);
  f.channel = choice.channel;
  f.scheduled = true;
  f.paused_row = false;
  f.hypo_rate = f.desired;
  f.sticky = choice.channel;
  f.current_ap = choice.ap;

  if (env_.router_ch24[choice.ap] == kNoChannel)
    env_.router_ch24[choice.ap] = choice.channel;
  maybe_bridge_hops(f, env_, sources24_, hypo_);
  double cap = access_capacity(f, pos, choice.ap);
  double d = std::max(distance(pos, topo_.router(choice.ap).pos), 1e-3);
  sources24_.push_back({pos, d, f.desired / std::max(cap, 1e-9), choice.channel,
                        choice.ap, -1, f.path.access_mode});
  env_.devices.push_back({f.path.device_index, pos, choice.channel});
  rebuild_hypothesis();
  return true;
}

void PlanBuilder::assign_rt_rates() {
  RateProblem prob;
  prob.budget = 1.0 - w_.te.headroom;
  prob.base.assign(env_.slots.count(), 0.0);
  std::vector<int> idx;
  for (size_t i = 0; i < wf_.size(); ++i) {
    WorkFlow& f = wf_[i];
    if (!f.scheduled || !f.rt) continue;
    RateProblem::FlowVars v;
    ResourceFootprint fp = flow_footprint(f.path, 1.0, env_);
    for (const auto& [slot, u] : fp.entries()) v.coef.push_back({slot, u});
    v.cap = f.desired;
    prob.flows.push_back(std::move(v));
    idx.push_back(static_cast<int>(i));
  }
  auto rates = maxmin_rates(prob);
  for (size_t k = 0; k < idx.size(); ++k) wf_[idx[k]].rate = rates[k];
}

// Collection traffic: deadline-critical flows first (ordered by slack), then
// the rest in seeded-random order, each taking the largest rate whose whole
// footprint fits the leftover units.
void PlanBuilder::fill_collection(int64_t epoch) {
  full_env_ = env_;
  std::vector<Hop24> sources = sources24_;
  double budget = 1.0 - w_.te.headroom;

  std::vector<int> forced, rest;
  for (size_t i = 0; i < wf_.size(); ++i) {
    WorkFlow& f = wf_[i];
    if (f.rt || !f.alive) continue;
    f.scheduled = false;
    if (f.task->request_epoch > epoch) continue;
    if (f.remaining_mb <= 1e-9 || epoch >= f.task->deadline_epoch) continue;
    FlowState st;
    st.remaining_mb = f.remaining_mb;
    st.last_rate_mbps = f.last_rate;
    double s = slack(*f.task, st, epoch, w_.epoch_length_s);
    (s <= 0 ? forced : rest).push_back(static_cast<int>(i));
  }
  std::sort(forced.begin(), forced.end(), [&](int a, int b) {
    FlowState sa, sb;
    sa.remaining_mb = wf_[a].remaining_mb;
    sa.last_rate_mbps = wf_[a].last_rate;
    sb.remaining_mb = wf_[b].remaining_mb;
    sb.last_rate_mbps = wf_[b].last_rate;
    double za = slack(*wf_[a].task, sa, epoch, w_.epoch_length_s);
    double zb = slack(*wf_[b].task, sb, epoch, w_.epoch_length_s);
    if (za != zb) return za < zb;
    return a < b;
  });
  SplitMix rng(hash_key(rng_seed_, 0x3a7f, static_cast<uint64_t>(w_.now)));
  rng.shuffle(rest);
  std::vector<int> order = std::move(forced);
  order.insert(order.end(), rest.begin(), rest.end());

  // Committed load at assigned real-time rates, re-measured whenever a new
  // device joins the environment as a bystander.
  std::vector<double> committed;
  std::vector<std::pair<const FlowPath*, double>> placed;
  for (const WorkFlow& f : wf_)
    if (f.scheduled && f.rt && f.rate > 0) placed.push_back({&f.path, f.rate});
  auto remeasure = [&]() {
    committed.assign(full_env_.slots.count(), 0.0);
    for (const auto& [path, rate] : placed) {
      ResourceFootprint fp = flow_footprint(*path, rate, full_env_);
      for (const auto& [slot, v] : fp.entries()) committed[slot] += v;
    }
  };
  remeasure();

  for (int i : order) {
    WorkFlow& f = wf_[i];
    const Device& dev = topo_.devices()[dev_index(f)];
    Vec2 pos = dev.position_at(epoch);
    Mode mode = access_mode_of(f);
    auto in_range = topo_.routers_in_range(pos, mode, model_);
    if (in_range.empty()) continue;
    int32_t ap = in_range.front();
    double best_d = kInf;
    for (int32_t r : in_range) {
      double d = distance(pos, topo_.router(r).pos);
      if (d < best_d - kTieEps) { best_d = d; ap = r; }
    }
    int ch = full_env_.router_ch24[ap];
    if (ch == kNoChannel) {
      if (cfg_.channel_rule == ChannelRule::RandomFixed) {
        ch = static_channel(ap);
      } else {
        double best = kInf;
        ch = kChannels24[0];
        for (int c : kChannels24) {
          double s = f_ap_score(pos, 1.0, ap, c, mode, sources,
                                full_env_.router_ch24, topo_, model_);
          if (s < best - kTieEps) { best = s; ch = c; }
        }
      }
    }

    double finish_rate = f.remaining_mb * 8.0 / w_.epoch_length_s;
    double cap = access_capacity(f, pos, ap);
    f.desired = std::min(finish_rate, std::max(1.0, budget * cap));
    f.path = FlowPath{};
    f.path.device_index = dev_index(f);
    f.path.device_pos = pos;
    f.path.access_mode = mode;
    f.path.access_channel = ch;
    f.path.route = make_route(f, ap, committed);
    f.channel = ch;
    f.current_ap = ap;
    if (full_env_.router_ch24[ap] == kNoChannel) full_env_.router_ch24[ap] = ch;
    maybe_bridge_hops(f, full_env_, sources, committed);
    full_env_.devices.push_back({f.path.device_index, pos, ch});
    remeasure();

    ResourceFootprint unit = flow_footprint(f.path, 1.0, full_env_);
    double max_rate = finish_rate;
    for (const auto& [slot, u] : unit.entries()) {
      if (u <= 0) continue;
      max_rate = std::min(max_rate, std::max(0.0, budget - committed[slot]) / u);
    }
    f.rate = std::max(0.0, max_rate);
    f.scheduled = true;
    if (f.rate > 0) placed.push_back({&f.path, f.rate});
    f.last_rate = f.rate;
    double d = std::max(distance(pos, topo_.router(ap).pos), 1e-3);
    sources.push_back({pos, d, f.rate / std::max(cap, 1e-9), ch, ap, -1, mode});
  }
  row_channels_ = full_env_.router_ch24;
}

void PlanBuilder::emit_row(int64_t epoch) {
  EpochPlan row;
  row.epoch = epoch;
  row.router_ch24 = row_channels_.empty() ? env_.router_ch24 : row_channels_;
  for (const WorkFlow& f : wf_) {
    bool finished = f.rt ? f.remaining <= 0 : f.remaining_mb <= 1e-9;
    if (f.scheduled) {
      FlowKnobs k;
      k.flow = f.task->id;
      k.rate_mbps = f.rate;
      k.ap = f.path.route.front();
      k.channel = f.channel;
      k.route = f.path.route;
      row.flows.push_back(std::move(k));
    } else if (f.alive && !finished && (f.paused_row || f.was_active)) {
      FlowKnobs k;
      k.flow = f.task->id;
      k.paused = true;
      row.flows.push_back(std::move(k));
    }
  }
  std::sort(row.flows.begin(), row.flows.end(),
            [](const FlowKnobs& a, const FlowKnobs& b) { return a.flow < b.flow; });
  plan_.rows.push_back(std::move(row));
}

void PlanBuilder::plan_first_row() {
  int64_t now = w_.now;

  std::vector<int> forced, optional;
  for (size_t i = 0; i < wf_.size(); ++i) {
    WorkFlow& f = wf_[i];
    if (!f.alive || !f.rt || f.task->request_epoch > now) continue;
    FlowState st;
    st.remaining_duration = f.remaining;
    double s = slack(*f.task, st, now, w_.epoch_length_s);
    bool must = s <= 0 || (f.was_active && !f.preemptible);
    (must ? forced : optional).push_back(static_cast<int>(i));
  }
  std::sort(forced.begin(), forced.end(), [&](int a, int b) {
    if (wf_[a].desired != wf_[b].desired) return wf_[a].desired > wf_[b].desired;
    return a < b;
  });
  std::sort(optional.begin(), optional.end(), [&](int a, int b) {
    FlowState sa, sb;
    sa.remaining_duration = wf_[a].remaining;
    sb.remaining_duration = wf_[b].remaining;
    double za = slack(*wf_[a].task, sa, now, w_.epoch_length_s);
    double zb = slack(*wf_[b].task, sb, now, w_.epoch_length_s);
    if (za != zb) return za < zb;
    if (wf_[a].was_active != wf_[b].was_active) return wf_[a].was_active;
    return a < b;
  });

  for (int i : forced) allocate_rt(wf_[i], now, /*unconditional=*/true);
  // What a degraded zero-slack flow will actually consume is its enforced
  // rate, so the admission ledger carries that, not the raw demand.
  assign_rt_rates();
  for (int i : forced) {
    if (wf_[i].scheduled) wf_[i].hypo_rate = std::min(wf_[i].desired, wf_[i].rate);
  }
  rebuild_hypothesis();
  for (int i : optional) {
    if (!allocate_rt(wf_[i], now, /*unconditional=*/false)) {
      if (wf_[i].was_active && wf_[i].preemptible) wf_[i].paused_row = true;
    }
  }

  assign_rt_rates();
  fill_collection(now);
  emit_row(now);
}

void PlanBuilder::handle_mobility(int64_t epoch, EpochPlan* prev_row) {
  for (WorkFlow& f : wf_) {
    if (!f.scheduled || !f.rt) continue;
    const Device& dev = topo_.devices()[dev_index(f)];
    if (!dev.mobile()) continue;
    Vec2 pos = dev.position_at(epoch);
    f.path.device_pos = pos;
    int32_t cur = f.path.route.front();
    double d_cur = std::max(distance(pos, topo_.router(cur).pos), 1e-3);
    Mode mode = access_mode_of(f);
    bool out = model_.throughput(mode, d_cur) <= 0;

    auto in_range = topo_.routers_in_range(pos, mode, model_);
    if (in_range.empty()) {
      f.scheduled = false;
      f.paused_row = true;
      continue;
    }
    int32_t nearest_compat = -1, nearest_any = -1;
    double dc_best = kInf, da_best = kInf;
    for (int32_t r : in_range) {
      double d = distance(pos, topo_.router(r).pos);
      if (d < da_best - kTieEps) { da_best = d; nearest_any = r; }
      int ch = env_.router_ch24[r];
      bool compat = ch == kNoChannel || ch == f.sticky;
      if (compat && d < dc_best - kTieEps) { dc_best = d; nearest_compat = r; }
    }
    bool crossover = nearest_compat >= 0 && nearest_compat != cur &&
                     dc_best < d_cur - kTieEps;
    if (!out && !crossover) continue;

    int32_t target = nearest_compat >= 0 ? nearest_compat : nearest_any;
    if (target < 0 || target == cur) continue;
    int tch = env_.router_ch24[target];
    if (tch == kNoChannel || tch == f.sticky) {
      // The device keeps its channel; the next AP is retuned instead, one
      // epoch ahead of the handover when the window allows.
      if (tch == kNoChannel && prev_row != nullptr &&
          prev_row->router_ch24[target] == kNoChannel)
        prev_row->router_ch24[target] = f.sticky;
      env_.router_ch24[target] = f.sticky;
      f.channel = f.sticky;
    } else {
      f.channel = tch;
      f.sticky = tch;  // device retunes; the outage lands in the simulator
    }
    f.current_ap = target;
    f.path.access_channel = f.channel;
    f.path.route = make_route(f, target, hypo_);
    f.path.mesh_modes.clear();
    f.path.mesh_channels.clear();
    maybe_bridge_hops(f, env_, sources24_, hypo_);
  }
}

void PlanBuilder::advance_row(int64_t epoch) {
  // Work completed in the previous row.
  for (WorkFlow& f : wf_) {
    f.paused_row = false;
    if (!f.scheduled) continue;
    if (f.rt) {
      if (--f.remaining <= 0) f.scheduled = false;
    } else {
      f.remaining_mb -= f.rate * w_.epoch_length_s / 8.0;
      f.scheduled = false;  // collection refills below
    }
  }

  // Rebuild the real-time environment at this epoch's device positions.
  auto rebuild_rt_env = [&]() {
    env_.devices.clear();
    sources24_.clear();
    for (WorkFlow& f : wf_) {
      if (!f.scheduled) continue;
      Vec2 pos = topo_.devices()[dev_index(f)].position_at(epoch);
      f.path.device_pos = pos;
      int32_t ap = f.path.route.front();
      env_.devices.push_back({f.path.device_index, pos, f.channel});
      double cap = access_capacity(f, pos, ap);
      double d = std::max(distance(pos, topo_.router(ap).pos), 1e-3);
      sources24_.push_back({pos, d, f.desired / std::max(cap, 1e-9), f.channel,
                            ap, -1, f.path.access_mode});
    }
    rebuild_hypothesis();
  };
  rebuild_rt_env();
  handle_mobility(epoch, plan_.rows.empty() ? nullptr : &plan_.rows.back());
  rebuild_rt_env();

  // Flows whose slack runs out mid-window start now, ready or not; the rest
  // retry the admission check in slack order as capacity frees up.
  std::vector<int> forced, optional;
  for (size_t i = 0; i < wf_.size(); ++i) {
    WorkFlow& f = wf_[i];
    if (!f.rt || !f.alive || f.scheduled) continue;
    if (f.paused_row && f.out_of_coverage) continue;
    if (f.remaining <= 0 || f.task->request_epoch > epoch) continue;
    FlowState st;
    st.remaining_duration = f.remaining;
    double s = slack(*f.task, st, epoch, w_.epoch_length_s);
    (s <= 0 ? forced : optional).push_back(static_cast<int>(i));
  }
  std::sort(forced.begin(), forced.end(), [&](int a, int b) {
    if (wf_[a].desired != wf_[b].desired) return wf_[a].desired > wf_[b].desired;
    return a < b;
  });
  std::sort(optional.begin(), optional.end(), [&](int a, int b) {
    FlowState sa, sb;
    sa.remaining_duration = wf_[a].remaining;
    sb.remaining_duration = wf_[b].remaining;
    double za = slack(*wf_[a].task, sa, epoch, w_.epoch_length_s);
    double zb = slack(*wf_[b].task, sb, epoch, w_.epoch_length_s);
    if (za != zb) return za < zb;
    return a < b;
  });
  for (int i : forced) allocate_rt(wf_[i], epoch, /*unconditional=*/true);
  if (!forced.empty()) {
    assign_rt_rates();
    for (int i : forced)
      if (wf_[i].scheduled) wf_[i].hypo_rate = std::min(wf_[i].desired, wf_[i].rate);
    rebuild_hypothesis();
  }
  for (int i : optional) allocate_rt(wf_[i], epoch, /*unconditional=*/false);

  assign_rt_rates();
  fill_collection(epoch);
  emit_row(epoch);
}

void PlanBuilder::plan_naive_row(int64_t epoch) {
  env_.devices.clear();
  for (WorkFlow& f : wf_) {
    f.paused_row = false;
    if (f.scheduled && f.rt && epoch > w_.now && --f.remaining <= 0) {
      f.scheduled = false;
      continue;
    }
    if (!f.alive || f.task->request_epoch > epoch) {
      f.scheduled = false;
      continue;
    }
    if (f.rt && f.remaining <= 0) {
      f.scheduled = false;
      continue;
    }
    if (!f.rt && (f.remaining_mb <= 1e-9 || epoch >= f.task->deadline_epoch)) {
      f.scheduled = false;
      continue;
    }

    const Device& dev = topo_.devices()[dev_index(f)];
    Vec2 pos = dev.position_at(epoch);
    Mode mode = access_mode_of(f);
    // Devices associate once and cling to the AP until the link dies.
    bool have_ap = f.current_ap >= 0;
    if (have_ap) {
      double d = std::max(distance(pos, topo_.router(f.current_ap).pos), 1e-3);
      if (model_.throughput(mode, d) <= 0) have_ap = false;
    }
    if (!have_ap) {
      auto in_range = topo_.routers_in_range(pos, mode, model_);
      if (in_range.empty()) {
        f.scheduled = false;
        f.paused_row = f.was_active;
        continue;
      }
      double best = kInf;
      int32_t ap = in_range.front();
      for (int32_t r : in_range) {
        double d = distance(pos, topo_.router(r).pos);
        if (d < best - kTieEps) { best = d; ap = r; }
      }
      f.current_ap = ap;
    }
    if (f.path.route.empty() || f.path.route.front() != f.current_ap)
      f.path.route = staircase(f.task->id, f.current_ap, true);
    f.path.device_index = dev_index(f);
    f.path.device_pos = pos;
    f.path.access_mode = mode;
    f.channel = static_channel(f.current_ap);
    f.path.access_channel = f.channel;
    f.desired = f.rt ? f.task->demand_mbps
                     : f.remaining_mb * 8.0 / w_.epoch_length_s;
    f.rate = f.desired;  // no rate control; the spectrum model arbitrates
    f.scheduled = true;
    env_.devices.push_back({f.path.device_index, pos, f.channel});
  }

  row_channels_.assign(topo_.routers().size(), kNoChannel);
  for (size_t r = 0; r < row_channels_.size(); ++r)
    row_channels_[r] = static_channel(static_cast<int32_t>(r));
  emit_row(epoch);
}

TePlan PlanBuilder::build() {
  plan_.start = w_.now;
  gather_flows();
  if (!cfg_.managed) {
    for (int64_t e = w_.now; e < window_end_; ++e) plan_naive_row(e);
    return std::move(plan_);
  }
  plan_first_row();
  for (int64_t e = w_.now + 1; e < window_end_; ++e) advance_row(e);
  return std::move(plan_);
}

}  // namespace

TePlan GreedyPlanner::plan(const WorldView& w) {
  PlanBuilder b(w, cfg_);
  return b.build();
}

}  // namespace cropmesh

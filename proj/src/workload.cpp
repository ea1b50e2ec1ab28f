#include "cropmesh/workload.hpp"

#include <algorithm>
#include <cmath>

#include "cropmesh/rng.hpp"
#include "json.hpp"

namespace cropmesh {

const char* task_kind_name(TaskKind k) {
  return k == TaskKind::RealTime ? "realtime" : "collection";
}

const char* flow_status_name(FlowStatus s) {
  switch (s) {
    case FlowStatus::Pending: return "pending";
    case FlowStatus::Active: return "active";
    case FlowStatus::Paused: return "paused";
    case FlowStatus::Done: return "done";
    case FlowStatus::Expired: return "expired";
  }
  return "?";
}

double slack(const TaskSpec& task, const FlowState& state, int64_t now,
             double epoch_length_s) {
  double to_deadline = static_cast<double>(task.deadline_epoch - now);
  if (task.kind == TaskKind::RealTime)
    return to_deadline - state.remaining_duration;
  if (state.last_rate_mbps <= 0)
    return std::numeric_limits<double>::infinity();
  double mbit_per_epoch = state.last_rate_mbps * epoch_length_s;
  double epochs_left = std::ceil(state.remaining_mb * 8.0 / mbit_per_epoch);
  return to_deadline - epochs_left;
}

namespace {

constexpr int32_t kDeviceIdBase = 1000;

// First-row gateways around the middle of the row, one column between
// neighbors, so the edge sits behind a shared but not fully fused cut.
std::vector<int32_t> spread_gateways(int cols, int count) {
  std::vector<int32_t> g;
  int mid = cols / 2;
  int start = std::max(0, mid - (count - 1));
  for (int i = 0; i < count; ++i) {
    int col = start + 2 * i;
    if (col < cols) g.push_back(col);
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

struct Generator {
  uint64_t seed;
  double scale;
  SplitMix rng;
  Scenario scn;
  double field_w = 0, field_h = 0;
  int cap = 15;
  std::vector<int> window_load;

  Generator(uint64_t seed_in, double scale_in, uint64_t stream)
      : seed(seed_in), scale(scale_in), rng(hash_key(seed_in, stream)) {
    if (!(scale > 0.0 && scale <= 1.0)) throw Error("scale must be in (0, 1]");
    int side = std::max(2, static_cast<int>(std::lround(15 * scale)));
    int n_gw = std::max(1, static_cast<int>(std::lround(3 * scale)));
    scn.topo = MeshTopology::grid(side, side, 90.0, spread_gateways(side, n_gw));
    scn.horizon = 250;
    field_w = (side - 1) * 90.0;
    field_h = (side - 1) * 90.0;
    cap = std::max(1, static_cast<int>(std::lround(15 * scale)));
    window_load.assign(scn.horizon + 1, 0);
  }

  int count(double base) const {
    return std::max(0, static_cast<int>(std::lround(base * scale)));
  }

  Vec2 uniform_pos() {
    return {rng.uniform(0.0, field_w), rng.uniform(0.0, field_h)};
  }

  int32_t add_device(Vec2 pos) {
    Device d;
    d.id = kDeviceIdBase + static_cast<int32_t>(scn.topo.devices().size());
    d.start = pos;
    scn.topo.add_device(d);
    return d.id;
  }

  void add_collection(int n, double volume_mb, int64_t deadline,
                      int64_t latest_request) {
    for (int i = 0; i < n; ++i) {
      TaskSpec t;
      t.id = static_cast<int64_t>(scn.tasks.size());
      t.kind = TaskKind::DataCollection;
      t.device_id = add_device(uniform_pos());
      t.request_epoch = static_cast<int64_t>(rng.below(latest_request + 1));
      t.data_volume_mb = volume_mb;
      t.deadline_epoch = deadline;
      t.preemptible = true;
      scn.tasks.push_back(t);
    }
  }

  // Requests arrive in operation waves (crews working the field in bursts)
  // with a uniform background; rejection-resampling keeps every epoch's
  // admissible overlap within `cap`.
  int64_t wave_center(int wave) const {
    return 12 + wave * 34;  // every ~34 epochs across the horizon
  }
  int wave_count() const {
    return static_cast<int>((scn.horizon - 12) / 34) + 1;
  }

  bool fits(int64_t request, int64_t deadline) {
    for (int64_t e = request; e <= deadline && e <= scn.horizon; ++e)
      if (window_load[e] + 1 > cap) return false;
    for (int64_t e = request; e <= deadline && e <= scn.horizon; ++e)
      ++window_load[e];
    return true;
  }

  TaskSpec draw_realtime() {
    TaskSpec t;
    t.id = static_cast<int64_t>(scn.tasks.size());
    t.kind = TaskKind::RealTime;
    t.demand_mbps = rng.uniform(10.0, 20.0);
    t.duration_epochs = 5 + static_cast<int>(rng.below(16));  // 5..20
    t.preemptible = true;
    return t;
  }

  void finish_realtime(TaskSpec t, Vec2 pos, int64_t request,
                       int slack_at_request) {
    t.request_epoch = request;
    t.deadline_epoch = request + slack_at_request + t.duration_epochs;
    bool mobile = rng.next01() < 0.30;
    int32_t dev_id = add_device(pos);
    t.device_id = dev_id;
    if (mobile) {
      Device& d = const_cast<Device&>(scn.topo.device(dev_id));
      double speed = rng.uniform(5.0, 10.0);  // m per epoch
      double dir = pos.x < field_w / 2 ? 1.0 : -1.0;
      int64_t move_epochs = t.deadline_epoch - t.request_epoch;
      double end_x = std::clamp(pos.x + dir * speed * move_epochs, 0.0, field_w);
      d.waypoints = {{pos, 0},
                     {pos, t.request_epoch},
                     {{end_x, pos.y}, t.deadline_epoch},
                     {{end_x, pos.y}, scn.horizon}};
    }
    scn.tasks.push_back(std::move(t));
  }

  // Scenario 1: tasks spread over the field, requests mostly in waves.
  void add_realtime_spread(int n) {
    for (int i = 0; i < n; ++i) {
      TaskSpec t = draw_realtime();
      int slack_at_request = static_cast<int>(rng.below(11));  // 0..10
      int64_t latest = std::max<int64_t>(
          0, scn.horizon - t.duration_epochs - slack_at_request);
      for (int attempt = 0; attempt < 4000; ++attempt) {
        int64_t request;
        if (rng.next01() < 0.85) {
          int64_t c = wave_center(static_cast<int>(rng.below(wave_count())));
          request = std::clamp<int64_t>(
              c + static_cast<int64_t>(rng.below(7)) - 3, 0, latest);
        } else {
          request = static_cast<int64_t>(rng.below(latest + 1));
        }
        if (fits(request, request + t.duration_epochs + slack_at_request)) {
          finish_realtime(std::move(t), uniform_pos(), request, slack_at_request);
          break;
        }
      }
    }
  }

  // Scenario 2: sets of up to 5 robots working one spot in one window.
  void add_realtime_clustered(int n) {
    int placed = 0;
    while (placed < n) {
      const auto& routers = scn.topo.routers();
      Vec2 center = routers[rng.below(routers.size())].pos;
      int64_t wave = wave_center(static_cast<int>(rng.below(wave_count())));
      int size = std::min<int>(n - placed, 3 + static_cast<int>(rng.below(3)));
      if (n - placed - size == 1) size -= 1;  // no lone robots
      for (int k = 0; k < size; ++k) {
        TaskSpec t = draw_realtime();
        int slack_at_request = static_cast<int>(rng.below(11));
        int64_t latest = std::max<int64_t>(
            0, scn.horizon - t.duration_epochs - slack_at_request);
        for (int attempt = 0; attempt < 400; ++attempt) {
          // When the window is packed, the whole set shifts to another slot.
          if (attempt > 0 && attempt % 50 == 0)
            wave = static_cast<int64_t>(rng.below(std::max<int64_t>(
                1, scn.horizon - 30)));
          int64_t request = std::clamp<int64_t>(
              wave + static_cast<int64_t>(rng.below(7)) - 3, 0, latest);
          if (fits(request, request + t.duration_epochs + slack_at_request)) {
            double rad = 45.0 * std::sqrt(rng.next01());
            double theta = rng.uniform(0.0, 6.283185307179586);
            Vec2 pos = {std::clamp(center.x + rad * std::cos(theta), 0.0, field_w),
                        std::clamp(center.y + rad * std::sin(theta), 0.0, field_h)};
            finish_realtime(std::move(t), pos, request, slack_at_request);
            ++placed;
            break;
          }
        }
      }
    }
  }
};

}  // namespace

Scenario generate_scenario1(uint64_t seed, double scale) {
  Generator g(seed, scale, /*stream=*/0x5c31);
  g.add_collection(g.count(40), 15.0, 200, 120);
  g.add_collection(g.count(8), 500.0, 20160, 200);  // two weeks out
  g.add_realtime_spread(g.count(100));
  return std::move(g.scn);
}

Scenario generate_scenario2(uint64_t seed, double scale) {
  Generator g(seed, scale, /*stream=*/0x5c32);
  g.add_collection(g.count(40), 15.0, 200, 120);
  g.add_collection(g.count(8), 500.0, 20160, 200);
  g.add_realtime_clustered(g.count(100));
  return std::move(g.scn);
}

std::string scenario_to_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["horizon"] = s.horizon;
  j["grid"] = {{"rows", s.topo.rows()},
               {"cols", s.topo.cols()},
               {"spacing_m", s.topo.spacing()}};
  j["gateways"] = s.topo.gateways();
  auto& devices = j["devices"] = nlohmann::ordered_json::array();
  for (const Device& d : s.topo.devices()) {
    nlohmann::ordered_json dj;
    dj["id"] = d.id;
    dj["start_xy"] = {d.start.x, d.start.y};
    if (!d.waypoints.empty()) {
      auto& w = dj["waypoints"] = nlohmann::ordered_json::array();
      for (const Waypoint& p : d.waypoints)
        w.push_back({p.pos.x, p.pos.y, p.epoch});
    }
    if (d.above_canopy) dj["above_canopy"] = true;
    devices.push_back(dj);
  }
  auto& tasks = j["tasks"] = nlohmann::ordered_json::array();
  for (const TaskSpec& t : s.tasks) {
    nlohmann::ordered_json tj;
    tj["id"] = t.id;
    tj["kind"] = task_kind_name(t.kind);
    tj["device"] = t.device_id;
    tj["request_epoch"] = t.request_epoch;
    if (t.kind == TaskKind::RealTime) {
      tj["demand_mbps"] = t.demand_mbps;
      tj["duration_epochs"] = t.duration_epochs;
    } else {
      tj["data_volume_mb"] = t.data_volume_mb;
    }
    tj["deadline_epoch"] = t.deadline_epoch;
    tj["preemptible"] = t.preemptible;
    tasks.push_back(tj);
  }
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  Scenario s;
  s.horizon = j.at("horizon").get<int64_t>();
  auto grid = j.at("grid");
  s.topo = MeshTopology::grid(grid.at("rows").get<int>(),
                              grid.at("cols").get<int>(),
                              grid.at("spacing_m").get<double>(),
                              j.at("gateways").get<std::vector<int32_t>>());
  for (const auto& dj : j.at("devices")) {
    Device d;
    d.id = dj.at("id").get<int32_t>();
    auto xy = dj.at("start_xy");
    d.start = {xy.at(0).get<double>(), xy.at(1).get<double>()};
    if (dj.contains("waypoints")) {
      for (const auto& w : dj.at("waypoints"))
        d.waypoints.push_back({{w.at(0).get<double>(), w.at(1).get<double>()},
                               w.at(2).get<int64_t>()});
    }
    d.above_canopy = dj.value("above_canopy", false);
    s.topo.add_device(std::move(d));
  }
  for (const auto& tj : j.at("tasks")) {
    TaskSpec t;
    t.id = tj.at("id").get<int64_t>();
    std::string kind = tj.at("kind").get<std::string>();
    if (kind == "realtime") {
      t.kind = TaskKind::RealTime;
      t.demand_mbps = tj.at("demand_mbps").get<double>();
      t.duration_epochs = tj.at("duration_epochs").get<int>();
    } else if (kind == "collection") {
      t.kind = TaskKind::DataCollection;
      t.data_volume_mb = tj.at("data_volume_mb").get<double>();
    } else {
      throw Error("unknown task kind: " + kind);
    }
    t.device_id = tj.at("device").get<int32_t>();
    t.request_epoch = tj.at("request_epoch").get<int64_t>();
    t.deadline_epoch = tj.at("deadline_epoch").get<int64_t>();
    t.preemptible = tj.value("preemptible", true);
    if (t.deadline_epoch < t.request_epoch)
      throw Error("task " + std::to_string(t.id) + ": deadline before request");
    s.tasks.push_back(t);
  }
  return s;
}

}  // namespace cropmesh

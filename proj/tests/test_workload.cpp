#include <algorithm>
#include <map>

#include "doctest.h"
#include "helpers.hpp"

using namespace cropmesh;

TEST_CASE("slack arithmetic") {
  TaskSpec t;
  t.kind = TaskKind::RealTime;
  t.deadline_epoch = 20;
  FlowState s;
  s.remaining_duration = 10;
  CHECK(slack(t, s, 10) == 0.0);
  CHECK(slack(t, s, 5) == 5.0);
  CHECK(slack(t, s, 12) == -2.0);

  TaskSpec dc;
  dc.kind = TaskKind::DataCollection;
  dc.deadline_epoch = 100;
  FlowState ds;
  ds.remaining_mb = 15.0;
  CHECK(slack(dc, ds, 0) == std::numeric_limits<double>::infinity());
  ds.last_rate_mbps = 2.0;  // 15 MB at 2 Mbps = 1 epoch
  CHECK(slack(dc, ds, 0) == doctest::Approx(99.0));
  ds.last_rate_mbps = 0.1;  // 120 Mbit at 6 Mbit/epoch = 20 epochs
  CHECK(slack(dc, ds, 95) == doctest::Approx(-15.0));
}

TEST_CASE("slack falls by one per pending epoch") {
  TaskSpec t;
  t.kind = TaskKind::RealTime;
  t.deadline_epoch = 50;
  FlowState s;
  s.remaining_duration = 7;
  for (int64_t e = 0; e < 10; ++e)
    CHECK(slack(t, s, e + 1) == slack(t, s, e) - 1.0);
}

TEST_CASE("scenario 1 at full scale") {
  Scenario s = generate_scenario1(11, 1.0);
  CHECK(s.topo.routers().size() == 225);
  CHECK(s.topo.rows() == 15);
  CHECK(s.topo.spacing() == 90.0);
  CHECK(s.topo.gateways().size() == 3);
  for (int32_t g : s.topo.gateways()) CHECK(g < 15);  // first row
  CHECK(s.horizon == 250);

  int daily = 0, weekly = 0, rt = 0;
  for (const TaskSpec& t : s.tasks) {
    if (t.kind == TaskKind::RealTime) {
      ++rt;
      CHECK(t.demand_mbps >= 10.0);
      CHECK(t.demand_mbps <= 20.0);
      CHECK(t.duration_epochs >= 5);
      CHECK(t.duration_epochs <= 20);
      int64_t slack_at_request =
          t.deadline_epoch - t.request_epoch - t.duration_epochs;
      CHECK(slack_at_request >= 0);
      CHECK(slack_at_request <= 10);
      CHECK(t.deadline_epoch <= s.horizon);
    } else if (t.data_volume_mb == 15.0) {
      ++daily;
      CHECK(t.deadline_epoch == 200);
    } else {
      ++weekly;
      CHECK(t.data_volume_mb == 500.0);
      CHECK(t.deadline_epoch > s.horizon);
    }
  }
  CHECK(daily == 40);
  CHECK(weekly == 8);
  CHECK(rt == 100);

  // Admissible-window overlap never exceeds 15 concurrent real-time flows.
  std::vector<int> overlap(s.horizon + 1, 0);
  for (const TaskSpec& t : s.tasks) {
    if (t.kind != TaskKind::RealTime) continue;
    for (int64_t e = t.request_epoch; e <= t.deadline_epoch && e <= s.horizon; ++e)
      ++overlap[e];
  }
  CHECK(*std::max_element(overlap.begin(), overlap.end()) <= 15);

  s.topo.validate_trajectories(10.0);
}

TEST_CASE("generators are deterministic and scale") {
  std::string a = scenario_to_json(generate_scenario1(5, 1.0));
  std::string b = scenario_to_json(generate_scenario1(5, 1.0));
  CHECK(a == b);
  std::string c = scenario_to_json(generate_scenario1(6, 1.0));
  CHECK(a != c);

  Scenario half = generate_scenario1(5, 0.5);
  CHECK(half.topo.rows() == 8);
  int rt = 0;
  for (const TaskSpec& t : half.tasks)
    if (t.kind == TaskKind::RealTime) ++rt;
  CHECK(rt == 50);

  CHECK_THROWS_AS(generate_scenario1(5, 0.0), Error);
  CHECK_THROWS_AS(generate_scenario1(5, 1.5), Error);
}

TEST_CASE("scenario 2 clusters robots near shared routers") {
  Scenario s = generate_scenario2(17, 1.0);
  const ThroughputModel& m = test::fixture_model();
  double cutoff = m.cutoff(Mode::Uc24);

  std::vector<Vec2> rt_starts;
  for (const TaskSpec& t : s.tasks) {
    if (t.kind != TaskKind::RealTime) continue;
    rt_starts.push_back(s.topo.device(t.device_id).start);
  }
  REQUIRE(rt_starts.size() == 100);
  // Every robot has a groupmate well inside a shared AP's range, so pairwise
  // distances within a set stay under twice the uc24 cutoff.
  for (size_t i = 0; i < rt_starts.size(); ++i) {
    double nearest = 1e18;
    for (size_t j = 0; j < rt_starts.size(); ++j) {
      if (i == j) continue;
      nearest = std::min(nearest, distance(rt_starts[i], rt_starts[j]));
    }
    CHECK(nearest <= 2 * 45.0 + 1e-9);
    CHECK(nearest <= 2 * cutoff);
  }
  // And every robot can reach at least one AP.
  for (const Vec2& p : rt_starts)
    CHECK(!s.topo.routers_in_range(p, Mode::Uc24, m).empty());
}

TEST_CASE("scenario json round trip") {
  Scenario s = generate_scenario1(3, 0.3);
  std::string once = scenario_to_json(s);
  Scenario back = scenario_from_json(once);
  CHECK(scenario_to_json(back) == once);
  CHECK(back.tasks.size() == s.tasks.size());
  CHECK(back.topo.devices().size() == s.topo.devices().size());
}

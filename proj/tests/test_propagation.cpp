#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

using namespace cropmesh;

TEST_CASE("log fit recovers exact log-linear data") {
  std::vector<TracePoint> pts = {{std::exp(1.0), 10.0},
                                 {std::exp(2.0), 8.0},
                                 {std::exp(3.0), 6.0}};
  ModeFit f = fit_mode(pts);
  CHECK(f.alpha == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(f.beta == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(f.cutoff_m == doctest::Approx(std::exp(6.0)).epsilon(1e-9));

  // Residuals on the input are zero to machine precision.
  for (const auto& p : pts)
    CHECK(std::abs(f.alpha + f.beta * std::log(p.distance_m) -
                   p.throughput_mbps) < 1e-9);
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(fit_mode(std::vector<TracePoint>{{10, 5}, {20, 4}}), Error);
  CHECK_THROWS_AS(
      fit_mode(std::vector<TracePoint>{{10, 5}, {10, 4}, {10, 3}}), Error);
  // Increasing throughput with distance has a non-negative slope.
  CHECK_THROWS_AS(
      fit_mode(std::vector<TracePoint>{{10, 1}, {20, 2}, {40, 3}}), Error);
  CHECK_THROWS_AS(
      fit_mode(std::vector<TracePoint>{{-1, 1}, {20, 2}, {40, 3}}), Error);
}

TEST_CASE("zero-throughput points pin the cutoff") {
  std::vector<TracePoint> pts = {{5, 90}, {10, 60}, {20, 30},
                                 {40, 0}, {60, 0}};
  ModeFit f = fit_mode(pts);
  CHECK(f.cutoff_m == doctest::Approx(40.0));
  ThroughputModel m;
  m.set(Mode::Uc5, f);
  CHECK(m.throughput(Mode::Uc5, 40.0) == 0.0);
  CHECK(m.throughput(Mode::Uc5, 100.0) == 0.0);
  CHECK(m.throughput(Mode::Uc5, 10.0) == doctest::Approx(60.0).epsilon(1e-9));
}

TEST_CASE("throughput evaluation") {
  auto m = test::exact_model(12.0, -2.0);
  CHECK(m.throughput(Mode::Ac5, std::exp(2.0)) == doctest::Approx(8.0));
  CHECK(m.throughput(Mode::Ac5, std::exp(6.0)) == 0.0);
  CHECK(m.throughput(Mode::Ac5, 1e9) == 0.0);
  CHECK_THROWS_AS(m.throughput(Mode::Ac5, 0.0), Error);
  CHECK_THROWS_AS(m.throughput(Mode::Ac5, -3.0), Error);

  // Monotone non-increasing in distance.
  double prev = 1e18;
  for (double d = 0.5; d < 500; d *= 1.17) {
    double t = m.throughput(Mode::Ac5, d);
    CHECK(t <= prev + 1e-12);
    prev = t;
  }
}

TEST_CASE("fixture anchors") {
  const ThroughputModel& m = test::fixture_model();
  CHECK(m.throughput(Mode::Ac5, 80) == doctest::Approx(100.0).epsilon(0.10));
  CHECK(m.throughput(Mode::Uc24, 80) == doctest::Approx(7.5).epsilon(0.10));
  CHECK(m.cutoff(Mode::Uc5) == doctest::Approx(40.0).epsilon(0.10));
  CHECK(m.throughput(Mode::Ac24, 100) ==
        doctest::Approx(m.throughput(Mode::Ac5, 100) / 2.5).epsilon(0.10));
  CHECK(m.cutoff(Mode::Ac24) > m.cutoff(Mode::Ac5));
}

TEST_CASE("trace with a missing mode fits the others") {
  std::vector<std::pair<Mode, TracePoint>> trace;
  for (const auto& [mode, pt] :
       load_trace_csv(std::string(CROPMESH_DATA_DIR) + "/fixture_trace.csv"))
    if (mode != Mode::Uc5) trace.emplace_back(mode, pt);
  ThroughputModel m = fit_trace(trace);
  CHECK(m.has(Mode::Uc24));
  CHECK(m.has(Mode::Ac5));
  CHECK(!m.has(Mode::Uc5));
  CHECK_THROWS_AS(m.throughput(Mode::Uc5, 10.0), Error);
}

TEST_CASE("model json round trip") {
  const ThroughputModel& m = test::fixture_model();
  ThroughputModel m2 = ThroughputModel::from_json(m.to_json());
  for (int i = 0; i < kNumModes; ++i) {
    Mode mode = static_cast<Mode>(i);
    REQUIRE(m2.has(mode));
    CHECK(m2.fit(mode).alpha == m.fit(mode).alpha);
    CHECK(m2.fit(mode).beta == m.fit(mode).beta);
    CHECK(m2.fit(mode).cutoff_m == m.fit(mode).cutoff_m);
  }
}

TEST_CASE("spatial multiplier distribution and determinism") {
  VariationModel vm;
  vm.seed = 77;

  SUBCASE("zero stddev degenerates to 1") {
    vm.spatial_stddev = 0;
    CHECK(vm.spatial_multiplier(3, 9) == 1.0);
  }

  SUBCASE("same key twice gives the same value") {
    double a = vm.spatial_multiplier(5, 12);
    double b = vm.spatial_multiplier(5, 12);
    CHECK(a == b);
    CHECK(vm.spatial_multiplier(5, 13) != a);
  }

  SUBCASE("sample moments match the configured deviation") {
    double sum = 0, sum2 = 0;
    int n = 10000;
    for (int i = 0; i < n; ++i) {
      double v = vm.spatial_multiplier(i, i / 7);
      CHECK(v >= 0.1);
      CHECK(v <= 2.0);
      sum += v;
      sum2 += v * v;
    }
    double mean = sum / n;
    double sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(sd > 0.28);
    CHECK(sd < 0.32);
  }

  SUBCASE("temporal stream is independent of the spatial one") {
    CHECK(vm.temporal_multiplier(5, 12) != vm.spatial_multiplier(5, 12));
    double sum2 = 0, sum = 0;
    int n = 10000;
    for (int i = 0; i < n; ++i) {
      double v = vm.temporal_multiplier(i, i / 3);
      sum += v;
      sum2 += v * v;
    }
    double mean = sum / n;
    CHECK(std::sqrt(sum2 / n - mean * mean) == doctest::Approx(0.10).epsilon(0.2));
  }
}

#pragma once

#include <cmath>

#include "cropmesh/config.hpp"
#include "cropmesh/sim.hpp"
#include "cropmesh/te.hpp"

namespace cropmesh::test {

inline const ThroughputModel& fixture_model() {
  static ThroughputModel model =
      fit_trace(load_trace_csv(std::string(CROPMESH_DATA_DIR) +
                               "/fixture_trace.csv"));
  return model;
}

// Exact log model for hand arithmetic: T(d) = alpha + beta ln d.
inline ThroughputModel exact_model(double alpha, double beta,
                                   double cutoff = 0) {
  ThroughputModel m;
  ModeFit f;
  f.alpha = alpha;
  f.beta = beta;
  f.cutoff_m = cutoff > 0 ? cutoff : std::exp(-alpha / beta);
  for (int i = 0; i < kNumModes; ++i) m.set(static_cast<Mode>(i), f);
  return m;
}

// Replays a fixed plan forever; for driving the spectrum model directly.
class ManualPlanner : public Planner {
 public:
  explicit ManualPlanner(EpochPlan row) : row_(std::move(row)) {}
  TePlan plan(const WorldView& w) override {
    TePlan p;
    p.start = w.now;
    for (int64_t e = w.now; e < std::min(w.now + w.te.invocation_period,
                                         w.horizon); ++e) {
      EpochPlan r = row_;
      r.epoch = e;
      p.rows.push_back(std::move(r));
    }
    return p;
  }
  std::string name() const override { return "manual"; }

 private:
  EpochPlan row_;
};

inline FlowKnobs knob(int64_t flow, double rate, int32_t ap, int channel,
                      std::vector<int32_t> route) {
  FlowKnobs k;
  k.flow = flow;
  k.rate_mbps = rate;
  k.ap = ap;
  k.channel = channel;
  k.route = std::move(route);
  return k;
}

}  // namespace cropmesh::test

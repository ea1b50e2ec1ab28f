// Experiment driver: fit throughput models from trace CSVs, run single
// simulations, sweep policy/seed grids, and report greedy-vs-optimal gaps on
// tiny instances.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "cropmesh/baselines.hpp"
#include "cropmesh/config.hpp"
#include "cropmesh/oracle.hpp"
#include "cropmesh/sim.hpp"

namespace fs = std::filesystem;
using namespace cropmesh;
using nlohmann::ordered_json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string plan_row_json(const EpochPlan& row) {
  ordered_json j;
  j["epoch"] = row.epoch;
  auto& flows = j["flows"] = ordered_json::array();
  for (const FlowKnobs& k : row.flows) {
    ordered_json f;
    f["id"] = k.flow;
    f["status"] = k.paused ? "paused" : "scheduled";
    if (!k.paused) {
      f["rate_mbps"] = k.rate_mbps;
      f["ap"] = k.ap;
      f["channel"] = k.channel;
      f["route"] = k.route;
    }
    flows.push_back(f);
  }
  auto& ch = j["router_channels"] = ordered_json::object();
  for (size_t r = 0; r < row.router_ch24.size(); ++r)
    if (row.router_ch24[r] != kNoChannel)
      ch[std::to_string(r)] = row.router_ch24[r];
  return j.dump();
}

// Committed fractions implied by a plan row, for the ledger dump.
std::string ledger_rows_csv(const EpochPlan& row, const Scenario& scn,
                            const ThroughputModel& model) {
  RadioEnv env(scn.topo, model);
  env.router_ch24 = row.router_ch24;
  std::map<int64_t, const TaskSpec*> by_id;
  for (const TaskSpec& t : scn.tasks) by_id[t.id] = &t;
  std::vector<std::pair<FlowPath, double>> paths;
  for (const FlowKnobs& k : row.flows) {
    if (k.paused || k.rate_mbps <= 0) continue;
    const TaskSpec* t = by_id.at(k.flow);
    FlowPath p;
    p.device_index = scn.topo.device_index(t->device_id);
    const Device& dev = scn.topo.devices()[p.device_index];
    p.device_pos = dev.position_at(row.epoch);
    p.access_mode = dev.above_canopy ? Mode::Ac24 : Mode::Uc24;
    p.access_channel = k.channel;
    p.route = k.route;
    env.devices.push_back({p.device_index, p.device_pos, k.channel});
    paths.emplace_back(std::move(p), k.rate_mbps);
  }
  std::vector<double> committed(env.slots.count(), 0.0);
  for (const auto& [p, rate] : paths) {
    ResourceFootprint fp = flow_footprint(p, rate, env);
    for (const auto& [slot, v] : fp.entries()) committed[slot] += v;
  }
  std::string out;
  char buf[64];
  for (int32_t s = 0; s < static_cast<int32_t>(committed.size()); ++s) {
    if (committed[s] <= 0) continue;
    std::snprintf(buf, sizeof buf, "%.9f", committed[s]);
    out += std::to_string(row.epoch) + "," +
           slot_node_name(env.slots, scn.topo, s) + "," +
           slot_band_name(env.slots, s) + "," + buf + "\n";
  }
  return out;
}

struct RunArtifacts {
  SimReport report;
  std::string plans_jsonl;
  std::string ledger_csv;
  std::string utilization_csv;
};

RunArtifacts execute_run(const RunConfig& cfg, const Scenario& scn,
                         const ThroughputModel& model, bool dumps) {
  SimParams sim = cfg.sim;
  sim.horizon = cfg.horizon_override >= 0 ? cfg.horizon_override : scn.horizon;
  auto planner = make_planner(cfg.policy);

  RunArtifacts art;
  RunHooks hooks;
  if (dumps) {
    art.ledger_csv = "epoch,node,band,committed_fraction\n";
    art.utilization_csv = "epoch,node,band,utilization\n";
    hooks.on_plan = [&](const TePlan& plan, const WorldView&) {
      for (const EpochPlan& row : plan.rows) {
        art.plans_jsonl += plan_row_json(row) + "\n";
        art.ledger_csv += ledger_rows_csv(row, scn, model);
      }
    };
    hooks.on_epoch_load = [&](int64_t epoch, const std::vector<double>& load,
                              const SlotSpace& slots) {
      char buf[64];
      for (int32_t s = 0; s < static_cast<int32_t>(load.size()); ++s) {
        if (load[s] <= 0) continue;
        std::snprintf(buf, sizeof buf, "%.9f", load[s]);
        art.utilization_csv += std::to_string(epoch) + "," +
                               slot_node_name(slots, scn.topo, s) + "," +
                               slot_band_name(slots, s) + "," + buf + "\n";
      }
    };
  }
  art.report = run(scn, *planner, model, sim, cfg.te, hooks);
  return art;
}

int cmd_fit(const std::string& trace_path, const std::string& out_path) {
  auto trace = load_trace_csv(trace_path);
  std::map<Mode, std::vector<TracePoint>> by_mode;
  for (const auto& [m, p] : trace) by_mode[m].push_back(p);

  ThroughputModel model;
  for (const auto& [m, pts] : by_mode) {
    try {
      model.set(m, fit_mode(pts));
    } catch (const Error& e) {
      std::cerr << "warning: mode " << mode_name(m) << " not fitted: "
                << e.what() << "\n";
    }
  }
  bool any = false;
  for (int i = 0; i < kNumModes; ++i) any |= model.has(static_cast<Mode>(i));
  if (!any) throw ConfigError("no mode could be fitted from " + trace_path);
  write_file(out_path, model.to_json());
  std::cout << "wrote " << out_path << "\n";

  // Residuals at the reference operating points.
  auto report = [&](const char* label, double got, double want) {
    std::printf("  %-28s %9.3f vs %9.3f  (%+.1f%%)\n", label, got, want,
                want != 0 ? 100.0 * (got - want) / want : 0.0);
  };
  std::cout << "anchor residuals:\n";
  if (model.has(Mode::Ac5))
    report("ac5 @ 80 m (Mbps)", model.throughput(Mode::Ac5, 80), 100.0);
  if (model.has(Mode::Uc24))
    report("uc24 @ 80 m (Mbps)", model.throughput(Mode::Uc24, 80), 7.5);
  if (model.has(Mode::Uc5))
    report("uc5 cutoff (m)", model.cutoff(Mode::Uc5), 40.0);
  if (model.has(Mode::Ac24) && model.has(Mode::Ac5))
    report("ac24 @ 100 m (Mbps)", model.throughput(Mode::Ac24, 100),
           model.throughput(Mode::Ac5, 100) / 2.5);
  return 0;
}

int cmd_run(const std::string& config_path, const CliOverrides& ov,
            const std::string& emit_workload, bool full_dumps) {
  RunConfig cfg = load_run_config(config_path, ov);
  ThroughputModel model = load_model_for(cfg);
  Scenario scn = build_scenario(cfg, model);

  if (!emit_workload.empty()) {
    write_file(emit_workload, scenario_to_json(scn));
    std::cout << "wrote " << emit_workload << "\n";
  }

  std::string dir = run_dir(cfg);
  RunArtifacts art = execute_run(cfg, scn, model, full_dumps);
  write_file(dir + "/config.json", effective_config_json(cfg));
  write_file(dir + "/report.csv", art.report.report_csv());
  write_file(dir + "/summary.json", art.report.summary_json());
  if (full_dumps) {
    write_file(dir + "/plans.jsonl", art.plans_jsonl);
    write_file(dir + "/ledger.csv", art.ledger_csv);
    write_file(dir + "/utilization.csv", art.utilization_csv);
  }
  std::cout << dir << "\n";
  std::printf("policy=%s total=%.1f MB realtime=%.1f MB norm_mean=%.3f "
              "violations=%d\n",
              policy_name(cfg.policy), art.report.total_mb,
              art.report.realtime_mb, art.report.norm_mean,
              art.report.violations);
  return 0;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_sweep(const std::string& config_path, const CliOverrides& ov,
              const std::vector<std::string>& policies,
              const std::vector<uint64_t>& seeds, int jobs) {
  if (policies.empty()) throw ConfigError("sweep needs --policies");
  if (seeds.empty()) throw ConfigError("sweep needs --seeds");
  for (const auto& p : policies)
    if (!policy_from_name(p)) throw ConfigError("unknown policy: " + p);

  struct Cell {
    std::string policy;
    uint64_t seed;
    SimReport report;
    std::string dir;
  };
  std::vector<Cell> cells;
  for (const auto& p : policies)
    for (uint64_t s : seeds) cells.push_back({p, s, {}, {}});

  std::atomic<size_t> next{0};
  std::mutex io_mu;
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      Cell& c = cells[i];
      CliOverrides o = ov;
      o.policy = c.policy;
      o.seed = c.seed;
      RunConfig cfg = load_run_config(config_path, o);
      ThroughputModel model = load_model_for(cfg);
      Scenario scn = build_scenario(cfg, model);
      RunArtifacts art = execute_run(cfg, scn, model, /*dumps=*/false);
      c.report = std::move(art.report);
      c.dir = run_dir(cfg);
      write_file(c.dir + "/config.json", effective_config_json(cfg));
      write_file(c.dir + "/summary.json", c.report.summary_json());
      std::lock_guard<std::mutex> lk(io_mu);
      std::printf("done %-10s seed=%llu total=%.1f MB norm=%.3f\n",
                  c.policy.c_str(), static_cast<unsigned long long>(c.seed),
                  c.report.total_mb, c.report.norm_mean);
    }
  };
  if (jobs < 1) jobs = 1;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string csv =
      "policy,seed,total_mb,realtime_mb,collection_mb,norm_mean,norm_p50,"
      "violations,run_dir\n";
  char buf[256];
  for (const Cell& c : cells) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%.3f,%.3f,%.3f,%.4f,%.4f,%d,%s\n",
                  c.policy.c_str(), static_cast<unsigned long long>(c.seed),
                  c.report.total_mb, c.report.realtime_mb,
                  c.report.collection_mb, c.report.norm_mean,
                  c.report.norm_p50, c.report.violations, c.dir.c_str());
    csv += buf;
  }
  csv += "#policy,median_total_mb,median_norm_mean\n";
  for (const auto& p : policies) {
    std::vector<double> totals, norms;
    for (const Cell& c : cells)
      if (c.policy == p) {
        totals.push_back(c.report.total_mb);
        norms.push_back(c.report.norm_mean);
      }
    std::snprintf(buf, sizeof buf, "#%s,%.3f,%.4f\n", p.c_str(),
                  median(totals), median(norms));
    csv += buf;
  }

  CliOverrides o = ov;
  o.policy = policies.front();
  o.seed = seeds.front();
  RunConfig base = load_run_config(config_path, o);
  std::string out = base.out_root + "/sweep-" + config_hash8(base) +
                    "/aggregate.csv";
  write_file(out, csv);
  std::cout << out << "\n";
  return 0;
}

int cmd_oracle_gap(int instances, uint64_t seed, const std::string& trace,
                   const std::string& out_dir) {
  ThroughputModel model = fit_trace(load_trace_csv(trace));
  ordered_json rows = ordered_json::array();
  int central_le_opt = 0, central_ge_naive = 0;
  std::vector<double> ratios, naive_ratios;
  for (int i = 0; i < instances; ++i) {
    auto inst = oracle::make_tiny_instance(seed + i);
    auto opt = oracle::brute_force_optimal(inst, model);

    SimParams sp;
    sp.horizon = inst.scn.horizon;
    sp.seed = seed + i;
    sp.spatial_stddev = 0;
    sp.temporal_stddev = 0;
    TeParams tp;
    tp.invocation_period = static_cast<int>(inst.scn.horizon);

    auto central = make_planner(PolicyId::CentralRouting);
    auto naive = make_planner(PolicyId::NaiveMesh);
    double c_mb = run(inst.scn, *central, model, sp, tp).total_mb;
    double n_mb = run(inst.scn, *naive, model, sp, tp).total_mb;

    if (c_mb <= opt.objective_mb + 1e-6) ++central_le_opt;
    if (c_mb >= n_mb - 1e-9) ++central_ge_naive;
    if (opt.objective_mb > 0) {
      ratios.push_back(c_mb / opt.objective_mb);
      naive_ratios.push_back(n_mb / opt.objective_mb);
    }
    rows.push_back({{"seed", seed + i},
                    {"optimal_mb", opt.objective_mb},
                    {"central_mb", c_mb},
                    {"naive_mb", n_mb}});
  }
  ordered_json j;
  j["instances"] = instances;
  j["central_le_optimal"] = central_le_opt;
  j["central_ge_naive"] = central_ge_naive;
  j["median_central_over_optimal"] = median(ratios);
  j["median_naive_over_optimal"] = median(naive_ratios);
  j["rows"] = rows;
  std::string path = out_dir + "/gap_report.json";
  write_file(path, j.dump(2) + "\n");
  std::cout << path << "\n";
  std::printf("central<=optimal on %d/%d, central>=naive on %d/%d, median "
              "greedy/optimal %.3f\n",
              central_le_opt, instances, central_ge_naive, instances,
              median(ratios));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-tier farm mesh simulator and traffic engine"};
  app.require_subcommand(1);

  std::string trace_path, out_path = "models.json";
  auto* fit = app.add_subcommand("fit", "fit throughput models from a trace");
  fit->add_option("--trace", trace_path, "trace CSV")->required();
  fit->add_option("--out", out_path, "output models.json");

  std::string config_path, emit_workload;
  std::string policy_s, out_s, trace_s;
  int64_t seed_v = -1;
  double scale_v = -1;
  bool full_dumps = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config JSON")->required();
    cmd->add_option("--policy", policy_s, "policy override");
    cmd->add_option("--seed", seed_v, "seed override");
    cmd->add_option("--scale", scale_v, "scale override");
    cmd->add_option("--trace", trace_s, "trace override");
    cmd->add_option("--out", out_s, "output root override");
  };

  auto* runc = app.add_subcommand("run", "run one simulation");
  add_common(runc);
  runc->add_option("--emit-workload", emit_workload,
                   "write the generated workload for replay");
  runc->add_flag("--full-dumps", full_dumps, "write plan/ledger/utilization dumps");

  std::string policies_s, seeds_s;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  auto* sweep = app.add_subcommand("sweep", "run a policy x seed grid");
  add_common(sweep);
  sweep->add_option("--policies", policies_s, "comma-separated policies")
      ->required();
  sweep->add_option("--seeds", seeds_s, "comma-separated seeds")->required();
  sweep->add_option("--jobs", jobs, "worker threads");

  int instances = 100;
  uint64_t gap_seed = 1;
  std::string gap_trace, gap_out = "runs/oracle";
  auto* gap = app.add_subcommand("oracle-gap",
                                 "greedy vs brute-force optimal on tiny instances");
  gap->add_option("--instances", instances, "instance count");
  gap->add_option("--seed", gap_seed, "base seed");
  gap->add_option("--trace", gap_trace, "trace CSV")->required();
  gap->add_option("--out", gap_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  CliOverrides ov;
  if (!policy_s.empty()) ov.policy = policy_s;
  if (seed_v >= 0) ov.seed = static_cast<uint64_t>(seed_v);
  if (scale_v > 0) ov.scale = scale_v;
  if (!trace_s.empty()) ov.trace = trace_s;
  if (!out_s.empty()) ov.out = out_s;

  try {
    if (fit->parsed()) return cmd_fit(trace_path, out_path);
    if (runc->parsed()) return cmd_run(config_path, ov, emit_workload, full_dumps);
    if (sweep->parsed()) {
      std::vector<std::string> policies;
      for (std::stringstream ss(policies_s); ss.good();) {
        std::string tok;
        if (std::getline(ss, tok, ',') && !tok.empty()) policies.push_back(tok);
      }
      std::vector<uint64_t> seeds;
      for (std::stringstream ss(seeds_s); ss.good();) {
        std::string tok;
        if (std::getline(ss, tok, ',') && !tok.empty())
          seeds.push_back(std::stoull(tok));
      }
      return cmd_sweep(config_path, ov, policies, seeds, jobs);
    }
    if (gap->parsed()) return cmd_oracle_gap(instances, gap_seed, gap_trace, gap_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

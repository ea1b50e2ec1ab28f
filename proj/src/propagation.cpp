#include "cropmesh/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cropmesh/rng.hpp"
#include "json.hpp"

namespace cropmesh {

Band band_of(Mode m) {
  return (m == Mode::Uc24 || m == Mode::Ac24) ? Band::GHz24 : Band::GHz5;
}

Tier tier_of(Mode m) {
  return (m == Mode::Uc24 || m == Mode::Uc5) ? Tier::UnderCanopy
                                             : Tier::AboveCanopy;
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Uc24: return "uc24";
    case Mode::Ac24: return "ac24";
    case Mode::Uc5: return "uc5";
    case Mode::Ac5: return "ac5";
  }
  return "?";
}

std::optional<Mode> mode_from_name(const std::string& s) {
  for (int i = 0; i < kNumModes; ++i) {
    Mode m = static_cast<Mode>(i);
    if (s == mode_name(m)) return m;
  }
  return std::nullopt;
}

ModeFit fit_mode(std::span<const TracePoint> points) {
  std::vector<TracePoint> pos;
  double min_zero_dist = 0;
  bool have_zero = false;
  for (const auto& p : points) {
    if (p.distance_m <= 0) throw Error("trace distance must be > 0");
    if (p.throughput_mbps > 0) {
      pos.push_back(p);
    } else {
      if (!have_zero || p.distance_m < min_zero_dist) min_zero_dist = p.distance_m;
      have_zero = true;
    }
  }
  if (pos.size() < 3) throw Error("need at least 3 nonzero trace points per mode");

  // Least squares of T against ln d.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pos) {
    double x = std::log(p.distance_m);
    sx += x;
    sy += p.throughput_mbps;
    sxx += x * x;
    sxy += x * p.throughput_mbps;
  }
  double n = static_cast<double>(pos.size());
  double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-12 * n * sxx + 1e-300)
    throw Error("trace distances are all identical; cannot fit");

  ModeFit f;
  f.beta = (n * sxy - sx * sy) / denom;
  f.alpha = (sy - f.beta * sx) / n;
  if (f.beta >= 0)
    throw Error("fitted slope is non-negative; trace unusable");
  f.cutoff_m = have_zero ? min_zero_dist : std::exp(-f.alpha / f.beta);
  return f;
}

const ModeFit& ThroughputModel::fit(Mode m) const {
  const auto& f = fits_[static_cast<int>(m)];
  if (!f) throw Error(std::string("no fitted model for mode ") + mode_name(m));
  return *f;
}

double ThroughputModel::throughput(Mode m, double d) const {
  if (d <= 0) throw Error("throughput query requires distance > 0");
  const ModeFit& f = fit(m);
  if (d >= f.cutoff_m) return 0.0;
  return std::max(0.0, f.alpha + f.beta * std::log(d));
}

std::string ThroughputModel::to_json() const {
  nlohmann::ordered_json j;
  for (int i = 0; i < kNumModes; ++i) {
    Mode m = static_cast<Mode>(i);
    if (!has(m)) continue;
    const ModeFit& f = fit(m);
    j[mode_name(m)] = {{"alpha", f.alpha}, {"beta", f.beta}, {"cutoff_m", f.cutoff_m}};
  }
  return j.dump(2) + "\n";
}

ThroughputModel ThroughputModel::from_json(const std::string& text) {
  ThroughputModel model;
  auto j = nlohmann::json::parse(text);
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto m = mode_from_name(it.key());
    if (!m) throw Error("unknown mode in model json: " + it.key());
    ModeFit f;
    f.alpha = it.value().at("alpha").get<double>();
    f.beta = it.value().at("beta").get<double>();
    f.cutoff_m = it.value().at("cutoff_m").get<double>();
    model.set(*m, f);
  }
  return model;
}

std::vector<std::pair<Mode, TracePoint>> load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  std::vector<std::pair<Mode, TracePoint>> out;
  std::string line;
  bool first = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("mode,", 0) == 0) continue;  // header
    }
    std::stringstream ss(line);
    std::string mode_s, d_s, t_s;
    if (!std::getline(ss, mode_s, ',') || !std::getline(ss, d_s, ',') ||
        !std::getline(ss, t_s, ','))
      throw Error("malformed trace line " + std::to_string(lineno));
    auto m = mode_from_name(mode_s);
    if (!m) throw Error("unknown mode '" + mode_s + "' at trace line " +
                        std::to_string(lineno));
    TracePoint p;
    try {
      p.distance_m = std::stod(d_s);
      p.throughput_mbps = std::stod(t_s);
    } catch (const std::exception&) {
      throw Error("malformed number at trace line " + std::to_string(lineno));
    }
    out.emplace_back(*m, p);
  }
  return out;
}

ThroughputModel fit_trace(const std::vector<std::pair<Mode, TracePoint>>& trace) {
  std::map<Mode, std::vector<TracePoint>> by_mode;
  for (const auto& [m, p] : trace) by_mode[m].push_back(p);
  ThroughputModel model;
  for (const auto& [m, pts] : by_mode) model.set(m, fit_mode(pts));
  return model;
}

namespace {
double clamped_normal_multiplier(double stddev, uint64_t key) {
  if (stddev <= 0) return 1.0;
  double v = 1.0 + stddev * normal01(key);
  return std::clamp(v, 0.1, 2.0);
}
}  // namespace

double VariationModel::spatial_multiplier(int64_t device_id, int64_t epoch) const {
  return clamped_normal_multiplier(
      spatial_stddev, hash_key(seed, 1, static_cast<uint64_t>(device_id),
                               static_cast<uint64_t>(epoch)));
}

double VariationModel::temporal_multiplier(int64_t node_id, int64_t epoch) const {
  return clamped_normal_multiplier(
      temporal_stddev, hash_key(seed, 2, static_cast<uint64_t>(node_id),
                                static_cast<uint64_t>(epoch)));
}

}  // namespace cropmesh

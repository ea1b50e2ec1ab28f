#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cropmesh {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Band : uint8_t { GHz24, GHz5 };
enum class Tier : uint8_t { UnderCanopy, AboveCanopy };

// The four link modes: band x transmission height relative to the canopy.
enum class Mode : uint8_t { Uc24 = 0, Ac24 = 1, Uc5 = 2, Ac5 = 3 };
constexpr int kNumModes = 4;

Band band_of(Mode m);
Tier tier_of(Mode m);
const char* mode_name(Mode m);                 // uc24|ac24|uc5|ac5
std::optional<Mode> mode_from_name(const std::string& s);

struct TracePoint {
  double distance_m = 0;
  double throughput_mbps = 0;
};

// T(d) = alpha + beta*ln d, clamped at zero and cut off hard beyond cutoff_m.
struct ModeFit {
  double alpha = 0;    // Mbps
  double beta = 0;     // Mbps per ln-meter, negative
  double cutoff_m = 0; // throughput is 0 at and beyond this distance
};

// Fits one mode from trace points. Points with zero throughput are excluded
// from the regression and instead pin the cutoff (smallest such distance).
ModeFit fit_mode(std::span<const TracePoint> points);

class ThroughputModel {
 public:
  void set(Mode m, ModeFit fit) { fits_[static_cast<int>(m)] = fit; }
  bool has(Mode m) const { return fits_[static_cast<int>(m)].has_value(); }
  const ModeFit& fit(Mode m) const;

  // Max achievable rate in Mbps over distance d for the mode; d must be > 0.
  double throughput(Mode m, double d) const;
  double cutoff(Mode m) const { return fit(m).cutoff_m; }

  std::string to_json() const;
  static ThroughputModel from_json(const std::string& text);

 private:
  std::array<std::optional<ModeFit>, kNumModes> fits_;
};

// Trace CSV: header "mode,distance_m,throughput_mbps".
std::vector<std::pair<Mode, TracePoint>> load_trace_csv(const std::string& path);
ThroughputModel fit_trace(const std::vector<std::pair<Mode, TracePoint>>& trace);

// Multiplicative throughput deviation. Draws are pure functions of
// (seed, id, epoch), clamped to [0.1, 2.0], mean 1.
struct VariationModel {
  double spatial_stddev = 0.30;
  double temporal_stddev = 0.10;
  uint64_t seed = 0;

  double spatial_multiplier(int64_t device_id, int64_t epoch) const;
  double temporal_multiplier(int64_t node_id, int64_t epoch) const;
};

}  // namespace cropmesh

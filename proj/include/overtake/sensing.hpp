#pragma once

#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "overtake/grid.hpp"
#include "overtake/world.hpp"

namespace overtake::sensing {

using Rng = std::mt19937_64;

enum class Occlusion { Off, Strict };

/// Which left-lane vehicles ahead become front vehicles. Nearest keeps the
/// three nearest; Platoon keeps the nearest one and those filling the
/// segments right beyond it, so the first free segment ahead is a landing gap.
enum class FrontSelection { Nearest, Platoon };

struct SensorConfig {
  double range_360 = 100.0;
  double range_front_right = 357.0;
  double dropout_prob = 0.0;
  double phantom_prob = 0.0;
  double range_jitter_sigma = 0.0;
  /// Extra longitudinal clearance around the AV checked by the side sensor.
  double side_margin = 2.0;
  Occlusion occlusion = Occlusion::Off;
  FrontSelection front_selection = FrontSelection::Platoon;

  bool noiseless() const {
    return dropout_prob == 0.0 && phantom_prob == 0.0 &&
           range_jitter_sigma == 0.0;
  }
  /// Throws std::invalid_argument on negative or out-of-range parameters.
  void validate() const;
};

enum class Provenance { Sensor360, FrontRight, RightSide, Phantom };

std::string_view to_string(Provenance p);

struct Detection {
  grid::Lane lane = grid::Lane::Left;
  /// Ground-truth other.s - av.s.
  double relative_s = 0.0;
  double jittered_s = 0.0;
  Provenance provenance = Provenance::Sensor360;
  /// Absent for phantoms.
  std::optional<int> vehicle_id;
};

/// Left-lane vehicles within range_360, with occlusion and noise applied.
std::vector<Detection> scan_360(const ContinuousWorld& world,
                                const SensorConfig& cfg, Rng& rng);

/// Nearest right-lane vehicle ahead within range_front_right.
std::optional<Detection> scan_front_right(const ContinuousWorld& world,
                                          const SensorConfig& cfg, Rng& rng);

/// Right-lane vehicle overlapping the AV's extent widened by side_margin.
bool scan_right_side(const ContinuousWorld& world, const SensorConfig& cfg);

/// Segment of a relative longitudinal offset: 10 + floor(s / 21).
int segment_of(double relative_s);

/// Left-lane vehicles this far behind the AV are still tracked, so braking
/// back behind a passed vehicle stays checkable.
inline constexpr int kTrackBehind = 3;

struct MergeEvent {
  grid::Lane lane;
  int segment;
  int count;
};

struct Discretised {
  grid::GridState snapshot;
  std::vector<MergeEvent> merges;
  /// Vehicle ids behind each tracked left-lane slot and the oncoming slot,
  /// used to detect newly sensed vehicles. Phantoms contribute nothing.
  std::vector<int> tracked_ids;
  bool has_phantom = false;
};

/// Maps detections onto the AV-centred grid. Left-lane detections from
/// segment 10 - kTrackBehind upward are candidates; up to three are kept,
/// those alongside or ahead (chosen by `selection`) first, then the nearest
/// ones behind.
/// The front-right detection becomes the oncoming vehicle, or segment 10 when
/// only the side sensor fires.
Discretised discretise(const std::vector<Detection>& detections, bool side,
                       grid::Lane av_lane,
                       FrontSelection selection = FrontSelection::Nearest);

/// All three sensors followed by discretise().
struct Scan {
  std::vector<Detection> detections;
  bool side = false;
  Discretised grid;
};

/// `schedule_lag` is how far the AV trails its scheduled position; cells are
/// assigned relative to the schedule so a transient tracking offset does not
/// move vehicles across segment boundaries.
Scan sense(const ContinuousWorld& world, const SensorConfig& cfg, Rng& rng,
           double schedule_lag = 0.0);

/// Noise-free reading of the same world (dropout, phantoms and jitter off).
Discretised ground_truth(const ContinuousWorld& world, const SensorConfig& cfg,
                         double schedule_lag = 0.0);

}  // namespace overtake::sensing

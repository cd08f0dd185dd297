#pragma once

#include <vector>

#include "overtake/grid.hpp"

namespace overtake {

/// Metres per grid segment; one default-speed time step.
inline constexpr double kSegmentLength = 21.0;
/// Default (Drive) speed, 25.2 km/h.
inline constexpr double kDriveSpeed = 7.0;
/// Accelerate speed, 50.4 km/h.
inline constexpr double kAccelerateSpeed = 14.0;
/// Brake operating point, half the default speed.
inline constexpr double kBrakeSpeed = 3.5;
/// Brake floor, 7 km/h.
inline constexpr double kMinSpeed = 7.0 / 3.6;
inline constexpr double kLaneWidth = 3.5;
inline constexpr double kVehicleLength = 4.5;
inline constexpr double kVehicleWidth = 1.8;
inline constexpr double kLaneChangeDuration = 3.0;
inline constexpr double kActionWindow = 3.0;

/// Left-lane vehicles travel in +s, right-lane vehicles in -s; `speed` is a
/// magnitude.
struct ContinuousVehicle {
  int id = 0;
  grid::Lane lane = grid::Lane::Left;
  double s = 0.0;
  double speed = kDriveSpeed;
  double length = kVehicleLength;

  double heading() const { return lane == grid::Lane::Left ? 1.0 : -1.0; }
};

enum class AvSpeedState { Drive, Accelerate, Brake, LaneChangeLeft, LaneChangeRight };

struct AvVehicle {
  double s = 0.0;
  double speed = kDriveSpeed;
  /// Commanded speed; step() relaxes `speed` toward it.
  double speed_target = kDriveSpeed;
  double length = kVehicleLength;
  /// 0 at the left-lane centre, 1 at the right-lane centre.
  double lateral = 0.0;
  AvSpeedState state = AvSpeedState::Drive;

  /// A lane change in progress occupies both lanes.
  bool occupies(grid::Lane lane) const {
    return lane == grid::Lane::Left ? lateral < 1.0 : lateral > 0.0;
  }
  /// Lane the AV is settled in, or heading to.
  grid::Lane lane() const {
    if (state == AvSpeedState::LaneChangeLeft) return grid::Lane::Left;
    if (state == AvSpeedState::LaneChangeRight) return grid::Lane::Right;
    return lateral < 0.5 ? grid::Lane::Left : grid::Lane::Right;
  }
};

struct ContinuousWorld {
  AvVehicle av;
  std::vector<ContinuousVehicle> others;
  double clock = 0.0;
};

}  // namespace overtake

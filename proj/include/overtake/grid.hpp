#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace overtake::grid {

/// Segment index of the autonomous vehicle; all other positions are relative to it.
inline constexpr int kAvSegment = 10;
/// Highest modelled segment. AV at 10 plus the 17-segment front-right sensor reach.
inline constexpr int kGridMax = 27;
/// Maximum number of tracked left-lane vehicles.
inline constexpr int kMaxTracked = 3;
inline constexpr int kDefaultMaxLaneChanges = 4;

enum class Lane : std::uint8_t { Left, Right };

enum class Action : std::uint8_t {
  LeftLaneChange,
  RightLaneChange,
  Accelerate,
  Brake,
  Drive,
};

/// Exploration order used by the depth-first planner.
inline constexpr std::array<Action, 5> kCanonicalOrder = {
    Action::LeftLaneChange, Action::Accelerate, Action::RightLaneChange,
    Action::Drive, Action::Brake};

enum class LaneEffect : std::uint8_t { None, ToLeft, ToRight };

struct ActionDelta {
  int fv_delta;
  int ov_delta;
  LaneEffect lane_effect;
};

constexpr ActionDelta delta_of(Action a) {
  switch (a) {
    case Action::Drive:
      return {0, -2, LaneEffect::None};
    case Action::Accelerate:
      return {-1, -3, LaneEffect::None};
    case Action::LeftLaneChange:
      return {0, -2, LaneEffect::ToLeft};
    case Action::RightLaneChange:
      return {0, -2, LaneEffect::ToRight};
    case Action::Brake:
      return {+1, -3, LaneEffect::None};
  }
  return {0, 0, LaneEffect::None};
}

constexpr bool is_lane_change(Action a) {
  return a == Action::LeftLaneChange || a == Action::RightLaneChange;
}

/// Short mnemonic used in the text formats (RLC, LLC, ACC, BRK, DRV).
std::string_view short_name(Action a);
/// Long name as printed in plan output (e.g. "RightLaneChange").
std::string_view long_name(Action a);
/// Accepts either the short or the long name, case-insensitive.
std::optional<Action> parse_action(std::string_view text);

std::string_view to_string(Lane lane);

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by apply_action when the action's enabling condition is false.
class ActionDisabled : public GridError {
 public:
  using GridError::GridError;
};

/// Raised by apply_action when applied to a crashed or overtaken state.
class TerminalState : public GridError {
 public:
  using GridError::GridError;
};

/// Discrete AV-centred world.
///
/// Left-lane vehicles are kept strictly ascending. When the AV sits in the
/// right lane they may include vehicles alongside (segment 10) or just passed
/// (below 10); the overtake predicate simply requires all of them to be behind.
class GridState {
 public:
  GridState() = default;
  GridState(Lane av_lane, std::span<const int> front_vehicles,
            std::optional<int> oncoming, int lane_changes_used = 0);

  Lane av_lane() const { return av_lane_; }
  std::span<const std::int8_t> front_vehicles() const {
    return {fv_.data(), fv_count_};
  }
  int front_count() const { return fv_count_; }
  std::optional<int> oncoming() const {
    if (ov_ < 0) return std::nullopt;
    return ov_;
  }
  int lane_changes_used() const { return lcc_; }
  bool crashed() const { return crashed_; }
  bool overtaken() const { return overtaken_; }
  bool terminal() const { return crashed_ || overtaken_; }

  /// Dense key over every field; equal keys imply equal states.
  std::uint64_t key() const;

  friend bool operator==(const GridState&, const GridState&) = default;

  /// `lane=L|R; fv=14,16; ov=24; lcc=0`
  std::string to_text() const;
  static GridState from_text(std::string_view text);

 private:
  friend GridState apply_action(const GridState&, Action, int);
  friend bool brake_loses_vehicle(const GridState&);

  std::array<std::int8_t, kMaxTracked> fv_{};
  std::uint8_t fv_count_ = 0;
  std::int8_t ov_ = -1;
  Lane av_lane_ = Lane::Left;
  std::uint8_t lcc_ = 0;
  bool crashed_ = false;
  bool overtaken_ = false;
};

bool is_enabled(const GridState& state, Action action,
                int max_lane_changes = kDefaultMaxLaneChanges);

/// Successor of `state` under `action`. Crash, then overtake, are evaluated on
/// the result; vehicles leaving [0, kGridMax] are dropped.
GridState apply_action(const GridState& state, Action action,
                       int max_lane_changes = kDefaultMaxLaneChanges);

/// True when a Brake would push a left-lane vehicle above kGridMax. The
/// planner treats such successors as leaving the model: a vehicle pushed out
/// of sensor reach has not been overtaken.
bool brake_loses_vehicle(const GridState& state);

/// Static same-cell same-lane check, or the flag set by a tunnelling transition.
bool is_crash(const GridState& state);
bool in_danger_zone(const GridState& state);
/// Meaningful only for non-crashed states.
bool is_overtaken(const GridState& state);

enum class Termination { None, Crashed, Overtaken };

struct ReplayResult {
  std::vector<GridState> trace;
  Termination termination = Termination::None;
  /// Number of plan actions actually applied.
  std::size_t applied = 0;
};

ReplayResult replay(const GridState& initial, std::span<const Action> plan,
                    int max_lane_changes = kDefaultMaxLaneChanges);

}  // namespace overtake::grid

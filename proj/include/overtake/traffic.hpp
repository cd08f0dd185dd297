#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "overtake/grid.hpp"
#include "overtake/planner.hpp"
#include "overtake/sensing.hpp"
#include "overtake/world.hpp"

namespace overtake::sim {

using Rng = std::mt19937_64;

struct SpawnConfig {
  int left_count = 8;
  int right_count = 3;
  std::array<int, 4> left_gap_choices = {1, 2, 3, 4};
  int max_consecutive = 3;
  std::array<int, 4> right_gaps = {8, 12, 16, 20};
  std::array<double, 4> right_gap_probs = {0.125, 0.25, 0.25, 0.375};
  int despawn_behind = 5;

  void validate() const;
};

struct KinematicsConfig {
  double dt = 0.02;
  double max_accel = 2.5;
  /// Position feedback gain of the AV's longitudinal tracker, 1/s.
  double tracker_gain = 1.0;
  /// Offset of every vehicle from the segment boundary at action boundaries.
  double lattice_phase = 5.0;

  void validate() const;
};

/// Advances every vehicle by speed * dt. The AV's speed moves toward its
/// commanded target by at most max_accel * dt; lane changes sweep the lateral
/// coordinate across the lane width in kLaneChangeDuration.
void step(ContinuousWorld& world, double dt, double max_accel);

struct CollisionRecord {
  int other_id = 0;
  grid::Lane lane = grid::Lane::Left;
  double separation = 0.0;
};

std::optional<CollisionRecord> detect_collision(const ContinuousWorld& world);

/// Left-lane gap in segments, uniform over the choices; draws that would
/// extend the front run of adjacent vehicles beyond max_consecutive are
/// redrawn.
int draw_left_gap(const SpawnConfig& cfg, int front_run, Rng& rng);
int draw_right_gap(const SpawnConfig& cfg, Rng& rng);

/// Number of left-lane vehicles at the front of the queue spaced exactly one
/// segment apart.
int front_run_length(const ContinuousWorld& world);

struct SpawnEvent {
  enum class Kind { Spawn, Despawn } kind;
  int id;
  grid::Lane lane;
  double s;
};

/// Removes vehicles more than despawn_behind segments behind the AV and
/// replaces each with a new one in the same lane.
std::vector<SpawnEvent> spawn_despawn(ContinuousWorld& world,
                                      const SpawnConfig& cfg, Rng& rng,
                                      int& next_id);

ContinuousWorld make_initial_world(const SpawnConfig& cfg, double lattice_phase,
                                   Rng& rng, int& next_id);

enum class FailureCause {
  FakeGap,
  PhantomObstacle,
  SameSegmentMerge,
  PlannerNoPath,
  GroundTruthCollision,
  ManualStop,
};

std::string_view to_string(FailureCause cause);
std::optional<FailureCause> parse_failure_cause(std::string_view text);

/// Classifies the sensing error behind a failure by comparing the snapshot a
/// plan was made from with the noise-free reading of the same instant.
/// Returns nothing when the two agree.
std::optional<FailureCause> classify_sensing(const sensing::Discretised& sensed,
                                             const sensing::Discretised& truth);

struct RunMetrics {
  double sim_time = 0.0;
  int overtaken_count = 0;
  double distance_km = 0.0;
  FailureCause failure_cause = FailureCause::ManualStop;
  int plans = 0;
  int replans_new_vehicle = 0;
};

struct StopLimits {
  std::optional<double> distance_km;
  std::optional<double> sim_hours;
  std::optional<int> overtakes;
};

/// Receives one line-delimited JSON record per event.
using EventSink = std::function<void(const std::string&)>;

/// Lane-change budget for closed-loop runs. With 4 the first plan found often
/// opens with a right-left pair that a new oncoming vehicle turns into a loop.
inline constexpr int kClosedLoopMaxLaneChanges = 3;

struct SimulationConfig {
  sensing::SensorConfig sensor;
  SpawnConfig spawn;
  planner::SearchLimits search{.max_lane_changes = kClosedLoopMaxLaneChanges};
  KinematicsConfig kinematics;
  bool spawning = true;
  /// World-state trace decimation in ticks; 0 disables the trace.
  int trace_every = 0;
};

struct ExecutionResult {
  bool completed = false;
  std::optional<CollisionRecord> collision;
};

enum class ReplanReason { QueueEmpty, NewVehicle };

/// Piecewise-constant nominal speed schedule of the AV with its integral.
/// The AV tracks a moving average of this trajectory, which turns each speed
/// step into a ramp centred on the action boundary.
class ReferenceTrajectory {
 public:
  explicit ReferenceTrajectory(double x0 = 0.0, double t0 = 0.0);

  /// Replaces everything from `t` on with `speeds` (duration, speed) pairs,
  /// followed by Drive speed indefinitely.
  void set_future(double t, const std::vector<std::pair<double, double>>& speeds);
  double position(double t) const;
  /// Mean of position() over [t - width/2, t + width/2].
  double smoothed_position(double t, double width) const;
  double smoothed_speed(double t, double width) const;
  /// Drops history older than `t`.
  void forget_before(double t);

 private:
  struct Piece {
    double t0;
    double x0;
    double v;
  };
  std::size_t piece_index(double t) const;
  std::vector<Piece> pieces_;
};

class Simulation {
 public:
  Simulation(SimulationConfig cfg, std::uint64_t seed);
  /// Starts from a prepared world instead of a generated one.
  Simulation(SimulationConfig cfg, std::uint64_t seed, ContinuousWorld world);

  void set_event_sink(EventSink sink) { events_ = std::move(sink); }
  void set_trace_sink(EventSink sink) { trace_ = std::move(sink); }

  const ContinuousWorld& world() const { return world_; }
  ContinuousWorld& mutable_world() { return world_; }
  const RunMetrics& metrics() const { return metrics_; }

  /// Full sense, plan, execute, spawn loop until a stop condition.
  RunMetrics run(const StopLimits& limits);

  /// Executes `actions` to completion without replanning. `observer` sees the
  /// world after every tick.
  ExecutionResult execute_plan(
      const std::vector<grid::Action>& actions,
      const std::function<void(const ContinuousWorld&)>& observer = {});

  /// At an action boundary, before the next action starts: plans from the
  /// current reading when nothing is queued. NoPath halts the run.
  std::optional<planner::PlanResult> plan_if_idle();
  /// Right after an action starts: when the queue has run dry or a vehicle
  /// absent at the last planning time shows up, plans from the grid state the
  /// reading predicts at the end of that action, so the tracker can ramp into
  /// the next plan on time. Falls back to planning from the reading itself,
  /// dropping the started action, when that action is unsafe on it.
  std::optional<planner::PlanResult> plan_ahead();

  std::optional<ReplanReason> last_replan_reason() const {
    return last_replan_reason_;
  }
  const std::deque<grid::Action>& queue() const { return queue_; }

 private:
  bool at_boundary() const { return tick_ == window_end_tick_; }
  double schedule_lag() const {
    return reference_.position(world_.clock) - world_.av.s;
  }
  void begin_next_action();
  void rebuild_reference();
  void settle_on_reference();
  /// One fixed step; returns a collision if one occurred.
  std::optional<CollisionRecord> advance_tick();
  void update_overtakes();
  void emit(const std::string& line);
  FailureCause attribute(FailureCause fallback) const;
  double nominal_speed(grid::Action a) const;
  std::int64_t action_ticks(grid::Action a) const;
  /// Whether the queued actions still replay from `snapshot` without a crash
  /// or danger-zone entry and end in the left lane.
  bool queue_still_valid(const grid::GridState& snapshot) const;

  struct Reading {
    sensing::Scan scan;
    std::vector<int> ids;
    bool new_vehicle = false;
  };
  void use_settled_lane(grid::GridState& snap) const;
  Reading take_reading();
  planner::PlanResult plan_from(const grid::GridState& basis,
                                const Reading& reading, ReplanReason reason,
                                bool ahead);

  SimulationConfig cfg_;
  Rng rng_;
  ContinuousWorld world_;
  int next_id_ = 1;
  std::int64_t tick_ = 0;
  std::int64_t window_end_tick_ = 0;
  std::optional<grid::Action> current_;
  std::deque<grid::Action> queue_;
  planner::PlannerMode queue_mode_ = planner::PlannerMode::Final;
  ReferenceTrajectory reference_;
  double smoothing_width_ = 4.2;
  double start_s_ = 0.0;
  std::vector<int> last_seen_ids_;
  bool planned_once_ = false;
  using ReadingPair = std::pair<sensing::Discretised, sensing::Discretised>;
  /// Sensed and noise-free grids of the latest planning attempt, and of the
  /// plan being executed.
  std::optional<ReadingPair> attempt_reading_;
  std::optional<ReadingPair> executing_reading_;
  std::optional<ReplanReason> last_replan_reason_;
  std::map<int, bool> ahead_;
  RunMetrics metrics_;
  bool halted_ = false;
  EventSink events_;
  EventSink trace_;
};

}  // namespace overtake::sim

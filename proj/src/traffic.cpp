#include "overtake/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace overtake::sim {

using grid::Action;
using grid::Lane;
using nlohmann::json;

void SpawnConfig::validate() const {
  if (left_count < 1 || right_count < 0)
    throw std::invalid_argument("spawn: need at least one left-lane vehicle");
  if (max_consecutive < 1)
    throw std::invalid_argument("spawn: max_consecutive must be positive");
  bool has_breaking_gap = false;
  for (int g : left_gap_choices) {
    if (g < 1) throw std::invalid_argument("spawn: left gaps must be >= 1");
    has_breaking_gap |= g > 1;
  }
  if (!has_breaking_gap)
    throw std::invalid_argument("spawn: some left gap must exceed one segment");
  double total = 0.0;
  for (std::size_t i = 0; i < right_gaps.size(); ++i) {
    if (right_gaps[i] < 1 || right_gap_probs[i] < 0.0)
      throw std::invalid_argument("spawn: invalid right-lane gap entry");
    total += right_gap_probs[i];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("spawn: right-lane gap probabilities must sum to 1");
  if (despawn_behind < 1)
    throw std::invalid_argument("spawn: despawn_behind must be positive");
}

void KinematicsConfig::validate() const {
  if (!(dt > 0.0 && dt <= 0.1))
    throw std::invalid_argument("kinematics: dt must lie in (0, 0.1]");
  if (std::abs(kActionWindow / dt - std::round(kActionWindow / dt)) > 1e-9)
    throw std::invalid_argument("kinematics: dt must divide the 3 s action window");
  if (!(max_accel > 0.0))
    throw std::invalid_argument("kinematics: max_accel must be positive");
  if (!(tracker_gain >= 0.0))
    throw std::invalid_argument("kinematics: tracker_gain must be non-negative");
  if (!(lattice_phase >= 0.0 && lattice_phase < kSegmentLength))
    throw std::invalid_argument("kinematics: lattice_phase must lie in [0, 21)");
}

void step(ContinuousWorld& world, double dt, double max_accel) {
  for (auto& v : world.others) v.s += v.heading() * v.speed * dt;

  auto& av = world.av;
  const double dv =
      std::clamp(av.speed_target - av.speed, -max_accel * dt, max_accel * dt);
  const double v0 = av.speed;
  av.speed += dv;
  av.s += 0.5 * (v0 + av.speed) * dt;

  const double lateral_rate = dt / kLaneChangeDuration;
  if (av.state == AvSpeedState::LaneChangeLeft)
    av.lateral = std::max(0.0, av.lateral - lateral_rate);
  else if (av.state == AvSpeedState::LaneChangeRight)
    av.lateral = std::min(1.0, av.lateral + lateral_rate);

  world.clock += dt;
}

std::optional<CollisionRecord> detect_collision(const ContinuousWorld& world) {
  for (const auto& v : world.others) {
    if (!world.av.occupies(v.lane)) continue;
    const double ds = v.s - world.av.s;
    if (std::abs(ds) < 0.5 * (world.av.length + v.length))
      return CollisionRecord{v.id, v.lane, ds};
  }
  return std::nullopt;
}

int draw_left_gap(const SpawnConfig& cfg, int front_run, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(
      0, cfg.left_gap_choices.size() - 1);
  while (true) {
    const int gap = cfg.left_gap_choices[pick(rng)];
    if (gap == 1 && front_run + 1 > cfg.max_consecutive) continue;
    return gap;
  }
}

int draw_right_gap(const SpawnConfig& cfg, Rng& rng) {
  std::discrete_distribution<std::size_t> pick(cfg.right_gap_probs.begin(),
                                               cfg.right_gap_probs.end());
  return cfg.right_gaps[pick(rng)];
}

int front_run_length(const ContinuousWorld& world) {
  std::vector<double> s;
  for (const auto& v : world.others)
    if (v.lane == Lane::Left) s.push_back(v.s);
  if (s.empty()) return 0;
  std::sort(s.rbegin(), s.rend());
  int run = 1;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (std::abs((s[i - 1] - s[i]) - kSegmentLength) > 0.5) break;
    ++run;
  }
  return run;
}

namespace {

std::optional<double> lane_front(const ContinuousWorld& world, Lane lane) {
  std::optional<double> best;
  for (const auto& v : world.others)
    if (v.lane == lane && (!best || v.s > *best)) best = v.s;
  return best;
}

}  // namespace

std::vector<SpawnEvent> spawn_despawn(ContinuousWorld& world,
                                      const SpawnConfig& cfg, Rng& rng,
                                      int& next_id) {
  std::vector<SpawnEvent> events;
  const double limit = -cfg.despawn_behind * kSegmentLength;
  std::vector<ContinuousVehicle> removed;
  for (const auto& v : world.others)
    if (v.s - world.av.s < limit) removed.push_back(v);
  if (removed.empty()) return events;

  std::erase_if(world.others, [&](const ContinuousVehicle& v) {
    return v.s - world.av.s < limit;
  });
  for (const auto& gone : removed) {
    events.push_back({SpawnEvent::Kind::Despawn, gone.id, gone.lane, gone.s});
    ContinuousVehicle fresh;
    fresh.id = next_id++;
    fresh.lane = gone.lane;
    const double base = lane_front(world, gone.lane).value_or(gone.s);
    const int gap = gone.lane == Lane::Left
                        ? draw_left_gap(cfg, front_run_length(world), rng)
                        : draw_right_gap(cfg, rng);
    fresh.s = base + gap * kSegmentLength;
    world.others.push_back(fresh);
    events.push_back({SpawnEvent::Kind::Spawn, fresh.id, fresh.lane, fresh.s});
  }
  return events;
}

ContinuousWorld make_initial_world(const SpawnConfig& cfg, double lattice_phase,
                                   Rng& rng, int& next_id) {
  cfg.validate();
  ContinuousWorld world;
  double front = lattice_phase;
  int run = 0;
  for (int i = 0; i < cfg.left_count; ++i) {
    const int gap = draw_left_gap(cfg, run, rng);
    run = gap == 1 ? run + 1 : 1;
    front += gap * kSegmentLength;
    world.others.push_back({next_id++, Lane::Left, front});
  }
  double farthest = lattice_phase;
  for (int i = 0; i < cfg.right_count; ++i) {
    farthest += draw_right_gap(cfg, rng) * kSegmentLength;
    world.others.push_back({next_id++, Lane::Right, farthest});
  }
  return world;
}

std::string_view to_string(FailureCause cause) {
  switch (cause) {
    case FailureCause::FakeGap:
      return "fake_gap";
    case FailureCause::PhantomObstacle:
      return "phantom_obstacle";
    case FailureCause::SameSegmentMerge:
      return "same_segment_merge";
    case FailureCause::PlannerNoPath:
      return "planner_no_path";
    case FailureCause::GroundTruthCollision:
      return "ground_truth_collision";
    case FailureCause::ManualStop:
      return "manual_stop";
  }
  return "?";
}

std::optional<FailureCause> parse_failure_cause(std::string_view text) {
  for (auto c : {FailureCause::FakeGap, FailureCause::PhantomObstacle,
                 FailureCause::SameSegmentMerge, FailureCause::PlannerNoPath,
                 FailureCause::GroundTruthCollision, FailureCause::ManualStop})
    if (to_string(c) == text) return c;
  return std::nullopt;
}

std::optional<FailureCause> classify_sensing(const sensing::Discretised& sensed,
                                             const sensing::Discretised& truth) {
  if (!sensed.merges.empty()) return FailureCause::SameSegmentMerge;
  auto cells = [](const grid::GridState& s) {
    std::set<std::pair<int, int>> out;
    for (auto fv : s.front_vehicles()) out.insert({0, fv});
    if (auto ov = s.oncoming()) out.insert({1, *ov});
    return out;
  };
  const auto seen = cells(sensed.snapshot);
  const auto real = cells(truth.snapshot);
  for (const auto& c : real)
    if (!seen.contains(c)) return FailureCause::FakeGap;
  for (const auto& c : seen)
    if (!real.contains(c)) return FailureCause::PhantomObstacle;
  return std::nullopt;
}

// ReferenceTrajectory ------------------------------------------------------

ReferenceTrajectory::ReferenceTrajectory(double x0, double t0)
    : pieces_{{t0, x0, kDriveSpeed}} {}

std::size_t ReferenceTrajectory::piece_index(double t) const {
  auto it = std::upper_bound(
      pieces_.begin(), pieces_.end(), t,
      [](double value, const Piece& p) { return value < p.t0; });
  if (it == pieces_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(pieces_.begin(), it)) - 1;
}

double ReferenceTrajectory::position(double t) const {
  const auto& p = pieces_[piece_index(t)];
  return p.x0 + p.v * (t - p.t0);
}

void ReferenceTrajectory::set_future(
    double t, const std::vector<std::pair<double, double>>& speeds) {
  double x = position(t);
  std::erase_if(pieces_, [t](const Piece& p) { return p.t0 >= t; });
  double tc = t;
  for (const auto& [duration, v] : speeds) {
    pieces_.push_back({tc, x, v});
    tc += duration;
    x += v * duration;
  }
  pieces_.push_back({tc, x, kDriveSpeed});
}

double ReferenceTrajectory::smoothed_position(double t, double width) const {
  const double a = t - 0.5 * width;
  const double b = t + 0.5 * width;
  double integral = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const double start =
        i == 0 ? -std::numeric_limits<double>::infinity() : pieces_[i].t0;
    const double end = i + 1 < pieces_.size()
                           ? pieces_[i + 1].t0
                           : std::numeric_limits<double>::infinity();
    const double lo = std::max(a, start);
    const double hi = std::min(b, end);
    if (hi <= lo) continue;
    const auto& p = pieces_[i];
    const double xl = p.x0 + p.v * (lo - p.t0);
    const double xh = p.x0 + p.v * (hi - p.t0);
    integral += 0.5 * (xl + xh) * (hi - lo);
  }
  return integral / width;
}

double ReferenceTrajectory::smoothed_speed(double t, double width) const {
  return (position(t + 0.5 * width) - position(t - 0.5 * width)) / width;
}

void ReferenceTrajectory::forget_before(double t) {
  std::size_t keep_from = piece_index(t);
  if (keep_from > 0)
    pieces_.erase(pieces_.begin(),
                  pieces_.begin() + static_cast<std::ptrdiff_t>(keep_from));
}

// Simulation ---------------------------------------------------------------

namespace {

ContinuousWorld generated_world(const SimulationConfig& cfg, Rng& rng,
                                int& next_id) {
  if (!cfg.spawning) return {};
  return make_initial_world(cfg.spawn, cfg.kinematics.lattice_phase, rng,
                            next_id);
}

json snapshot_json(const sensing::Discretised& d) {
  json j;
  j["snapshot"] = d.snapshot.to_text();
  j["merges"] = json::array();
  for (const auto& m : d.merges)
    j["merges"].push_back({{"segment", m.segment}, {"count", m.count}});
  return j;
}

}  // namespace

Simulation::Simulation(SimulationConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed) {
  cfg_.sensor.validate();
  cfg_.kinematics.validate();
  cfg_.spawn.validate();
  world_ = generated_world(cfg_, rng_, next_id_);
  reference_ = ReferenceTrajectory(world_.av.s, 0.0);
  smoothing_width_ = (kAccelerateSpeed - kBrakeSpeed) / cfg_.kinematics.max_accel;
  start_s_ = world_.av.s;
  for (const auto& v : world_.others)
    if (v.lane == Lane::Left) ahead_[v.id] = v.s > world_.av.s;
}

Simulation::Simulation(SimulationConfig cfg, std::uint64_t seed,
                       ContinuousWorld world)
    : cfg_(std::move(cfg)), rng_(seed), world_(std::move(world)) {
  cfg_.sensor.validate();
  cfg_.kinematics.validate();
  cfg_.spawn.validate();
  for (const auto& v : world_.others) next_id_ = std::max(next_id_, v.id + 1);
  tick_ = static_cast<std::int64_t>(std::llround(world_.clock / cfg_.kinematics.dt));
  window_end_tick_ = tick_;
  reference_ = ReferenceTrajectory(world_.av.s, world_.clock);
  smoothing_width_ = (kAccelerateSpeed - kBrakeSpeed) / cfg_.kinematics.max_accel;
  start_s_ = world_.av.s;
  for (const auto& v : world_.others)
    if (v.lane == Lane::Left) ahead_[v.id] = v.s > world_.av.s;
}

void Simulation::emit(const std::string& line) {
  if (events_) events_(line);
}

double Simulation::nominal_speed(Action a) const {
  switch (a) {
    case Action::Accelerate:
      return kAccelerateSpeed;
    case Action::Brake:
      return kBrakeSpeed;
    default:
      return kDriveSpeed;
  }
}

std::int64_t Simulation::action_ticks(Action a) const {
  const double window = a == Action::Brake ? 2 * kActionWindow : kActionWindow;
  return static_cast<std::int64_t>(std::llround(window / cfg_.kinematics.dt));
}

void Simulation::begin_next_action() {
  auto& av = world_.av;
  // Settle any lane change that just finished.
  if (av.state == AvSpeedState::LaneChangeLeft) av.lateral = 0.0;
  if (av.state == AvSpeedState::LaneChangeRight) av.lateral = 1.0;

  current_ = queue_.empty() ? Action::Drive : queue_.front();
  if (!queue_.empty()) queue_.pop_front();
  window_end_tick_ = tick_ + action_ticks(*current_);
  switch (*current_) {
    case Action::LeftLaneChange:
      av.state = AvSpeedState::LaneChangeLeft;
      break;
    case Action::RightLaneChange:
      av.state = AvSpeedState::LaneChangeRight;
      break;
    case Action::Accelerate:
      av.state = AvSpeedState::Accelerate;
      break;
    case Action::Brake:
      av.state = AvSpeedState::Brake;
      break;
    case Action::Drive:
      av.state = AvSpeedState::Drive;
      break;
  }
  rebuild_reference();
}

void Simulation::settle_on_reference() {
  // Start mid-ramp, as if the plan had been known one smoothing width ago.
  const double t = world_.clock;
  const double shift =
      reference_.smoothed_position(t, smoothing_width_) - world_.av.s;
  world_.av.s += shift;
  world_.av.speed = reference_.smoothed_speed(t, smoothing_width_);
  start_s_ += shift;
}

void Simulation::rebuild_reference() {
  const double dt = cfg_.kinematics.dt;
  const double now = static_cast<double>(tick_) * dt;
  std::vector<std::pair<double, double>> speeds;
  if (current_)
    speeds.emplace_back(static_cast<double>(window_end_tick_ - tick_) * dt,
                        nominal_speed(*current_));
  for (Action a : queue_)
    speeds.emplace_back(static_cast<double>(action_ticks(a)) * dt,
                        nominal_speed(a));
  reference_.set_future(now, speeds);
  reference_.forget_before(now - smoothing_width_);
}

std::optional<CollisionRecord> Simulation::advance_tick() {
  const auto& kin = cfg_.kinematics;
  const double t = static_cast<double>(tick_) * kin.dt;
  auto& av = world_.av;
  const double error = reference_.smoothed_position(t, smoothing_width_) - av.s;
  av.speed_target =
      std::clamp(reference_.smoothed_speed(t, smoothing_width_) +
                     kin.tracker_gain * error,
                 kMinSpeed, kAccelerateSpeed);
  step(world_, kin.dt, kin.max_accel);
  ++tick_;
  world_.clock = static_cast<double>(tick_) * kin.dt;

  auto collision = detect_collision(world_);
  update_overtakes();
  if (cfg_.spawning) {
    for (const auto& e : spawn_despawn(world_, cfg_.spawn, rng_, next_id_)) {
      const bool spawn = e.kind == SpawnEvent::Kind::Spawn;
      if (e.lane == Lane::Left) {
        if (spawn)
          ahead_[e.id] = e.s > av.s;
        else
          ahead_.erase(e.id);
      }
      emit(json{{"t", world_.clock},
                {"type", spawn ? "spawn" : "despawn"},
                {"id", e.id},
                {"lane", grid::to_string(e.lane)},
                {"s", e.s}}
               .dump());
    }
  }
  if (trace_ && cfg_.trace_every > 0 && tick_ % cfg_.trace_every == 0) {
    json others = json::array();
    for (const auto& v : world_.others)
      others.push_back({v.id, grid::to_string(v.lane), v.s});
    trace_(json{{"t", world_.clock},
                {"av", {{"s", av.s}, {"lateral", av.lateral}, {"speed", av.speed}}},
                {"others", others}}
               .dump());
  }
  return collision;
}

void Simulation::update_overtakes() {
  for (const auto& v : world_.others) {
    if (v.lane != Lane::Left) continue;
    const bool now_ahead = v.s > world_.av.s;
    auto [it, inserted] = ahead_.try_emplace(v.id, now_ahead);
    if (inserted || it->second == now_ahead) continue;
    metrics_.overtaken_count += now_ahead ? -1 : 1;
    it->second = now_ahead;
  }
}

FailureCause Simulation::attribute(FailureCause fallback) const {
  // The latest reading first, then the one behind the actions still running.
  for (const auto* r : {&attempt_reading_, &executing_reading_})
    if (*r)
      if (auto c = classify_sensing((*r)->first, (*r)->second)) return *c;
  return fallback;
}

bool Simulation::queue_still_valid(const grid::GridState& snapshot) const {
  if (grid::is_crash(snapshot)) return false;
  const std::vector<Action> rest(queue_.begin(), queue_.end());
  const auto& limits = cfg_.search;
  try {
    const auto replayed = grid::replay(snapshot, rest, limits.max_lane_changes);
    if (replayed.termination == grid::Termination::Crashed ||
        replayed.applied != rest.size())
      return false;
    if (planner::enforces_danger_zone(queue_mode_))
      for (const auto& st : replayed.trace)
        if (grid::in_danger_zone(st)) return false;
    // The goal may have moved out of reach; a safe return to the left lane
    // is enough to keep going.
    return replayed.trace.back().av_lane() == Lane::Left;
  } catch (const grid::GridError&) {
    return false;
  }
}

void Simulation::use_settled_lane(grid::GridState& snap) const {
  // Readings report the lane a lane change heads to; at the start of an
  // action window the AV is still in the lane it leaves.
  const Lane settled = world_.av.lateral < 0.5 ? Lane::Left : Lane::Right;
  if (snap.av_lane() == settled || snap.terminal()) return;
  const std::vector<int> fvs(snap.front_vehicles().begin(),
                             snap.front_vehicles().end());
  snap = grid::GridState(settled, fvs, snap.oncoming(), 0);
}

Simulation::Reading Simulation::take_reading() {
  Reading r;
  r.scan = sensing::sense(world_, cfg_.sensor, rng_, schedule_lag());
  use_settled_lane(r.scan.grid.snapshot);
  for (const auto& d : r.scan.detections)
    if (d.vehicle_id) r.ids.push_back(*d.vehicle_id);
  std::sort(r.ids.begin(), r.ids.end());
  r.new_vehicle = r.scan.grid.has_phantom ||
                  std::any_of(r.ids.begin(), r.ids.end(), [&](int id) {
                    return !std::binary_search(last_seen_ids_.begin(),
                                               last_seen_ids_.end(), id);
                  });
  return r;
}

planner::PlanResult Simulation::plan_from(const grid::GridState& basis,
                                          const Reading& reading,
                                          ReplanReason reason, bool ahead) {
  last_replan_reason_ = reason;
  if (reason == ReplanReason::NewVehicle) ++metrics_.replans_new_vehicle;
  auto truth = sensing::ground_truth(world_, cfg_.sensor, schedule_lag());
  use_settled_lane(truth.snapshot);
  last_seen_ids_ = reading.ids;
  planned_once_ = true;
  attempt_reading_.emplace(reading.scan.grid, truth);

  if (reading.scan.grid.snapshot != truth.snapshot ||
      !reading.scan.grid.merges.empty()) {
    json mismatch{{"t", world_.clock}, {"type", "sensing_mismatch"}};
    mismatch["sensed"] = snapshot_json(reading.scan.grid);
    mismatch["truth"] = snapshot_json(truth);
    emit(mismatch.dump());
  }

  json record{{"t", world_.clock},
              {"type", "plan"},
              {"reason", reason == ReplanReason::QueueEmpty ? "queue_empty"
                                                            : "new_vehicle"},
              {"ahead", ahead},
              {"sensed", reading.scan.grid.snapshot.to_text()},
              {"snapshot", basis.to_text()},
              {"lag", schedule_lag()}};

  planner::PlanResult result = planner::NoPath{planner::NoPathReason::Exhausted, 0};
  bool anything_ahead = false;
  for (auto fv : basis.front_vehicles()) anything_ahead |= fv >= grid::kAvSegment;

  if (grid::is_crash(basis)) {
    record["outcome"] = "invalid_snapshot";
  } else if (basis.av_lane() == Lane::Left && !anything_ahead) {
    // Nothing to overtake in sensor range: close up on the traffic ahead.
    planner::Plan cruise;
    cruise.actions = {Action::Accelerate};
    result = cruise;
    record["outcome"] = "cruise";
  } else {
    result = planner::plan_with_fallback(basis, cfg_.search);
  }

  if (auto* p = std::get_if<planner::Plan>(&result)) {
    ++metrics_.plans;
    executing_reading_ = attempt_reading_;
    queue_.assign(p->actions.begin(), p->actions.end());
    queue_mode_ = p->mode;
    if (!record.contains("outcome")) {
      record["outcome"] = "plan";
      record["mode"] = planner::to_string(p->mode);
      record["states_expanded"] = p->states_expanded;
    }
    json actions = json::array();
    for (Action a : p->actions) actions.push_back(grid::short_name(a));
    record["actions"] = actions;
  } else {
    queue_.clear();
    if (!record.contains("outcome")) {
      record["outcome"] = "no_path";
      record["reason_detail"] =
          planner::to_string(std::get<planner::NoPath>(result).reason);
    }
  }
  emit(record.dump());
  return result;
}

std::optional<planner::PlanResult> Simulation::plan_if_idle() {
  last_replan_reason_.reset();
  if (!queue_.empty()) return std::nullopt;
  const auto reading = take_reading();
  auto result = plan_from(reading.scan.grid.snapshot, reading,
                          ReplanReason::QueueEmpty, false);
  if (std::holds_alternative<planner::NoPath>(result)) {
    halted_ = true;
    metrics_.failure_cause = attribute(FailureCause::PlannerNoPath);
  }
  return result;
}

std::optional<planner::PlanResult> Simulation::plan_ahead() {
  last_replan_reason_.reset();
  if (!current_) return std::nullopt;
  const auto reading = take_reading();
  const auto& sensed = reading.scan.grid.snapshot;
  std::optional<ReplanReason> reason;
  if (queue_.empty())
    reason = ReplanReason::QueueEmpty;
  else if (reading.new_vehicle)
    reason = ReplanReason::NewVehicle;
  if (!reason) return std::nullopt;

  std::optional<grid::GridState> basis;
  if (!grid::is_crash(sensed)) {
    try {
      auto next = grid::apply_action(sensed, *current_, cfg_.search.max_lane_changes);
      if (!grid::is_crash(next)) {
        const std::vector<int> fvs(next.front_vehicles().begin(),
                                   next.front_vehicles().end());
        basis = grid::GridState(next.av_lane(), fvs, next.oncoming(), 0);
      }
    } catch (const std::exception&) {
    }
  }

  if (*reason == ReplanReason::NewVehicle && basis &&
      world_.av.lane() == Lane::Right && queue_still_valid(*basis)) {
    // Mid-manoeuvre: keep the plan while it stays safe on the new reading.
    emit(json{{"t", world_.clock},
              {"type", "replan_suppressed"},
              {"snapshot", basis->to_text()}}
             .dump());
    return std::nullopt;
  }

  if (basis) {
    auto result = plan_from(*basis, reading, *reason, true);
    if (std::holds_alternative<planner::Plan>(result)) return result;
  }

  // The action just started is unsafe or a dead end on this reading: drop it.
  auto result = plan_from(sensed, reading, *reason, false);
  if (std::holds_alternative<planner::NoPath>(result)) {
    halted_ = true;
    metrics_.failure_cause = attribute(FailureCause::PlannerNoPath);
  } else {
    current_.reset();
    world_.av.state = AvSpeedState::Drive;  // no lateral settling
    begin_next_action();
  }
  return result;
}

ExecutionResult Simulation::execute_plan(
    const std::vector<Action>& actions,
    const std::function<void(const ContinuousWorld&)>& observer) {
  ExecutionResult result;
  queue_.assign(actions.begin(), actions.end());
  window_end_tick_ = tick_;
  current_.reset();
  while (true) {
    if (at_boundary()) {
      if (queue_.empty()) {
        auto& av = world_.av;
        if (av.state == AvSpeedState::LaneChangeLeft) av.lateral = 0.0;
        if (av.state == AvSpeedState::LaneChangeRight) av.lateral = 1.0;
        av.state = AvSpeedState::Drive;
        current_.reset();
        rebuild_reference();
        result.completed = true;
        return result;
      }
      const bool first = !current_;
      begin_next_action();
      if (first) settle_on_reference();
    }
    auto collision = advance_tick();
    if (observer) observer(world_);
    if (collision) {
      result.collision = collision;
      return result;
    }
  }
}

RunMetrics Simulation::run(const StopLimits& limits) {
  auto finish = [&] {
    metrics_.sim_time = world_.clock;
    metrics_.distance_km = (world_.av.s - start_s_) / 1000.0;
    json j{{"t", world_.clock},
           {"type", "metrics"},
           {"sim_time", metrics_.sim_time},
           {"overtaken", metrics_.overtaken_count},
           {"distance_km", metrics_.distance_km},
           {"failure_cause", to_string(metrics_.failure_cause)},
           {"plans", metrics_.plans}};
    emit(j.dump());
    return metrics_;
  };
  auto limit_reached = [&] {
    const double km = (world_.av.s - start_s_) / 1000.0;
    if (limits.distance_km && km >= *limits.distance_km) return true;
    if (limits.sim_hours && world_.clock >= *limits.sim_hours * 3600.0)
      return true;
    if (limits.overtakes && metrics_.overtaken_count >= *limits.overtakes)
      return true;
    return false;
  };

  metrics_.failure_cause = FailureCause::ManualStop;
  if (limit_reached()) return finish();
  while (true) {
    if (at_boundary()) {
      const bool first = !planned_once_;
      plan_if_idle();
      if (!halted_) {
        begin_next_action();
        if (first) settle_on_reference();
        plan_ahead();
        if (!halted_) rebuild_reference();
      }
      if (halted_) {
        emit(json{{"t", world_.clock},
                  {"type", "halt"},
                  {"cause", to_string(metrics_.failure_cause)}}
                 .dump());
        return finish();
      }
    }
    if (auto collision = advance_tick()) {
      metrics_.failure_cause = attribute(FailureCause::GroundTruthCollision);
      emit(json{{"t", world_.clock},
                {"type", "collision"},
                {"other", collision->other_id},
                {"lane", grid::to_string(collision->lane)},
                {"separation", collision->separation},
                {"cause", to_string(metrics_.failure_cause)}}
               .dump());
      return finish();
    }
    if (limit_reached()) {
      metrics_.failure_cause = FailureCause::ManualStop;
      return finish();
    }
  }
}

}  // namespace overtake::sim

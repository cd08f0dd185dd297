#include "overtake/planner.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace overtake::planner {

using grid::Action;
using grid::GridState;
using grid::Lane;

std::string_view to_string(PlannerMode mode) {
  switch (mode) {
    case PlannerMode::Final:
      return "final";
    case PlannerMode::PreparationsA:
      return "prepA";
    case PlannerMode::PreparationsB:
      return "prepB";
  }
  return "?";
}

std::string_view to_string(NoPathReason reason) {
  switch (reason) {
    case NoPathReason::Exhausted:
      return "exhausted";
    case NoPathReason::DepthBound:
      return "depth_bound";
    case NoPathReason::StateBound:
      return "state_bound";
    case NoPathReason::BothFailed:
      return "both_failed";
  }
  return "?";
}

bool goal_reached(const GridState& state, PlannerMode mode,
                  const SearchLimits& limits) {
  if (grid::is_crash(state)) return false;
  switch (mode) {
    case PlannerMode::Final:
      return state.overtaken();
    case PlannerMode::PreparationsA: {
      if (state.av_lane() != Lane::Left) return false;
      for (auto fv : state.front_vehicles())
        if (fv >= grid::kAvSegment - 1 && fv <= grid::kAvSegment + 1)
          return false;
      return true;
    }
    case PlannerMode::PreparationsB: {
      if (state.av_lane() != Lane::Left) return false;
      for (auto fv : state.front_vehicles())
        if (fv > grid::kAvSegment)
          return fv - grid::kAvSegment <= limits.gap_target;
      return false;
    }
  }
  return false;
}

namespace {

void check_preconditions(const GridState& snapshot, const SearchLimits& limits) {
  if (snapshot.terminal() || grid::is_crash(snapshot) ||
      grid::is_overtaken(snapshot))
    throw PreconditionError("snapshot is terminal: " + snapshot.to_text());
  if (limits.depth_bound < 1)
    throw PreconditionError("depth bound must be at least 1");
  if (limits.max_states < 1)
    throw PreconditionError("state bound must be at least 1");
}

// Successor under `action`, or nothing when the action is pruned.
std::optional<GridState> successor(const GridState& state, Action action,
                                   PlannerMode mode,
                                   const SearchLimits& limits) {
  if (!grid::is_enabled(state, action, limits.max_lane_changes))
    return std::nullopt;
  if (action == Action::Brake && grid::brake_loses_vehicle(state))
    return std::nullopt;
  GridState next = grid::apply_action(state, action, limits.max_lane_changes);
  if (grid::is_crash(next)) return std::nullopt;
  if (enforces_danger_zone(mode) && grid::in_danger_zone(next))
    return std::nullopt;
  return next;
}

struct Frame {
  GridState state;
  int depth;
  std::uint8_t next_child = 0;
  Action via = Action::Drive;
};

}  // namespace

PlanResult plan(const GridState& snapshot, PlannerMode mode,
                const SearchLimits& limits) {
  check_preconditions(snapshot, limits);
  const auto start = std::chrono::steady_clock::now();

  // Shallowest depth each state was seen at; a shallower revisit re-expands.
  std::unordered_map<std::uint64_t, int> seen;
  seen.reserve(4096);
  auto visit = [&](const GridState& s, int depth) {
    auto [it, fresh] = seen.try_emplace(s.key(), depth);
    if (fresh) return true;
    if (it->second <= depth) return false;
    it->second = depth;
    return true;
  };
  visit(snapshot, 0);

  std::vector<Frame> stack;
  stack.reserve(static_cast<std::size_t>(limits.depth_bound) + 1);
  stack.push_back({snapshot, 0});
  bool depth_cut = false;

  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_child >= grid::kCanonicalOrder.size() ||
        top.state.terminal()) {
      stack.pop_back();
      continue;
    }
    const Action action = grid::kCanonicalOrder[top.next_child++];
    auto next = successor(top.state, action, mode, limits);
    if (!next) continue;

    const int depth = top.depth + 1;
    if (goal_reached(*next, mode, limits)) {
      Plan result;
      result.mode = mode;
      for (std::size_t i = 1; i < stack.size(); ++i)
        result.actions.push_back(stack[i].via);
      result.actions.push_back(action);
      result.states_expanded = seen.size();
      result.search_time = std::chrono::steady_clock::now() - start;
      return result;
    }
    if (depth >= limits.depth_bound) {
      depth_cut = true;
      continue;
    }
    if (!visit(*next, depth)) continue;
    if (seen.size() > limits.max_states)
      return NoPath{NoPathReason::StateBound, seen.size()};
    stack.push_back({*next, depth, 0, action});
  }
  return NoPath{depth_cut ? NoPathReason::DepthBound : NoPathReason::Exhausted,
                seen.size()};
}

PlannerMode select_mode(const GridState& snapshot, bool final_failed) {
  if (!final_failed)
    throw std::logic_error(
        "select_mode is only meaningful after the final model failed");
  return snapshot.av_lane() == Lane::Right ? PlannerMode::PreparationsA
                                           : PlannerMode::PreparationsB;
}

bool oracle_plan_exists(const GridState& snapshot, PlannerMode mode,
                        const SearchLimits& limits) {
  check_preconditions(snapshot, limits);
  constexpr std::array<Action, 5> kAll = {
      Action::Drive, Action::Brake, Action::Accelerate, Action::LeftLaneChange,
      Action::RightLaneChange};

  std::unordered_set<std::uint64_t> seen{snapshot.key()};
  std::vector<GridState> frontier{snapshot};
  for (int depth = 1; depth <= limits.depth_bound && !frontier.empty();
       ++depth) {
    std::vector<GridState> next_frontier;
    for (const auto& state : frontier) {
      if (state.terminal()) continue;
      for (Action a : kAll) {
        if (!grid::is_enabled(state, a, limits.max_lane_changes)) continue;
        if (a == Action::Brake && grid::brake_loses_vehicle(state)) continue;
        GridState next = grid::apply_action(state, a, limits.max_lane_changes);
        if (grid::is_crash(next)) continue;
        if (enforces_danger_zone(mode) && grid::in_danger_zone(next)) continue;
        if (goal_reached(next, mode, limits)) return true;
        if (seen.insert(next.key()).second) next_frontier.push_back(next);
      }
    }
    frontier = std::move(next_frontier);
  }
  return false;
}

PlanResult plan_with_fallback(const GridState& snapshot,
                              const SearchLimits& limits) {
  auto first = plan(snapshot, PlannerMode::Final, limits);
  if (std::holds_alternative<Plan>(first)) return first;
  auto expanded = std::get<NoPath>(first).states_expanded;

  auto second = plan(snapshot, select_mode(snapshot, true), limits);
  if (auto* p = std::get_if<Plan>(&second)) {
    p->states_expanded += expanded;
    return second;
  }
  return NoPath{NoPathReason::BothFailed,
                expanded + std::get<NoPath>(second).states_expanded};
}

}  // namespace overtake::planner

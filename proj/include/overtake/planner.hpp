#pragma once

#include <chrono>
#include <cstddef>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "overtake/grid.hpp"

namespace overtake::planner {

enum class PlannerMode { Final, PreparationsA, PreparationsB };

std::string_view to_string(PlannerMode mode);

/// Danger-zone pruning applies in Final and PreparationsB.
constexpr bool enforces_danger_zone(PlannerMode mode) {
  return mode != PlannerMode::PreparationsA;
}

struct SearchLimits {
  int depth_bound = 64;
  std::size_t max_states = 1'000'000;
  int max_lane_changes = grid::kDefaultMaxLaneChanges;
  /// PreparationsB goal: nearest vehicle ahead at most this many segments away.
  int gap_target = 2;
};

struct Plan {
  std::vector<grid::Action> actions;
  PlannerMode mode = PlannerMode::Final;
  std::size_t states_expanded = 0;
  std::chrono::nanoseconds search_time{0};
};

enum class NoPathReason { Exhausted, DepthBound, StateBound, BothFailed };

std::string_view to_string(NoPathReason reason);

struct NoPath {
  NoPathReason reason = NoPathReason::Exhausted;
  std::size_t states_expanded = 0;
};

using PlanResult = std::variant<Plan, NoPath>;

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Whether `state` (reached by at least one action) satisfies the mode's goal.
bool goal_reached(const grid::GridState& state, PlannerMode mode,
                  const SearchLimits& limits);

/// Depth-first search for the first goal state, expanding children in
/// grid::kCanonicalOrder. Crashed successors, danger-zone violations (per
/// mode), visited states and nodes beyond the depth bound are pruned. A state
/// reached again at a strictly smaller depth is re-expanded so the depth
/// bound never hides a reachable goal.
PlanResult plan(const grid::GridState& snapshot, PlannerMode mode,
                const SearchLimits& limits = {});

/// Case A when the AV is in the right lane, Case B when it is in the left.
PlannerMode select_mode(const grid::GridState& snapshot, bool final_failed);

/// Brute-force breadth-first reachability with the same pruning rules and no
/// ordering. Test oracle for plan().
bool oracle_plan_exists(const grid::GridState& snapshot, PlannerMode mode,
                        const SearchLimits& limits = {});

/// Final first, then the preparations mode picked by select_mode().
PlanResult plan_with_fallback(const grid::GridState& snapshot,
                              const SearchLimits& limits = {});

}  // namespace overtake::planner

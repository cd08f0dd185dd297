#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "overtake/planner.hpp"

using namespace overtake::grid;
using namespace overtake::planner;

namespace {

GridState S(Lane lane, std::vector<int> fv, std::optional<int> ov = std::nullopt,
            int lcc = 0) {
  return GridState(lane, fv, ov, lcc);
}

std::string mode_name(PlannerMode m) {
  switch (m) {
    case PlannerMode::Final: return "final";
    case PlannerMode::PreparationsA: return "prepA";
    case PlannerMode::PreparationsB: return "prepB";
  }
  return "?";
}

// Equivalence sweep: both lanes, up to two FVs in 11..18, OV absent or in
// 11..27, no lane changes used.
template <typename F>
void for_each_sweep_state(F&& f) {
  std::vector<std::vector<int>> sets{{}};
  for (int a = 11; a <= 18; ++a) {
    sets.push_back({a});
    for (int b = a + 1; b <= 18; ++b) sets.push_back({a, b});
  }
  for (Lane lane : {Lane::Left, Lane::Right})
    for (const auto& set : sets)
      for (int ov = 10; ov <= kGridMax; ++ov) {
        std::optional<int> o;
        if (ov >= 11) o = ov;
        const GridState s(lane, set, o, 0);
        if (is_crash(s) || is_overtaken(s)) continue;
        f(s);
      }
}

std::string joined(const std::vector<Action>& plan) {
  std::string out;
  for (auto a : plan) out += (out.empty() ? "" : " ") + oracle::mnemonic(a);
  return out;
}

}  // namespace

TEST_CASE("final plan for (Left, FV 14, OV 24) is valid") {
  const auto start = S(Lane::Left, {14}, 24);
  auto r = plan(start, PlannerMode::Final);
  REQUIRE(std::holds_alternative<Plan>(r));
  const auto& p = std::get<Plan>(r);
  CHECK(p.mode == PlannerMode::Final);
  CHECK_FALSE(p.actions.empty());
  const auto v = oracle::check_plan(start, p.actions);
  CHECK(v.crash_free);
  CHECK(v.zone_free);
  CHECK(v.overtaken);
  CHECK(v.lane_changes <= kDefaultMaxLaneChanges);
  CHECK(p.states_expanded >= p.actions.size());
}

TEST_CASE("golden plan for (Left, FV 12)") {
  const auto start = S(Lane::Left, {12});
  auto r = plan(start, PlannerMode::Final);
  REQUIRE(std::holds_alternative<Plan>(r));
  const auto& actions = std::get<Plan>(r).actions;
  std::ifstream in(std::string(OVERTAKE_SOURCE_DIR) +
                   "/tests/golden/plan_L12_final.txt");
  REQUIRE(in);
  std::stringstream golden;
  golden << in.rdbuf();
  std::string text = golden.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == ' '))
    text.pop_back();
  CHECK(joined(actions) == text);
  const auto v = oracle::check_plan(start, actions);
  CHECK(v.crash_free);
  CHECK(v.overtaken);
  // A hand-derived plan is also valid.
  const std::vector<Action> hand = {Action::RightLaneChange, Action::Accelerate,
                                    Action::Accelerate, Action::Accelerate,
                                    Action::LeftLaneChange};
  const auto hv = oracle::check_plan(start, hand);
  CHECK(hv.crash_free);
  CHECK(hv.zone_free);
  CHECK(hv.overtaken);
}

TEST_CASE("terminal or crashed snapshots are rejected") {
  CHECK_THROWS_AS(plan(S(Lane::Left, {8, 9}), PlannerMode::Final),
                  PreconditionError);
  CHECK_THROWS_AS(plan(S(Lane::Right, {}, 10), PlannerMode::Final),
                  PreconditionError);
  CHECK_THROWS_AS(plan(S(Lane::Left, {10}), PlannerMode::Final),
                  PreconditionError);
  auto crashed = apply_action(S(Lane::Left, {11}), Action::Accelerate);
  CHECK_THROWS_AS(plan(crashed, PlannerMode::Final), PreconditionError);
  CHECK_THROWS_AS(plan_with_fallback(crashed), PreconditionError);
  CHECK_THROWS_AS(oracle_plan_exists(S(Lane::Left, {8}), PlannerMode::Final),
                  PreconditionError);
  SearchLimits zero;
  zero.depth_bound = 0;
  CHECK_THROWS_AS(plan(S(Lane::Left, {12}), PlannerMode::Final, zero),
                  PreconditionError);
}

TEST_CASE("select_mode") {
  CHECK(select_mode(S(Lane::Right, {12}), true) == PlannerMode::PreparationsA);
  CHECK(select_mode(S(Lane::Left, {12}), true) == PlannerMode::PreparationsB);
  CHECK_THROWS_AS(select_mode(S(Lane::Left, {12}), false), std::logic_error);
  CHECK(enforces_danger_zone(PlannerMode::Final));
  CHECK(enforces_danger_zone(PlannerMode::PreparationsB));
  CHECK_FALSE(enforces_danger_zone(PlannerMode::PreparationsA));
}

TEST_CASE("goal_reached agrees with the oracle goals") {
  SearchLimits limits;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20000; ++i) {
    const auto s = oracle::random_snapshot(rng, 2);
    const auto o = oracle::from_grid(s);
    for (auto m : {PlannerMode::Final, PlannerMode::PreparationsA,
                   PlannerMode::PreparationsB})
      REQUIRE(goal_reached(s, m, limits) ==
              oracle::goal(o, mode_name(m), limits.gap_target));
  }
  CHECK(goal_reached(S(Lane::Left, {12}), PlannerMode::PreparationsB, limits));
  CHECK_FALSE(
      goal_reached(S(Lane::Left, {13}), PlannerMode::PreparationsB, limits));
  CHECK_FALSE(goal_reached(S(Lane::Left, {}), PlannerMode::PreparationsB, limits));
  CHECK(goal_reached(S(Lane::Left, {8, 12}), PlannerMode::PreparationsA, limits));
  CHECK_FALSE(
      goal_reached(S(Lane::Left, {9, 12}), PlannerMode::PreparationsA, limits));
  CHECK_FALSE(
      goal_reached(S(Lane::Right, {14}), PlannerMode::PreparationsA, limits));
}

TEST_CASE("search bounds") {
  const auto start = S(Lane::Left, {14}, 24);
  SearchLimits shallow;
  shallow.depth_bound = 1;
  auto r = plan(start, PlannerMode::Final, shallow);
  REQUIRE(std::holds_alternative<NoPath>(r));
  CHECK(std::get<NoPath>(r).reason == NoPathReason::DepthBound);
  CHECK_FALSE(oracle_plan_exists(start, PlannerMode::Final, shallow));

  SearchLimits tiny;
  tiny.max_states = 1;
  r = plan(start, PlannerMode::Final, tiny);
  REQUIRE(std::holds_alternative<NoPath>(r));
  CHECK(std::get<NoPath>(r).reason == NoPathReason::StateBound);

  SearchLimits none;
  none.max_lane_changes = 0;
  r = plan(start, PlannerMode::Final, none);
  REQUIRE(std::holds_alternative<NoPath>(r));
  CHECK(std::get<NoPath>(r).reason == NoPathReason::Exhausted);
}

TEST_CASE("the lane-change budget is part of the state") {
  // Same position, different budget: one admits a plan, the other not.
  const auto fresh = S(Lane::Left, {12}, std::nullopt, 0);
  const auto spent = S(Lane::Left, {12}, std::nullopt, 4);
  CHECK(fresh.key() != spent.key());
  CHECK(std::holds_alternative<Plan>(plan(fresh, PlannerMode::Final)));
  CHECK(std::holds_alternative<NoPath>(plan(spent, PlannerMode::Final)));
}

TEST_CASE("fallback to the preparations model") {
  SearchLimits limits;
  int case_a = 0, case_b = 0;
  auto check = [&](const GridState& s) {
    if (std::holds_alternative<Plan>(plan(s, PlannerMode::Final, limits))) {
      REQUIRE(oracle::reachable(oracle::from_grid(s), "final",
                                limits.max_lane_changes));
      return;
    }
    const auto mode = select_mode(s, true);
    const bool prep = oracle::reachable(oracle::from_grid(s), mode_name(mode),
                                        limits.max_lane_changes);
    auto r = plan_with_fallback(s, limits);
    if (!prep) {
      REQUIRE(std::holds_alternative<NoPath>(r));
      CHECK(std::get<NoPath>(r).reason == NoPathReason::BothFailed);
      return;
    }
    REQUIRE(std::holds_alternative<Plan>(r));
    const auto& p = std::get<Plan>(r);
    REQUIRE(p.mode == mode);
    const auto v = oracle::check_plan(s, p.actions);
    CHECK(v.crash_free);
    if (mode == PlannerMode::PreparationsB) CHECK(v.zone_free);
    CHECK(v.left_at_end);
    (mode == PlannerMode::PreparationsA ? case_a : case_b)++;
  };
  for_each_sweep_state(check);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20000; ++i) {
    const auto s = oracle::random_snapshot(rng, 4);
    if (!is_overtaken(s)) check(s);
  }
  MESSAGE("fallback plans: case A " << case_a << ", case B " << case_b);
  CHECK(case_a > 0);
  CHECK(case_b > 0);

  const auto boxed = S(Lane::Right, {9, 10, 11}, 12);
  auto r = plan_with_fallback(boxed);
  REQUIRE(std::holds_alternative<NoPath>(r));
  CHECK(std::get<NoPath>(r).reason == NoPathReason::BothFailed);
}

TEST_CASE("sweep: plan() finds a plan iff both oracles do") {
  const SearchLimits limits;
  std::size_t instances = 0, plans = 0;
  for_each_sweep_state([&](const GridState& s) {
    for (auto m : {PlannerMode::Final, PlannerMode::PreparationsA,
                   PlannerMode::PreparationsB}) {
      const bool expected = oracle::reachable(oracle::from_grid(s), mode_name(m),
                                              limits.max_lane_changes,
                                              limits.depth_bound);
      REQUIRE(oracle_plan_exists(s, m, limits) == expected);
      auto r = plan(s, m, limits);
      REQUIRE(std::holds_alternative<Plan>(r) == expected);
      ++instances;
      if (!expected) continue;
      ++plans;
      const auto& actions = std::get<Plan>(r).actions;
      const auto v = oracle::check_plan(s, actions);
      REQUIRE(v.crash_free);
      if (enforces_danger_zone(m)) REQUIRE(v.zone_free);
      REQUIRE(v.lane_changes <= limits.max_lane_changes);
      REQUIRE(static_cast<int>(actions.size()) <= limits.depth_bound);
      auto end = oracle::from_grid(s);
      for (auto a : actions) end = oracle::step(end, oracle::mnemonic(a));
      REQUIRE(oracle::goal(end, mode_name(m), limits.gap_target));
    }
  });
  MESSAGE(instances << " instances, " << plans << " plans");
  CHECK(instances > 3000);
}

TEST_CASE("random snapshots: final plans are safe") {
  std::mt19937_64 rng(2024);
  int found = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = oracle::random_snapshot(rng, 2);
    if (is_overtaken(s)) continue;
    auto r = plan(s, PlannerMode::Final);
    if (!std::holds_alternative<Plan>(r)) continue;
    ++found;
    const auto v = oracle::check_plan(s, std::get<Plan>(r).actions);
    REQUIRE(v.crash_free);
    REQUIRE(v.zone_free);
    REQUIRE(v.overtaken);
    // Repeated calls return the same plan.
    REQUIRE(std::get<Plan>(plan(s, PlannerMode::Final)).actions ==
            std::get<Plan>(r).actions);
  }
  CHECK(found > 1000);
}

// Known not to hold at the default budget: with LLC tried first and the
// budget in the visited key, plans like RLC LLC RLC ... come out first.
TEST_CASE("no LLC immediately followed by RLC in final plans" *
          doctest::may_fail()) {
  auto count_flips = [](const SearchLimits& limits) {
    int flips = 0, total = 0;
    for_each_sweep_state([&](const GridState& s) {
      auto r = plan(s, PlannerMode::Final, limits);
      if (!std::holds_alternative<Plan>(r)) return;
      ++total;
      const auto& a = std::get<Plan>(r).actions;
      for (std::size_t i = 0; i + 1 < a.size(); ++i)
        if (a[i] == Action::LeftLaneChange &&
            a[i + 1] == Action::RightLaneChange) {
          ++flips;
          break;
        }
    });
    return std::pair{flips, total};
  };
  SearchLimits two;
  two.max_lane_changes = 2;
  const auto [f2, t2] = count_flips(two);
  MESSAGE("budget 2: " << f2 << " of " << t2 << " plans flip");
  CHECK(f2 == 0);
  const auto [f, t] = count_flips(SearchLimits{});
  MESSAGE("default budget: " << f << " of " << t << " plans flip");
  CHECK(f == 0);
}

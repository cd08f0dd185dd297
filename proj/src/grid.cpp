#include "overtake/grid.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace overtake::grid {

namespace {

struct ActionNames {
  Action action;
  std::string_view short_name;
  std::string_view long_name;
};

constexpr std::array<ActionNames, 5> kNames = {{
    {Action::LeftLaneChange, "LLC", "LeftLaneChange"},
    {Action::RightLaneChange, "RLC", "RightLaneChange"},
    {Action::Accelerate, "ACC", "Accelerate"},
    {Action::Brake, "BRK", "Brake"},
    {Action::Drive, "DRV", "Drive"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s) {
  s = trim(s);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw GridError("invalid integer '" + std::string(s) + "'");
  return value;
}

bool covers_av(int from, int to) {
  return std::min(from, to) <= kAvSegment && kAvSegment <= std::max(from, to);
}

bool static_crash(const GridState& s) {
  if (s.av_lane() == Lane::Left) {
    for (auto fv : s.front_vehicles())
      if (fv == kAvSegment) return true;
  } else if (s.oncoming() == kAvSegment) {
    return true;
  }
  return false;
}

}  // namespace

std::string_view short_name(Action a) {
  for (const auto& n : kNames)
    if (n.action == a) return n.short_name;
  return "?";
}

std::string_view long_name(Action a) {
  for (const auto& n : kNames)
    if (n.action == a) return n.long_name;
  return "?";
}

std::optional<Action> parse_action(std::string_view text) {
  text = trim(text);
  for (const auto& n : kNames)
    if (iequals(text, n.short_name) || iequals(text, n.long_name))
      return n.action;
  return std::nullopt;
}

std::string_view to_string(Lane lane) {
  return lane == Lane::Left ? "L" : "R";
}

GridState::GridState(Lane av_lane, std::span<const int> front_vehicles,
                     std::optional<int> oncoming, int lane_changes_used)
    : av_lane_(av_lane) {
  if (front_vehicles.size() > static_cast<std::size_t>(kMaxTracked))
    throw GridError("at most 3 tracked left-lane vehicles are supported");
  int prev = -1;
  for (int fv : front_vehicles) {
    if (fv < 0 || fv > kGridMax)
      throw GridError("left-lane vehicle segment out of range: " +
                      std::to_string(fv));
    if (fv <= prev)
      throw GridError("left-lane vehicles must be strictly ascending");
    fv_[fv_count_++] = static_cast<std::int8_t>(fv);
    prev = fv;
  }
  if (oncoming) {
    if (*oncoming < 0 || *oncoming > kGridMax)
      throw GridError("oncoming segment out of range: " +
                      std::to_string(*oncoming));
    ov_ = static_cast<std::int8_t>(*oncoming);
  }
  if (lane_changes_used < 0 || lane_changes_used > 255)
    throw GridError("lane change count out of range");
  lcc_ = static_cast<std::uint8_t>(lane_changes_used);
}

std::uint64_t GridState::key() const {
  std::uint64_t k = av_lane_ == Lane::Right ? 1u : 0u;
  k |= std::uint64_t{fv_count_} << 1;
  for (int i = 0; i < kMaxTracked; ++i) {
    const auto v = i < fv_count_ ? static_cast<std::uint64_t>(fv_[i]) : 0u;
    k |= v << (3 + 5 * i);
  }
  if (ov_ >= 0) k |= (std::uint64_t{1} << 18) | (std::uint64_t(ov_) << 19);
  k |= std::uint64_t{lcc_} << 24;
  k |= std::uint64_t{crashed_} << 32;
  k |= std::uint64_t{overtaken_} << 33;
  return k;
}

std::string GridState::to_text() const {
  std::ostringstream out;
  out << "lane=" << to_string(av_lane_) << "; fv=";
  if (fv_count_ == 0) out << '-';
  for (int i = 0; i < fv_count_; ++i) {
    if (i) out << ',';
    out << int{fv_[i]};
  }
  out << "; ov=";
  if (ov_ < 0)
    out << '-';
  else
    out << int{ov_};
  out << "; lcc=" << int{lcc_};
  return out.str();
}

GridState GridState::from_text(std::string_view text) {
  text = trim(text);
  std::array<std::string_view, 4> fields{};
  constexpr std::array<std::string_view, 4> kKeys = {"lane", "fv", "ov", "lcc"};
  std::size_t index = 0;
  while (!text.empty()) {
    auto semi = text.find(';');
    auto part = trim(text.substr(0, semi));
    text = semi == std::string_view::npos ? std::string_view{}
                                          : text.substr(semi + 1);
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string_view::npos)
      throw GridError("expected key=value, got '" + std::string(part) + "'");
    if (index >= kKeys.size() || trim(part.substr(0, eq)) != kKeys[index])
      throw GridError("fields must appear as lane, fv, ov, lcc");
    fields[index++] = trim(part.substr(eq + 1));
  }
  if (index != kKeys.size())
    throw GridError("snapshot requires lane, fv, ov and lcc fields");

  Lane lane;
  if (fields[0] == "L")
    lane = Lane::Left;
  else if (fields[0] == "R")
    lane = Lane::Right;
  else
    throw GridError("lane must be L or R");

  std::vector<int> fvs;
  if (fields[1] != "-") {
    auto rest = fields[1];
    while (!rest.empty()) {
      auto comma = rest.find(',');
      fvs.push_back(parse_int(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  std::optional<int> ov;
  if (fields[2] != "-") ov = parse_int(fields[2]);
  return GridState(lane, fvs, ov, parse_int(fields[3]));
}

bool is_enabled(const GridState& state, Action action, int max_lane_changes) {
  switch (action) {
    case Action::LeftLaneChange:
      return state.av_lane() == Lane::Right &&
             state.lane_changes_used() < max_lane_changes;
    case Action::RightLaneChange:
      return state.av_lane() == Lane::Left &&
             state.lane_changes_used() < max_lane_changes;
    default:
      return true;
  }
}

bool brake_loses_vehicle(const GridState& state) {
  for (auto fv : state.front_vehicles())
    if (fv + delta_of(Action::Brake).fv_delta > kGridMax) return true;
  return false;
}

GridState apply_action(const GridState& state, Action action,
                       int max_lane_changes) {
  if (state.terminal() || static_crash(state))
    throw TerminalState("action applied to a terminal state: " +
                        state.to_text());
  if (!is_enabled(state, action, max_lane_changes))
    throw ActionDisabled(std::string(long_name(action)) +
                         " is not enabled in " + state.to_text());

  const auto delta = delta_of(action);
  GridState next = state;
  if (delta.lane_effect == LaneEffect::ToLeft) next.av_lane_ = Lane::Left;
  if (delta.lane_effect == LaneEffect::ToRight) next.av_lane_ = Lane::Right;
  if (delta.lane_effect != LaneEffect::None) ++next.lcc_;

  // A lane change occupies both lanes for the whole transition.
  const bool occupies_left =
      state.av_lane_ == Lane::Left || next.av_lane_ == Lane::Left;
  const bool occupies_right =
      state.av_lane_ == Lane::Right || next.av_lane_ == Lane::Right;

  bool crashed = false;
  next.fv_count_ = 0;
  for (int i = 0; i < state.fv_count_; ++i) {
    const int from = state.fv_[i];
    const int to = from + delta.fv_delta;
    if (occupies_left && covers_av(from, to)) crashed = true;
    if (to < 0 || to > kGridMax) continue;
    next.fv_[next.fv_count_++] = static_cast<std::int8_t>(to);
  }
  for (int i = next.fv_count_; i < kMaxTracked; ++i) next.fv_[i] = 0;

  if (state.ov_ >= 0) {
    const int from = state.ov_;
    const int to = from + delta.ov_delta;
    // Sub-stepping the delta one segment at a time visits every cell in
    // [to, from]; reaching the AV's cell while it holds the right lane is a hit.
    if (occupies_right && covers_av(from, to)) crashed = true;
    next.ov_ = to < 0 ? std::int8_t{-1} : static_cast<std::int8_t>(to);
  }

  if (crashed || static_crash(next)) {
    next.crashed_ = true;
    next.overtaken_ = false;
  } else {
    next.overtaken_ = is_overtaken(next);
  }
  return next;
}

bool is_crash(const GridState& state) {
  return state.crashed() || static_crash(state);
}

bool in_danger_zone(const GridState& state) {
  if (state.av_lane() != Lane::Right) return false;
  auto ov = state.oncoming();
  return ov && std::abs(*ov - kAvSegment) <= 1;
}

bool is_overtaken(const GridState& state) {
  if (state.av_lane() != Lane::Left) return false;
  for (auto fv : state.front_vehicles())
    if (fv >= kAvSegment) return false;
  return true;
}

ReplayResult replay(const GridState& initial, std::span<const Action> plan,
                    int max_lane_changes) {
  ReplayResult result;
  result.trace.push_back(initial);
  for (Action a : plan) {
    const GridState& cur = result.trace.back();
    if (is_crash(cur)) {
      result.termination = Termination::Crashed;
      break;
    }
    if (cur.overtaken()) {
      result.termination = Termination::Overtaken;
      break;
    }
    result.trace.push_back(apply_action(cur, a, max_lane_changes));
    ++result.applied;
  }
  const GridState& last = result.trace.back();
  if (is_crash(last))
    result.termination = Termination::Crashed;
  else if (last.overtaken())
    result.termination = Termination::Overtaken;
  return result;
}

}  // namespace overtake::grid

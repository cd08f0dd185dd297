#include "overtake/promela.hpp"

#include <array>
#include <sstream>

namespace overtake::promela {

using grid::Action;
using grid::Lane;
using planner::PlannerMode;

namespace {

constexpr std::string_view kStandardBody = R"(/* Overtaking model, {{MODE}} mode. Generated; do not edit. */
#define AV_SEG    10
#define GRID_MAX  27
#define MAX_LC    {{MAX_LANE_CHANGES}}

#define COVERS(a, b) (((a) <= AV_SEG && AV_SEG <= (b)) || ((b) <= AV_SEG && AV_SEG <= (a)))

bit  lane = {{AV_LANE}};  /* 0 left, 1 right */
bit  from_lane;
byte lcc = {{LCC}};
bool crashed = false;
bool overtaken = false;
bool goal = false;
bool abandoned = false;
{{FV_POSITIONS}}{{OV_POSITION}}
#define p (goal)

ltl no_overtake { !<> p }

inline step(dfv, dov)
{
  d_step {
{{FV_UPDATE}}{{OV_UPDATE}}{{STATIC_CRASH}}    if
    :: crashed -> skip
    :: else ->
{{DANGER_GUARD}}{{GOAL}}    fi
  }
}

active proctype av()
{
  do
  :: (crashed || goal || abandoned) -> break
  :: else ->
    if
    :: lane == 1 && lcc < MAX_LC ->
      printf("ACTION:LLC\n"); from_lane = lane; lane = 0; lcc++; step(0, -2)
    :: true ->
      printf("ACTION:ACC\n"); from_lane = lane; step(-1, -3)
    :: lane == 0 && lcc < MAX_LC ->
      printf("ACTION:RLC\n"); from_lane = lane; lane = 1; lcc++; step(0, -2)
    :: true ->
      printf("ACTION:DRV\n"); from_lane = lane; step(0, -2)
    :: {{BRAKE_GUARD}} ->
      printf("ACTION:BRK\n"); from_lane = lane; step(1, -3)
    fi
  od
}
)";

std::string fv_name(std::size_t i) { return "fv" + std::to_string(i); }

std::string any_fv(std::size_t n, const std::string& pattern) {
  // pattern uses '#' for the vehicle variable name
  if (n == 0) return "false";
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string term = pattern;
    for (auto pos = term.find('#'); pos != std::string::npos; pos = term.find('#'))
      term.replace(pos, 1, fv_name(i));
    if (i) out += " || ";
    out += "(" + term + ")";
  }
  return out;
}

}  // namespace

const PromelaTemplate& PromelaTemplate::standard() {
  static const PromelaTemplate tpl{std::string(kStandardBody)};
  return tpl;
}

std::string instantiate(
    const PromelaTemplate& tpl,
    std::span<const std::pair<std::string_view, std::string>> values) {
  std::string out;
  out.reserve(tpl.body.size() + 1024);
  std::size_t pos = 0;
  while (true) {
    const auto open = tpl.body.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tpl.body, pos);
      break;
    }
    const auto close = tpl.body.find("}}", open);
    if (close == std::string::npos)
      throw std::invalid_argument("unterminated placeholder in template");
    out.append(tpl.body, pos, open - pos);
    const std::string_view key(tpl.body.data() + open + 2, close - open - 2);
    bool found = false;
    for (const auto& [k, v] : values) {
      if (k == key) {
        out += v;
        found = true;
        break;
      }
    }
    if (!found)
      throw std::invalid_argument("no value for placeholder " + std::string(key));
    pos = close + 2;
  }
  return out;
}

std::string emit_model(const grid::GridState& snapshot, PlannerMode mode,
                       const planner::SearchLimits& cfg) {
  const auto fvs = snapshot.front_vehicles();
  const std::size_t n = fvs.size();
  const auto ov = snapshot.oncoming();

  std::ostringstream decl;
  for (std::size_t i = 0; i < n; ++i)
    decl << "short " << fv_name(i) << " = " << int{fvs[i]} << ";\nbool "
         << fv_name(i) << "_on = true;\n";

  std::string ov_decl;
  if (ov) ov_decl = "short ov = " + std::to_string(*ov) + ";\nbool ov_on = true;\n";

  std::ostringstream fv_update;
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = fv_name(i);
    fv_update << "    if\n"
              << "    :: " << v << "_on ->\n"
              << "      if\n"
              << "      :: (from_lane == 0 || lane == 0) && COVERS(" << v << ", "
              << v << " + (dfv)) -> crashed = true\n"
              << "      :: else -> skip\n"
              << "      fi;\n"
              << "      " << v << " = " << v << " + (dfv);\n"
              << "      " << v << "_on = (" << v << " >= 0 && " << v
              << " <= GRID_MAX)\n"
              << "    :: else -> skip\n"
              << "    fi;\n";
  }

  std::string ov_update;
  if (ov)
    ov_update =
        "    if\n"
        "    :: ov_on ->\n"
        "      if\n"
        "      :: (from_lane == 1 || lane == 1) && COVERS(ov, ov + (dov)) -> crashed = true\n"
        "      :: else -> skip\n"
        "      fi;\n"
        "      ov = ov + (dov);\n"
        "      ov_on = (ov >= 0)\n"
        "    :: else -> skip\n"
        "    fi;\n";

  std::string static_crash = "    if\n";
  if (n > 0)
    static_crash += "    :: lane == 0 && (" + any_fv(n, "#_on && # == AV_SEG") +
                    ") -> crashed = true\n";
  if (ov) static_crash += "    :: lane == 1 && ov_on && ov == AV_SEG -> crashed = true\n";
  static_crash += "    :: else -> skip\n    fi;\n";

  std::string danger;
  if (ov && planner::enforces_danger_zone(mode))
    danger =
        "      if\n"
        "      :: lane == 1 && ov_on && ov >= AV_SEG - 1 && ov <= AV_SEG + 1 -> abandoned = true\n"
        "      :: else -> skip\n"
        "      fi;\n";

  std::string goal;
  switch (mode) {
    case PlannerMode::Final:
      goal = "      overtaken = (lane == 0 && !(" +
             any_fv(n, "#_on && # >= AV_SEG") + "));\n" +
             "      goal = overtaken && !abandoned\n";
      break;
    case PlannerMode::PreparationsA:
      goal = "      goal = (lane == 0 && !(" +
             any_fv(n, "#_on && # >= AV_SEG - 1 && # <= AV_SEG + 1") + "))\n";
      break;
    case PlannerMode::PreparationsB:
      goal = "      goal = (lane == 0 && !abandoned && (" +
             any_fv(n, "#_on && # > AV_SEG && # - AV_SEG <= " +
                           std::to_string(cfg.gap_target)) +
             "))\n";
      break;
  }

  std::string brake_guard = "true";
  if (n > 0) brake_guard = "!(" + any_fv(n, "#_on && # + 1 > GRID_MAX") + ")";

  const std::array<std::pair<std::string_view, std::string>, 12> values{{
      {"MODE", std::string(planner::to_string(mode))},
      {"MAX_LANE_CHANGES", std::to_string(cfg.max_lane_changes)},
      {"AV_LANE", snapshot.av_lane() == Lane::Left ? "0" : "1"},
      {"FV_POSITIONS", decl.str()},
      {"OV_POSITION", ov_decl},
      {"FV_UPDATE", fv_update.str()},
      {"OV_UPDATE", ov_update},
      {"STATIC_CRASH", static_crash},
      {"DANGER_GUARD", danger},
      {"GOAL", goal},
      {"BRAKE_GUARD", brake_guard},
      {"LCC", std::to_string(snapshot.lane_changes_used())},
  }};
  return instantiate(PromelaTemplate::standard(), values);
}

std::vector<Action> parse_trail(std::span<const std::string> lines) {
  std::vector<Action> out;
  for (const auto& raw : lines) {
    std::string_view line = raw;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    line.remove_prefix(first);
    if (!line.starts_with(kMarkerPrefix)) continue;
    line.remove_prefix(kMarkerPrefix.size());
    const auto end = line.find_first_of(" \t\r");
    const auto name = line.substr(0, end);
    auto action = grid::parse_action(name);
    if (!action)
      throw MalformedMarker("unknown action in marker: '" + std::string(name) + "'");
    out.push_back(*action);
  }
  return out;
}

std::vector<Action> parse_trail(std::string_view transcript) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(transcript)};
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return parse_trail(lines);
}

}  // namespace overtake::promela

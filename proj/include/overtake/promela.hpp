#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "overtake/grid.hpp"
#include "overtake/planner.hpp"

namespace overtake::promela {

/// Placeholders are written `{{NAME}}`.
struct PromelaTemplate {
  std::string body;

  static const PromelaTemplate& standard();
};

/// Replaces every `{{KEY}}` with its value. Throws std::invalid_argument when
/// a placeholder has no value.
std::string instantiate(
    const PromelaTemplate& tpl,
    std::span<const std::pair<std::string_view, std::string>> values);

/// Self-contained Promela model of the grid dynamics from `snapshot`, whose
/// accepting runs print one `ACTION:<short name>` line per step.
std::string emit_model(const grid::GridState& snapshot, planner::PlannerMode mode,
                       const planner::SearchLimits& cfg = {});

class MalformedMarker : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kMarkerPrefix = "ACTION:";

/// Actions named by marker lines, in order. A marker line is one whose first
/// non-blank characters are the prefix, which skips Spin's echo of the printf
/// source in `-p` transcripts.
std::vector<grid::Action> parse_trail(std::span<const std::string> lines);
std::vector<grid::Action> parse_trail(std::string_view transcript);

}  // namespace overtake::promela

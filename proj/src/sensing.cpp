#include "overtake/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace overtake::sensing {

using grid::Lane;

void SensorConfig::validate() const {
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
  };
  probability(dropout_prob, "dropout_prob");
  probability(phantom_prob, "phantom_prob");
  if (!(range_jitter_sigma >= 0.0))
    throw std::invalid_argument("range_jitter_sigma must be non-negative");
  if (!(range_360 > 0.0) || !(range_front_right > 0.0))
    throw std::invalid_argument("sensor ranges must be positive");
  if (!(side_margin >= 0.0))
    throw std::invalid_argument("side_margin must be non-negative");
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Sensor360:
      return "sensor360";
    case Provenance::FrontRight:
      return "front_right";
    case Provenance::RightSide:
      return "right_side";
    case Provenance::Phantom:
      return "phantom";
  }
  return "?";
}

namespace {

bool drop(const SensorConfig& cfg, Rng& rng) {
  if (cfg.dropout_prob <= 0.0) return false;
  return std::bernoulli_distribution(cfg.dropout_prob)(rng);
}

double jitter(double s, double range, const SensorConfig& cfg, Rng& rng) {
  if (cfg.range_jitter_sigma <= 0.0) return s;
  const double j = s + std::normal_distribution<double>(0.0, cfg.range_jitter_sigma)(rng);
  return std::clamp(j, -range, range);
}

}  // namespace

std::vector<Detection> scan_360(const ContinuousWorld& world,
                                const SensorConfig& cfg, Rng& rng) {
  std::vector<Detection> visible;
  for (const auto& v : world.others) {
    if (v.lane != Lane::Left) continue;
    const double rel = v.s - world.av.s;
    if (std::abs(rel) > cfg.range_360) continue;
    visible.push_back({Lane::Left, rel, rel, Provenance::Sensor360, v.id});
  }
  std::sort(visible.begin(), visible.end(), [](const auto& a, const auto& b) {
    return a.relative_s < b.relative_s;
  });

  if (cfg.occlusion == Occlusion::Strict) {
    // Same-lane vehicles sit on one ray per side; only the nearest is seen.
    std::vector<Detection> kept;
    const Detection* ahead = nullptr;
    const Detection* behind = nullptr;
    for (const auto& d : visible) {
      if (d.relative_s >= 0.0) {
        if (!ahead || d.relative_s < ahead->relative_s) ahead = &d;
      } else if (!behind || d.relative_s > behind->relative_s) {
        behind = &d;
      }
    }
    if (behind) kept.push_back(*behind);
    if (ahead) kept.push_back(*ahead);
    visible = std::move(kept);
  }

  std::vector<Detection> out;
  out.reserve(visible.size() + 1);
  for (auto& d : visible) {
    if (drop(cfg, rng)) continue;
    d.jittered_s = jitter(d.relative_s, cfg.range_360, cfg, rng);
    out.push_back(d);
  }
  if (cfg.phantom_prob > 0.0 &&
      std::bernoulli_distribution(cfg.phantom_prob)(rng)) {
    const double s =
        std::uniform_real_distribution<double>(-cfg.range_360, cfg.range_360)(rng);
    out.push_back({Lane::Left, s, s, Provenance::Phantom, std::nullopt});
  }
  return out;
}

std::optional<Detection> scan_front_right(const ContinuousWorld& world,
                                          const SensorConfig& cfg, Rng& rng) {
  const ContinuousVehicle* nearest = nullptr;
  double best = 0.0;
  for (const auto& v : world.others) {
    if (v.lane != Lane::Right) continue;
    const double rel = v.s - world.av.s;
    if (rel <= 0.0 || rel > cfg.range_front_right) continue;
    if (!nearest || rel < best) {
      nearest = &v;
      best = rel;
    }
  }
  if (!nearest || drop(cfg, rng)) return std::nullopt;
  Detection d{Lane::Right, best, best, Provenance::FrontRight, nearest->id};
  d.jittered_s = jitter(best, cfg.range_front_right, cfg, rng);
  return d;
}

bool scan_right_side(const ContinuousWorld& world, const SensorConfig& cfg) {
  for (const auto& v : world.others) {
    if (v.lane != Lane::Right) continue;
    const double reach = 0.5 * (world.av.length + v.length) + cfg.side_margin;
    if (std::abs(v.s - world.av.s) < reach) return true;
  }
  return false;
}

int segment_of(double relative_s) {
  return grid::kAvSegment +
         static_cast<int>(std::floor(relative_s / kSegmentLength));
}

Discretised discretise(const std::vector<Detection>& detections, bool side,
                       Lane av_lane, FrontSelection selection) {
  struct Cell {
    int count = 0;
    std::vector<int> ids;
  };
  std::map<int, Cell> left;
  std::optional<int> oncoming;
  std::optional<int> oncoming_id;
  Discretised out;

  for (const auto& d : detections) {
    const int seg = segment_of(d.jittered_s);
    if (d.provenance == Provenance::Phantom) out.has_phantom = true;
    if (d.lane == Lane::Left) {
      if (seg < grid::kAvSegment - kTrackBehind || seg > grid::kGridMax) continue;
      auto& cell = left[seg];
      ++cell.count;
      if (d.vehicle_id) cell.ids.push_back(*d.vehicle_id);
    } else if (seg >= 0 && seg <= grid::kGridMax) {
      if (!oncoming || seg < *oncoming) {
        oncoming = seg;
        oncoming_id = d.vehicle_id;
      }
    }
  }

  std::vector<std::pair<int, const Cell*>> ahead, behind;
  for (const auto& [seg, cell] : left) {
    if (cell.count > 1) out.merges.push_back({Lane::Left, seg, cell.count});
    (seg < grid::kAvSegment ? behind : ahead).emplace_back(seg, &cell);
  }
  std::vector<std::pair<int, const Cell*>> cells;
  // `ahead` is ascending by segment.
  for (const auto& c : ahead) {
    if (cells.size() == static_cast<std::size_t>(grid::kMaxTracked)) break;
    if (selection == FrontSelection::Platoon && !cells.empty() &&
        c.first != cells.back().first + 1)
      break;
    cells.push_back(c);
  }
  std::reverse(behind.begin(), behind.end());
  for (const auto& c : behind) {
    if (cells.size() == static_cast<std::size_t>(grid::kMaxTracked)) break;
    cells.push_back(c);
  }
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<int> fvs;
  for (const auto& [seg, cell] : cells) {
    fvs.push_back(seg);
    out.tracked_ids.insert(out.tracked_ids.end(), cell->ids.begin(),
                           cell->ids.end());
  }
  if (!oncoming && side) oncoming = grid::kAvSegment;
  if (oncoming_id) out.tracked_ids.push_back(*oncoming_id);
  std::sort(out.tracked_ids.begin(), out.tracked_ids.end());
  out.snapshot = grid::GridState(av_lane, fvs, oncoming, 0);
  return out;
}

Scan sense(const ContinuousWorld& world, const SensorConfig& cfg, Rng& rng,
           double schedule_lag) {
  Scan scan;
  scan.detections = scan_360(world, cfg, rng);
  if (auto fr = scan_front_right(world, cfg, rng))
    scan.detections.push_back(*fr);
  scan.side = scan_right_side(world, cfg);
  auto placed = scan.detections;
  for (auto& d : placed) d.jittered_s -= schedule_lag;
  scan.grid =
      discretise(placed, scan.side, world.av.lane(), cfg.front_selection);
  return scan;
}

Discretised ground_truth(const ContinuousWorld& world, const SensorConfig& cfg,
                         double schedule_lag) {
  SensorConfig clean = cfg;
  clean.dropout_prob = 0.0;
  clean.phantom_prob = 0.0;
  clean.range_jitter_sigma = 0.0;
  Rng unused;
  return sense(world, clean, unused, schedule_lag).grid;
}

}  // namespace overtake::sensing

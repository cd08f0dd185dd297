// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "overtake/grid.hpp"
#include "overtake/harness.hpp"
#include "overtake/planner.hpp"
#include "overtake/promela.hpp"
#include "overtake/traffic.hpp"

using namespace overtake;
using grid::Action;
using grid::GridState;
using grid::Lane;
using planner::PlannerMode;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int n, const std::string& name, bool pass, const std::string& detail) {
  std::cout << "criterion " << n << " " << (pass ? "PASS" : "FAIL") << "  "
            << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string source(const std::string& rel) {
  return std::string(OVERTAKE_SOURCE_DIR) + "/" + rel;
}

std::string mode_name(PlannerMode m) {
  switch (m) {
    case PlannerMode::Final: return "final";
    case PlannerMode::PreparationsA: return "prepA";
    case PlannerMode::PreparationsB: return "prepB";
  }
  return "?";
}

template <typename F>
void for_each_left_set(int lo, int hi, int max_r, F&& f) {
  std::vector<int> cur;
  auto rec = [&](auto&& self, int from) -> void {
    f(cur);
    if (static_cast<int>(cur.size()) == max_r) return;
    for (int v = from; v <= hi; ++v) {
      cur.push_back(v);
      self(self, v + 1);
      cur.pop_back();
    }
  };
  rec(rec, lo);
}

// 1: every enabled action on every valid state agrees with the delta table.
void criterion_1() {
  const auto t0 = Clock::now();
  std::size_t checked = 0, deviations = 0;
  const GridState fixture(Lane::Left, std::vector<int>{14}, 24, 0);
  const std::vector<std::tuple<Action, int, int>> expect = {
      {Action::Accelerate, 13, 21}, {Action::Drive, 14, 22},
      {Action::RightLaneChange, 14, 22}, {Action::Brake, 15, 21}};
  for (auto [a, fv, ov] : expect) {
    const auto n = grid::apply_action(fixture, a);
    if (n.front_vehicles()[0] != fv || n.oncoming() != ov) ++deviations;
  }
  const int max_lc = grid::kDefaultMaxLaneChanges;
  for_each_left_set(0, grid::kGridMax, grid::kMaxTracked, [&](const std::vector<int>& fv) {
    for (Lane lane : {Lane::Left, Lane::Right})
      for (int ov = -1; ov <= grid::kGridMax; ++ov)
        for (int lcc : {0, max_lc}) {
          std::optional<int> o;
          if (ov >= 0) o = ov;
          const GridState s(lane, fv, o, lcc);
          if (grid::is_crash(s)) continue;
          const auto os = oracle::from_grid(s);
          for (Action a : grid::kCanonicalOrder) {
            const auto d = oracle::delta_table().at(oracle::mnemonic(a));
            const bool lane_ok = d.lane == 0 || (d.lane == -1) == (lane == Lane::Right);
            const bool enabled = lane_ok && (d.lane == 0 || lcc < max_lc);
            if (grid::is_enabled(s, a, max_lc) != enabled) {
              ++deviations;
              continue;
            }
            if (!enabled) continue;
            const auto n = grid::apply_action(s, a, max_lc);
            const auto o = oracle::step(os, oracle::mnemonic(a));
            const std::vector<int> got(n.front_vehicles().begin(),
                                       n.front_vehicles().end());
            if (got != o.fv || n.oncoming().value_or(-1) != o.ov ||
                grid::is_crash(n) != o.crashed || n.overtaken() != o.overtaken ||
                (n.av_lane() == Lane::Right) != o.right ||
                n.lane_changes_used() != o.lcc)
              ++deviations;
            ++checked;
          }
        }
  });
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << checked << " transitions, " << deviations << " deviations, " << secs << " s";
  report(1, "delta-table exactness", deviations == 0 && secs < 1.0, d.str());
}

// The equivalence sweep: both lanes, up to two FVs in 11..18, OV absent or in
// 11..27.
template <typename F>
void for_each_sweep_state(int lcc, F&& f) {
  for_each_left_set(11, 18, 2, [&](const std::vector<int>& fv) {
    for (Lane lane : {Lane::Left, Lane::Right})
      for (int ov = 10; ov <= grid::kGridMax; ++ov) {
        std::optional<int> o;
        if (ov >= 11) o = ov;
        const GridState s(lane, fv, o, lcc);
        if (grid::is_crash(s) || grid::is_overtaken(s)) continue;
        f(s);
      }
  });
}

void criterion_2() {
  const auto t0 = Clock::now();
  const planner::SearchLimits limits;
  std::size_t instances = 0, agree = 0, oracle_agree = 0, plans = 0;
  for (int lcc = 0; lcc <= limits.max_lane_changes; ++lcc)
    for_each_sweep_state(lcc, [&](const GridState& s) {
      for (auto m : {PlannerMode::Final, PlannerMode::PreparationsA,
                     PlannerMode::PreparationsB}) {
        const bool dfs = std::holds_alternative<planner::Plan>(planner::plan(s, m, limits));
        const bool bfs = planner::oracle_plan_exists(s, m, limits);
        const bool ind = oracle::reachable(oracle::from_grid(s), mode_name(m),
                                           limits.max_lane_changes, limits.depth_bound);
        ++instances;
        agree += dfs == bfs;
        oracle_agree += bfs == ind;
        plans += dfs;
      }
    });
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << agree << "/" << instances << " agree with the BFS oracle, " << oracle_agree
    << "/" << instances << " BFS vs independent oracle, " << plans << " plans, "
    << secs << " s";
  report(2, "planner/oracle equivalence",
         agree == instances && oracle_agree == instances && secs < 60.0, d.str());
}

// 3 and 4 share the random snapshots.
void criteria_3_4() {
  std::mt19937_64 rng(20240521);
  std::size_t snapshots = 0, plans = 0, violations = 0;
  std::vector<double> ms;
  while (snapshots < 10000) {
    const auto s = oracle::random_snapshot(rng, 0);
    if (grid::is_overtaken(s)) continue;
    ++snapshots;
    const auto t0 = Clock::now();
    auto r = planner::plan_with_fallback(s);
    ms.push_back(seconds_since(t0) * 1000.0);
    const auto* p = std::get_if<planner::Plan>(&r);
    if (!p || p->mode != PlannerMode::Final) continue;
    ++plans;
    const auto v = oracle::check_plan(s, p->actions);
    if (!v.crash_free || !v.zone_free || !v.overtaken) ++violations;
  }
  std::ostringstream d3;
  d3 << snapshots << " snapshots, " << plans << " final plans, " << violations
     << " violations";
  report(3, "plan safety", violations == 0 && plans > 0, d3.str());

  std::sort(ms.begin(), ms.end());
  const double med = oracle::median(ms);
  const double p99 = ms[static_cast<std::size_t>(0.99 * (ms.size() - 1))];
  std::ostringstream d4;
  d4 << "median " << med << " ms, p99 " << p99 << " ms, max " << ms.back()
     << " ms over " << ms.size() << " plan_with_fallback calls, in process";
  report(4, "planner latency", med < 20.0 && p99 < 100.0, d4.str());
}

void criterion_5() {
  auto cfg = harness::load_config(source("configs/noise_off.json"));
  cfg.threads = 0;
  const auto t0 = Clock::now();
  const auto batch = harness::run_batch(cfg, 10);
  int collisions = 0, no_path = 0, short_runs = 0, stopped = 0;
  std::ostringstream counts;
  for (const auto& m : batch.runs) {
    collisions += m.failure_cause == sim::FailureCause::GroundTruthCollision;
    no_path += m.failure_cause == sim::FailureCause::PlannerNoPath;
    stopped += m.failure_cause == sim::FailureCause::ManualStop;
    // 8 per run with 40 % tolerance.
    short_runs += m.overtaken_count < 5;
    counts << m.overtaken_count << " ";
  }
  std::ostringstream d;
  d << "overtakes [ " << counts.str() << "], " << collisions << " collisions, "
    << no_path << " no-path, " << stopped << "/10 reached 2 km, "
    << seconds_since(t0) << " s";
  report(5, "end-to-end soundness (noise off)",
         collisions == 0 && no_path == 0 && short_runs == 0 && stopped == 10,
         d.str());
}

void criterion_6() {
  const auto t0 = Clock::now();
  const std::vector<std::string> levels = {"0.02", "0.05", "0.10"};
  std::vector<double> medians, dropout, distance;
  int bad_causes = 0, runs = 0;
  std::ostringstream hist;
  for (const auto& level : levels) {
    auto cfg = harness::load_config(source("configs/dropout_" + level + ".json"));
    cfg.threads = 0;
    const auto batch = harness::run_batch(cfg, 12);
    medians.push_back(batch.median_distance_km);
    hist << level << ":{";
    for (const auto& [cause, n] : batch.failure_histogram) hist << cause << " " << n << ",";
    hist << "} ";
    for (const auto& m : batch.runs) {
      ++runs;
      dropout.push_back(cfg.sim.sensor.dropout_prob);
      distance.push_back(m.distance_km);
      const auto c = m.failure_cause;
      if (c != sim::FailureCause::FakeGap && c != sim::FailureCause::PhantomObstacle &&
          c != sim::FailureCause::SameSegmentMerge &&
          c != sim::FailureCause::GroundTruthCollision)
        ++bad_causes;
    }
  }
  const bool decreasing = medians[0] > medians[1] && medians[1] > medians[2];
  const double rho = oracle::spearman(dropout, distance);
  std::ostringstream d;
  d << "causes " << hist.str() << "median km " << medians[0] << " > " << medians[1]
    << " > " << medians[2] << ", spearman " << rho << ", " << bad_causes << "/" << runs
    << " outside the sensor classes, " << seconds_since(t0) << " s";
  report(6, "failure taxonomy (noise on)", bad_causes == 0 && decreasing && rho < 0,
         d.str());
}

void criterion_7() {
  sim::SpawnConfig cfg;
  sim::Rng rng(777);
  std::vector<long> counts(4, 0);
  for (int i = 0; i < 100000; ++i) {
    const int g = sim::draw_right_gap(cfg, rng);
    for (std::size_t k = 0; k < 4; ++k)
      if (cfg.right_gaps[k] == g) ++counts[k];
  }
  const std::vector<double> probs(cfg.right_gap_probs.begin(), cfg.right_gap_probs.end());
  const double x = oracle::chi_square(counts, probs);
  const double p = oracle::chi_square_3_sf(x);

  int next_id = 1;
  auto w = sim::make_initial_world(cfg, 5.0, rng, next_id);
  int worst = 0;
  for (int i = 0; i < 100000; ++i) {
    w.av.s += 21.0;
    for (auto& v : w.others)
      if (v.lane == Lane::Right) v.s -= 21.0;
    sim::spawn_despawn(w, cfg, rng, next_id);
    std::vector<double> s;
    for (const auto& v : w.others)
      if (v.lane == Lane::Left) s.push_back(v.s);
    std::sort(s.begin(), s.end());
    int run = 1;
    for (std::size_t k = 1; k < s.size(); ++k) {
      run = std::abs(s[k] - s[k - 1] - 21.0) < 0.5 ? run + 1 : 1;
      worst = std::max(worst, run);
    }
  }
  std::ostringstream d;
  d << "right gaps " << counts[0] << "/" << counts[1] << "/" << counts[2] << "/"
    << counts[3] << " chi2 " << x << " p " << p << ", longest left run " << worst
    << " over 1e5 steps";
  report(7, "spawner distributions", p > 0.01 && worst <= cfg.max_consecutive, d.str());
}

struct Golden {
  std::string file;
  std::string snapshot;
  PlannerMode mode;
};

const std::vector<Golden>& goldens() {
  static const std::vector<Golden> g = {
      {"emit_L14_OV24_final.pml", "lane=L; fv=14; ov=24; lcc=0", PlannerMode::Final},
      {"emit_R11_13_OV14_prepA.pml", "lane=R; fv=11,13; ov=14; lcc=0",
       PlannerMode::PreparationsA},
      {"emit_L12_13_prepB.pml", "lane=L; fv=12,13; ov=-; lcc=1",
       PlannerMode::PreparationsB},
  };
  return g;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool have_spin() { return std::system("command -v spin >/dev/null 2>&1") == 0; }

// Spin verdict for one snapshot: true when pan finds a run reaching p.
std::optional<bool> spin_reachable(const GridState& s, const std::string& dir) {
  {
    std::ofstream out(dir + "/model.pml");
    out << promela::emit_model(s, PlannerMode::Final);
  }
  const std::string cd = "cd '" + dir + "' && ";
  std::remove((dir + "/model.pml.trail").c_str());
  if (std::system((cd + "spin -a model.pml >/dev/null 2>&1 && "
                        "cc -O1 -o pan pan.c >/dev/null 2>&1").c_str()) != 0)
    return std::nullopt;
  // pan's exit status does not tell whether a trail was written.
  [[maybe_unused]] const int pan = std::system((cd + "./pan -a >/dev/null 2>&1").c_str());
  std::ifstream trail(dir + "/model.pml.trail");
  if (!trail) return false;
  if (std::system((cd + "spin -t -p model.pml > transcript.txt 2>/dev/null").c_str()) != 0)
    return std::nullopt;
  const auto actions = promela::parse_trail(slurp(dir + "/transcript.txt"));
  return oracle::check_plan(s, actions).overtaken;
}

void criterion_8(bool force_spin) {
  int mismatched = 0;
  for (const auto& g : goldens()) {
    const auto s = GridState::from_text(g.snapshot);
    const auto a = promela::emit_model(s, g.mode);
    const auto b = promela::emit_model(s, g.mode);
    if (a != b || a != slurp(source("tests/golden/" + g.file))) ++mismatched;
  }
  std::ostringstream d;
  d << goldens().size() - mismatched << "/" << goldens().size()
    << " golden models byte-identical";
  bool pass = mismatched == 0;
  if (!have_spin()) {
    d << "; spin not installed, reachability cross-check not run";
    if (force_spin) {
      d << " but was requested";
      pass = false;
    }
  } else {
    char tmpl[] = "/tmp/overtake_spin_XXXXXX";
    const std::string dir = mkdtemp(tmpl) ? tmpl : "/tmp";
    std::size_t n = 0, agree = 0, errors = 0;
    for_each_sweep_state(0, [&](const GridState& s) {
      const bool native =
          std::holds_alternative<planner::Plan>(planner::plan(s, PlannerMode::Final));
      const auto spin = spin_reachable(s, dir);
      ++n;
      if (!spin) ++errors;
      else agree += *spin == native;
    });
    d << "; spin cross-check " << agree << "/" << n << " agree, " << errors
      << " spin errors";
    pass = pass && agree == n;
  }
  report(8, "promela cross-check", pass, d.str());
}

void criterion_9() {
  auto cfg = harness::load_config(source("configs/noise_on.json"));
  cfg.limits = {};
  cfg.limits.distance_km = 3.0;
  cfg.threads = 0;
  const auto a = harness::run_batch(cfg, 6, true);
  const auto b = harness::run_batch(cfg, 6, true);
  cfg.threads = 1;
  const auto c = harness::run_batch(cfg, 6, true);
  const auto ja = harness::summary_json(a).dump();
  const bool same = ja == harness::summary_json(b).dump() &&
                    ja == harness::summary_json(c).dump() && a.events == b.events &&
                    a.events == c.events;
  const auto r1 = harness::run_single(cfg, true);
  const auto r2 = harness::run_single(cfg, true);
  const bool single = r1.events == r2.events &&
                      harness::metrics_json(r1.metrics).dump() ==
                          harness::metrics_json(r2.metrics).dump();
  std::ostringstream d;
  d << "3 batches of 6 (threads all/all/1): " << (same ? "identical" : "DIFFER") << ", "
    << a.events.size() << " event lines; single run repeated: "
    << (single ? "identical" : "DIFFER");
  report(9, "determinism", same && single, d.str());
}

}  // namespace

int main(int argc, char** argv) {
  bool force_spin = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--require-spin") force_spin = true;
  std::cout.precision(4);
  criterion_1();
  criterion_2();
  criteria_3_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8(force_spin);
  criterion_9();
  std::cout << (failures == 0 ? "all criteria PASS" : std::to_string(failures) + " criteria FAIL")
            << std::endl;
  return failures == 0 ? 0 : 1;
}

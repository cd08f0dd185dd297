#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "overtake/grid.hpp"
#include "overtake/harness.hpp"
#include "overtake/planner.hpp"
#include "overtake/promela.hpp"

namespace {

using namespace overtake;
using nlohmann::json;

enum ExitCode { kOk = 0, kUsage = 1, kNoPath = 2, kInputError = 3 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("overtake");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("OVERTAKE_MC_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("OVERTAKE_MC_LOG: unknown level '{}', keeping warn", env);
    else
      spdlog::set_level(level);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

grid::GridState snapshot_from(const std::string& text, const std::string& file) {
  if (!file.empty()) {
    std::istringstream in(read_file(file));
    for (std::string line; std::getline(in, line);) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return grid::GridState::from_text(line);
    }
    throw grid::GridError("snapshot file holds no snapshot line: " + file);
  }
  return grid::GridState::from_text(text);
}

std::optional<planner::PlannerMode> parse_mode(const std::string& m) {
  if (m == "final") return planner::PlannerMode::Final;
  if (m == "prepA") return planner::PlannerMode::PreparationsA;
  if (m == "prepB") return planner::PlannerMode::PreparationsB;
  return std::nullopt;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Overtaking planner with an explicit-state model checker core"};
  app.require_subcommand(1);

  // plan
  std::string snap_text, snap_file, mode_name = "auto";
  planner::SearchLimits limits;
  auto* plan_cmd = app.add_subcommand("plan", "Plan from one grid snapshot");
  auto* snap_opt = plan_cmd->add_option("--snapshot", snap_text,
                                        "Snapshot text, e.g. 'lane=L; fv=14; ov=24; lcc=0'");
  plan_cmd->add_option("--snapshot-file", snap_file, "File holding a snapshot line")
      ->excludes(snap_opt);
  plan_cmd->add_option("--mode", mode_name, "final, prepA, prepB or auto (final with fallback)");
  plan_cmd->add_option("--depth", limits.depth_bound, "Depth bound")->check(CLI::PositiveNumber);
  plan_cmd->add_option("--max-states", limits.max_states, "State bound");
  plan_cmd->add_option("--max-lane-changes", limits.max_lane_changes, "Lane changes per plan")
      ->check(CLI::Range(0, 255));
  plan_cmd->add_option("--gap-target", limits.gap_target, "Preparations B gap in segments")
      ->check(CLI::PositiveNumber);

  // emit
  std::string emit_snap, emit_text, emit_mode = "final", emit_out;
  auto* emit_cmd = app.add_subcommand("emit", "Write the Promela model of a snapshot");
  auto* emit_file_opt = emit_cmd->add_option("--snapshot", emit_snap, "Snapshot file");
  emit_cmd->add_option("--snapshot-text", emit_text, "Snapshot text")->excludes(emit_file_opt);
  emit_cmd->add_option("--mode", emit_mode, "final, prepA or prepB");
  emit_cmd->add_option("-o,--output", emit_out, "Output path; stdout when omitted");
  emit_cmd->add_option("--max-lane-changes", limits.max_lane_changes)->check(CLI::Range(0, 255));
  emit_cmd->add_option("--gap-target", limits.gap_target)->check(CLI::PositiveNumber);

  // parse-trail
  std::string trail_file;
  auto* trail_cmd = app.add_subcommand("parse-trail", "Extract actions from a Spin transcript");
  trail_cmd->add_option("file", trail_file, "Transcript path, '-' for stdin")->required();

  // simulate
  std::string config_path, events_path, trace_path;
  std::optional<std::uint64_t> seed;
  auto* sim_cmd = app.add_subcommand("simulate", "Run one closed-loop simulation");
  sim_cmd->add_option("--config", config_path, "JSON run configuration")->required();
  sim_cmd->add_option("--seed", seed, "Override the configured seed");
  sim_cmd->add_option("--events", events_path, "Event log path (JSON lines)");
  sim_cmd->add_option("--trace", trace_path, "World trace path (JSON lines)");

  // batch
  int runs = 12;
  std::optional<int> threads;
  std::string summary_path;
  auto* batch_cmd = app.add_subcommand("batch", "Run a seeded batch and print a summary table");
  batch_cmd->add_option("--config", config_path, "JSON run configuration")->required();
  batch_cmd->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
  batch_cmd->add_option("--seed", seed, "Override the master seed");
  batch_cmd->add_option("--threads", threads, "Worker threads, 0 for all cores");
  batch_cmd->add_option("--summary", summary_path, "Write the JSON summary here");
  batch_cmd->add_option("--events", events_path, "Concatenated event log path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan_cmd) {
      const auto snapshot = snapshot_from(snap_text, snap_file);
      spdlog::info("planning from {}", snapshot.to_text());
      planner::PlanResult result;
      if (mode_name == "auto") {
        result = planner::plan_with_fallback(snapshot, limits);
      } else if (auto mode = parse_mode(mode_name)) {
        result = planner::plan(snapshot, *mode, limits);
      } else {
        std::cerr << "unknown mode: " << mode_name << '\n';
        return kUsage;
      }
      if (const auto* p = std::get_if<planner::Plan>(&result)) {
        for (auto a : p->actions) std::cout << grid::short_name(a) << '\n';
        std::cout << json{{"result", "plan"},
                          {"mode", planner::to_string(p->mode)},
                          {"length", p->actions.size()},
                          {"states_expanded", p->states_expanded},
                          {"search_time_us", p->search_time.count() / 1000}}
                         .dump()
                  << '\n';
        return kOk;
      }
      const auto& np = std::get<planner::NoPath>(result);
      std::cout << json{{"result", "no_path"},
                        {"reason", planner::to_string(np.reason)},
                        {"states_expanded", np.states_expanded}}
                       .dump()
                << '\n';
      return kNoPath;
    }

    if (*emit_cmd) {
      const auto snapshot = snapshot_from(emit_text, emit_snap);
      auto mode = parse_mode(emit_mode);
      if (!mode) {
        std::cerr << "unknown mode: " << emit_mode << '\n';
        return kUsage;
      }
      const auto text = promela::emit_model(snapshot, *mode, limits);
      if (emit_out.empty()) {
        std::cout << text;
      } else {
        open_out(emit_out) << text;
        spdlog::info("wrote {}", emit_out);
      }
      return kOk;
    }

    if (*trail_cmd) {
      std::string text;
      if (trail_file == "-") {
        std::ostringstream s;
        s << std::cin.rdbuf();
        text = s.str();
      } else {
        text = read_file(trail_file);
      }
      for (auto a : promela::parse_trail(text)) std::cout << grid::short_name(a) << '\n';
      return kOk;
    }

    auto cfg = harness::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (events_path.empty()) events_path = cfg.output.events;

    if (*sim_cmd) {
      if (trace_path.empty()) trace_path = cfg.output.trace;
      std::ofstream trace_out;
      sim::EventSink trace;
      if (!trace_path.empty()) {
        trace_out = open_out(trace_path);
        if (cfg.sim.trace_every == 0) cfg.sim.trace_every = 50;
        trace = [&trace_out](const std::string& line) { trace_out << line << '\n'; };
      }
      spdlog::info("simulating with seed {}", cfg.seed);
      auto out = harness::run_single(cfg, !events_path.empty(), trace);
      if (!events_path.empty()) {
        auto ev = open_out(events_path);
        for (const auto& line : out.events) ev << line << '\n';
      }
      auto j = harness::metrics_json(out.metrics);
      j["seed"] = cfg.seed;
      std::cout << j.dump() << '\n';
      return kOk;
    }

    if (*batch_cmd) {
      if (threads) cfg.threads = *threads;
      if (summary_path.empty()) summary_path = cfg.output.summary;
      spdlog::info("batch of {} runs, master seed {}", runs, cfg.seed);
      auto summary = harness::run_batch(cfg, runs, !events_path.empty());
      std::cout << harness::format_table(summary);
      if (!summary_path.empty()) open_out(summary_path) << harness::summary_json(summary).dump(2) << '\n';
      if (!events_path.empty()) {
        auto ev = open_out(events_path);
        for (const auto& line : summary.events) ev << line << '\n';
      }
      return kOk;
    }
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kInputError;
  } catch (const promela::MalformedMarker& e) {
    std::cerr << "malformed marker: " << e.what() << '\n';
    return kInputError;
  } catch (const planner::PreconditionError& e) {
    std::cerr << "precondition: " << e.what() << '\n';
    return kInputError;
  } catch (const grid::GridError& e) {
    std::cerr << "snapshot error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kUsage;
}

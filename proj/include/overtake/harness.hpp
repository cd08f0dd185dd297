#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "overtake/traffic.hpp"

namespace overtake::harness {

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputPaths {
  /// JSON-lines event log; empty disables it.
  std::string events;
  std::string trace;
  std::string summary;
};

struct RunConfig {
  std::uint64_t seed = 1;
  sim::StopLimits limits;
  sim::SimulationConfig sim;
  OutputPaths output;
  /// Worker threads for batches; 0 picks the hardware concurrency.
  int threads = 1;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Strict: unknown keys, wrong types and a missing or unsupported
/// schema_version raise ConfigError. Absent sections keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Seed of run `index` in a batch: splitmix64 of master + (index + 1) * golden.
std::uint64_t sub_seed(std::uint64_t master, std::size_t index);

struct RunOutput {
  sim::RunMetrics metrics;
  /// Event log lines, when requested.
  std::vector<std::string> events;
};

RunOutput run_single(const RunConfig& cfg, bool keep_events = false,
                     const sim::EventSink& trace = {});

struct BatchSummary {
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<sim::RunMetrics> runs;
  double median_distance_km = 0.0;
  double median_overtaken = 0.0;
  double median_runtime_s = 0.0;
  double total_distance_km = 0.0;
  long long total_overtaken = 0;
  double total_runtime_s = 0.0;
  std::map<std::string, int> failure_histogram;
  /// Concatenated per-run event logs in run order, when requested.
  std::vector<std::string> events;
};

double median(std::vector<double> values);

BatchSummary run_batch(const RunConfig& cfg, int n_runs, bool keep_events = false);

/// Aligned text table: Run, Runtime, Vehicles overtaken, Distance, Failure cause.
std::string format_table(const BatchSummary& summary);
nlohmann::json summary_json(const BatchSummary& summary);
nlohmann::json metrics_json(const sim::RunMetrics& m);

/// Sim seconds as H:MM:SS.
std::string format_runtime(double seconds);

}  // namespace overtake::harness

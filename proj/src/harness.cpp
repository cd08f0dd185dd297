#include "overtake/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace overtake::harness {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& j, std::string name, std::set<std::string> keys)
      : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
    for (const auto& [k, _] : j_.items())
      if (!keys.contains(k)) throw ConfigError(name_ + ": unknown key '" + k + "'");
  }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  void read(const char* key, std::optional<T>& out) const {
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T value{};
    read(key, value);
    out = value;
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }

 private:
  const json& j_;
  std::string name_;
};

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void RunConfig::validate() const {
  try {
    sim.sensor.validate();
    sim.spawn.validate();
    sim.kinematics.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& s = sim.search;
  if (s.depth_bound < 1) throw ConfigError("search.depth_bound must be >= 1");
  if (s.max_states < 1) throw ConfigError("search.max_states must be >= 1");
  if (s.max_lane_changes < 0 || s.max_lane_changes > 255)
    throw ConfigError("search.max_lane_changes must lie in [0, 255]");
  if (s.gap_target < 1) throw ConfigError("search.gap_target must be >= 1");
  if (limits.distance_km && *limits.distance_km < 0)
    throw ConfigError("limits.distance_km must be non-negative");
  if (limits.sim_hours && *limits.sim_hours < 0)
    throw ConfigError("limits.sim_hours must be non-negative");
  if (limits.overtakes && *limits.overtakes < 0)
    throw ConfigError("limits.overtakes must be non-negative");
  if (sim.trace_every < 0) throw ConfigError("output.trace_every must be >= 0");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

json to_json(const RunConfig& cfg) {
  const auto& se = cfg.sim.sensor;
  const auto& sp = cfg.sim.spawn;
  const auto& sr = cfg.sim.search;
  const auto& k = cfg.sim.kinematics;
  return json{
      {"schema_version", kSchemaVersion},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"limits",
       {{"distance_km", optional_json(cfg.limits.distance_km)},
        {"sim_hours", optional_json(cfg.limits.sim_hours)},
        {"overtakes", optional_json(cfg.limits.overtakes)}}},
      {"sensor",
       {{"range_360", se.range_360},
        {"range_front_right", se.range_front_right},
        {"dropout_prob", se.dropout_prob},
        {"phantom_prob", se.phantom_prob},
        {"range_jitter_sigma", se.range_jitter_sigma},
        {"side_margin", se.side_margin},
        {"occlusion",
         se.occlusion == sensing::Occlusion::Strict ? "strict" : "off"},
        {"front_selection", se.front_selection == sensing::FrontSelection::Platoon
                                ? "platoon"
                                : "nearest"}}},
      {"spawn",
       {{"spawning", cfg.sim.spawning},
        {"left_count", sp.left_count},
        {"right_count", sp.right_count},
        {"left_gap_choices", sp.left_gap_choices},
        {"max_consecutive", sp.max_consecutive},
        {"right_gaps", sp.right_gaps},
        {"right_gap_probs", sp.right_gap_probs},
        {"despawn_behind", sp.despawn_behind}}},
      {"search",
       {{"depth_bound", sr.depth_bound},
        {"max_states", sr.max_states},
        {"max_lane_changes", sr.max_lane_changes},
        {"gap_target", sr.gap_target}}},
      {"kinematics",
       {{"dt", k.dt},
        {"max_accel", k.max_accel},
        {"tracker_gain", k.tracker_gain},
        {"lattice_phase", k.lattice_phase}}},
      {"output",
       {{"events", cfg.output.events},
        {"trace", cfg.output.trace},
        {"trace_every", cfg.sim.trace_every},
        {"summary", cfg.output.summary}}},
  };
}

RunConfig config_from_json(const json& j) {
  Section top(j, "config",
              {"schema_version", "seed", "threads", "limits", "sensor", "spawn",
               "search", "kinematics", "output"});
  if (!top.has("schema_version")) throw ConfigError("config: schema_version is required");
  int version = 0;
  top.read("schema_version", version);
  if (version != kSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(version));

  RunConfig cfg;
  top.read("seed", cfg.seed);
  top.read("threads", cfg.threads);

  if (top.has("limits")) {
    Section s(top.at("limits"), "limits", {"distance_km", "sim_hours", "overtakes"});
    s.read("distance_km", cfg.limits.distance_km);
    s.read("sim_hours", cfg.limits.sim_hours);
    s.read("overtakes", cfg.limits.overtakes);
  }
  if (top.has("sensor")) {
    Section s(top.at("sensor"), "sensor",
              {"range_360", "range_front_right", "dropout_prob", "phantom_prob",
               "range_jitter_sigma", "side_margin", "occlusion",
               "front_selection"});
    auto& se = cfg.sim.sensor;
    s.read("range_360", se.range_360);
    s.read("range_front_right", se.range_front_right);
    s.read("dropout_prob", se.dropout_prob);
    s.read("phantom_prob", se.phantom_prob);
    s.read("range_jitter_sigma", se.range_jitter_sigma);
    s.read("side_margin", se.side_margin);
    std::string occ = "off";
    s.read("occlusion", occ);
    if (occ == "off")
      se.occlusion = sensing::Occlusion::Off;
    else if (occ == "strict")
      se.occlusion = sensing::Occlusion::Strict;
    else
      throw ConfigError("sensor.occlusion must be \"off\" or \"strict\"");
    std::string sel = se.front_selection == sensing::FrontSelection::Platoon
                          ? "platoon"
                          : "nearest";
    s.read("front_selection", sel);
    if (sel == "platoon")
      se.front_selection = sensing::FrontSelection::Platoon;
    else if (sel == "nearest")
      se.front_selection = sensing::FrontSelection::Nearest;
    else
      throw ConfigError("sensor.front_selection must be \"platoon\" or \"nearest\"");
  }
  if (top.has("spawn")) {
    Section s(top.at("spawn"), "spawn",
              {"spawning", "left_count", "right_count", "left_gap_choices",
               "max_consecutive", "right_gaps", "right_gap_probs", "despawn_behind"});
    auto& sp = cfg.sim.spawn;
    s.read("spawning", cfg.sim.spawning);
    s.read("left_count", sp.left_count);
    s.read("right_count", sp.right_count);
    s.read("left_gap_choices", sp.left_gap_choices);
    s.read("max_consecutive", sp.max_consecutive);
    s.read("right_gaps", sp.right_gaps);
    s.read("right_gap_probs", sp.right_gap_probs);
    s.read("despawn_behind", sp.despawn_behind);
  }
  if (top.has("search")) {
    Section s(top.at("search"), "search",
              {"depth_bound", "max_states", "max_lane_changes", "gap_target"});
    auto& sr = cfg.sim.search;
    s.read("depth_bound", sr.depth_bound);
    s.read("max_states", sr.max_states);
    s.read("max_lane_changes", sr.max_lane_changes);
    s.read("gap_target", sr.gap_target);
  }
  if (top.has("kinematics")) {
    Section s(top.at("kinematics"), "kinematics",
              {"dt", "max_accel", "tracker_gain", "lattice_phase"});
    auto& k = cfg.sim.kinematics;
    s.read("dt", k.dt);
    s.read("max_accel", k.max_accel);
    s.read("tracker_gain", k.tracker_gain);
    s.read("lattice_phase", k.lattice_phase);
  }
  if (top.has("output")) {
    Section s(top.at("output"), "output", {"events", "trace", "trace_every", "summary"});
    s.read("events", cfg.output.events);
    s.read("trace", cfg.output.trace);
    s.read("trace_every", cfg.sim.trace_every);
    s.read("summary", cfg.output.summary);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

std::uint64_t sub_seed(std::uint64_t master, std::size_t index) {
  std::uint64_t z = master + (static_cast<std::uint64_t>(index) + 1) *
                                 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RunOutput run_single(const RunConfig& cfg, bool keep_events,
                     const sim::EventSink& trace) {
  cfg.validate();
  RunOutput out;
  sim::Simulation simulation(cfg.sim, cfg.seed);
  if (keep_events)
    simulation.set_event_sink(
        [&out](const std::string& line) { out.events.push_back(line); });
  if (trace) simulation.set_trace_sink(trace);
  out.metrics = simulation.run(cfg.limits);
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

BatchSummary run_batch(const RunConfig& cfg, int n_runs, bool keep_events) {
  if (n_runs < 1) throw ConfigError("batch needs at least one run");
  cfg.validate();
  BatchSummary summary;
  summary.master_seed = cfg.seed;
  for (int i = 0; i < n_runs; ++i)
    summary.seeds.push_back(sub_seed(cfg.seed, static_cast<std::size_t>(i)));

  std::vector<RunOutput> outputs(static_cast<std::size_t>(n_runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n_runs; i = next++) {
      RunConfig run = cfg;
      run.seed = summary.seeds[static_cast<std::size_t>(i)];
      outputs[static_cast<std::size_t>(i)] = run_single(run, keep_events);
    }
  };
  int threads = cfg.threads == 0
                    ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                    : cfg.threads;
  threads = std::min(threads, n_runs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<double> distance, overtaken, runtime;
  for (auto& o : outputs) {
    const auto& m = o.metrics;
    summary.runs.push_back(m);
    distance.push_back(m.distance_km);
    overtaken.push_back(m.overtaken_count);
    runtime.push_back(m.sim_time);
    summary.total_distance_km += m.distance_km;
    summary.total_overtaken += m.overtaken_count;
    summary.total_runtime_s += m.sim_time;
    ++summary.failure_histogram[std::string(sim::to_string(m.failure_cause))];
    if (keep_events)
      summary.events.insert(summary.events.end(), o.events.begin(), o.events.end());
  }
  summary.median_distance_km = median(distance);
  summary.median_overtaken = median(overtaken);
  summary.median_runtime_s = median(runtime);
  return summary;
}

std::string format_runtime(double seconds) {
  const auto total = static_cast<long long>(std::llround(seconds));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld:%02lld:%02lld", total / 3600,
                (total / 60) % 60, total % 60);
  return buf;
}

std::string format_table(const BatchSummary& summary) {
  const std::vector<std::string> header = {"Run", "Runtime", "Vehicles overtaken",
                                           "Distance", "Failure cause"};
  std::vector<std::vector<std::string>> rows;
  auto km = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v << " km";
    return s.str();
  };
  auto number = [](double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  };
  for (std::size_t i = 0; i < summary.runs.size(); ++i) {
    const auto& m = summary.runs[i];
    rows.push_back({std::to_string(i + 1), format_runtime(m.sim_time),
                    std::to_string(m.overtaken_count), km(m.distance_km),
                    std::string(sim::to_string(m.failure_cause))});
  }
  rows.push_back({"median", format_runtime(summary.median_runtime_s),
                  number(summary.median_overtaken), km(summary.median_distance_km), ""});
  rows.push_back({"total", format_runtime(summary.total_runtime_s),
                  std::to_string(summary.total_overtaken),
                  km(summary.total_distance_km), ""});

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    std::string text;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::ostringstream cell;
      // numbers right-aligned, text left-aligned
      if (c == 0 || c == 4)
        cell << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      else
        cell << std::right << std::setw(static_cast<int>(width[c])) << cells[c];
      if (c) text += "  ";
      text += cell.str();
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out << text << '\n';
  };
  line(header);
  std::size_t rule = 0;
  for (auto w : width) rule += w;
  out << std::string(rule + 2 * (width.size() - 1), '-') << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i + 2 == rows.size()) out << std::string(rule + 2 * (width.size() - 1), '-') << '\n';
    line(rows[i]);
  }
  return out.str();
}

json metrics_json(const sim::RunMetrics& m) {
  return json{{"sim_time_s", m.sim_time},
              {"overtaken", m.overtaken_count},
              {"distance_km", m.distance_km},
              {"failure_cause", sim::to_string(m.failure_cause)},
              {"plans", m.plans},
              {"replans_new_vehicle", m.replans_new_vehicle}};
}

json summary_json(const BatchSummary& summary) {
  json runs = json::array();
  for (std::size_t i = 0; i < summary.runs.size(); ++i) {
    json r = metrics_json(summary.runs[i]);
    r["seed"] = summary.seeds[i];
    runs.push_back(r);
  }
  return json{{"master_seed", summary.master_seed},
              {"runs", runs},
              {"median_distance_km", summary.median_distance_km},
              {"median_overtaken", summary.median_overtaken},
              {"median_runtime_s", summary.median_runtime_s},
              {"total_distance_km", summary.total_distance_km},
              {"total_overtaken", summary.total_overtaken},
              {"total_runtime_s", summary.total_runtime_s},
              {"failure_histogram", summary.failure_histogram}};
}

}  // namespace overtake::harness

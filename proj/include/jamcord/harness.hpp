#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "jamcord/errors.hpp"
#include "jamcord/grasp_simulation.hpp"
#include "jamcord/gripper_assembly.hpp"
#include "jamcord/json_util.hpp"

namespace jamcord {

namespace fs = std::filesystem;

/// The sweep would run more cells than allowed.
class SweepTooLarge : public Error {
 public:
  SweepTooLarge(std::size_t cells, std::size_t cap)
      : Error("sweep has " + (cells == 0 ? std::string("too many") : std::to_string(cells)) + " cells, cap is " +
              std::to_string(cap)) {}
};

inline constexpr std::size_t kDefaultSweepCap = 10000;

/// Finds a referenced file: absolute paths as given, then relative to `base_dir`,
/// then under $JAMCORD_CONFIG_DIR.
inline fs::path resolve_config_path(const std::string& ref, const fs::path& base_dir) {
  const fs::path p(ref);
  if (p.is_absolute()) {
    if (fs::exists(p)) return p;
    throw InvalidInput("file not found: " + ref);
  }
  if (fs::exists(base_dir / p)) return base_dir / p;
  if (const char* env = std::getenv("JAMCORD_CONFIG_DIR"); env && *env)
    if (fs::exists(fs::path(env) / p)) return fs::path(env) / p;
  throw InvalidInput("file not found: " + ref);
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + p.string());
  out << text;
}

// ---- scenario ---------------------------------------------------------------

struct Scenario {
  std::string id;
  GripperConfig gripper;
  ObjectShape object;
  Protocol protocol;
  std::string output_dir;  // empty: caller decides
};

/// Replaces a gripper file reference by the file's contents.
inline nlohmann::json resolve_scenario_json(nlohmann::json j, const fs::path& base_dir) {
  json_util::require_object(j, "Scenario");
  if (auto it = j.find("gripper"); it != j.end() && it->is_string())
    *it = json_util::load_file(resolve_config_path(it->get<std::string>(), base_dir).string());
  return j;
}

inline bool valid_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  return id.front() != '.';
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using namespace json_util;
  constexpr const char* what = "Scenario";
  require_object(j, what);
  reject_unknown(j, {"id", "gripper", "object", "protocol", "output_dir"}, what);
  Scenario s;
  s.id = string(j, "id", what);
  if (!valid_id(s.id)) throw InvalidInput("Scenario.id: use letters, digits, '-', '_' or '.'");
  s.gripper = j.contains("gripper") ? gripper_config_from_json(j.at("gripper")) : GripperConfig{};
  s.object = object_from_json(field(j, "object", what));
  s.protocol = j.contains("protocol") ? protocol_from_json(j.at("protocol")) : Protocol{};
  if (j.contains("output_dir")) s.output_dir = string(j, "output_dir", what);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  const auto j = json_util::load_file(path);
  return scenario_from_json(resolve_scenario_json(j, fs::path(path).parent_path()));
}

struct SimulationOutput {
  GraspTrace trace;
  nlohmann::json summary;
};

inline nlohmann::json phase_summary(const GraspTrace& t) {
  nlohmann::json out = nlohmann::json::object();
  std::size_t index = 0;
  for (Phase p : {Phase::Press, Phase::Jam, Phase::Lift}) {
    const auto s = t.phase(p);
    if (s.empty()) continue;
    // rows of one phase are contiguous in the trace
    while (index < t.samples.size() && t.samples[index].phase != p) ++index;
    out[to_string(p)] = {{"first_row", index},
                         {"rows", s.size()},
                         {"start_mm", s.front().displacement},
                         {"end_mm", s.back().displacement}};
    index += s.size();
  }
  return out;
}

inline SimulationOutput run_scenario(const Scenario& s, const NoiseHook& noise = {}) {
  auto run = simulate_grasp(s.gripper, s.object, s.protocol);
  apply_noise(run.trace, noise);
  SimulationOutput out;
  out.summary = {{"id", s.id},
                 {"config_hash", config_hash(s.gripper)},
                 {"object", to_json(s.object)},
                 {"protocol", to_json(s.protocol)},
                 {"max_holding_force_N", max_holding_force(run.trace)},
                 {"escaped", run.trace.escaped},
                 {"chains_in_contact", run.trace.chains_in_contact},
                 {"phases", phase_summary(run.trace)}};
  if (noise.seed) out.summary["noise_seed"] = *noise.seed;
  out.trace = std::move(run.trace);
  return out;
}

struct ScenarioFiles {
  fs::path trace;
  fs::path summary;
};

inline ScenarioFiles scenario_files(const fs::path& dir, const std::string& id) {
  return {dir / (id + ".csv"), dir / (id + ".summary.json")};
}

inline ScenarioFiles write_outputs(const fs::path& dir, const std::string& id, const SimulationOutput& o) {
  const auto files = scenario_files(dir, id);
  write_text(files.trace, trace_to_csv(o.trace));
  write_text(files.summary, o.summary.dump(2) + "\n");
  return files;
}

inline fs::path write_failure(const fs::path& dir, const std::string& id, const SimulationFailure& e) {
  const auto p = dir / (id + ".failure.json");
  const nlohmann::json j{
      {"id", id}, {"phase", to_string(e.phase())}, {"displacement_mm", e.displacement()}, {"message", e.what()}};
  write_text(p, j.dump(2) + "\n");
  return p;
}

// ---- sweep -------------------------------------------------------------------

struct SweepAxis {
  std::string path;  // dotted path into the scenario JSON, e.g. protocol.pressure_B
  std::vector<nlohmann::json> values;
};

struct SweepSpec {
  nlohmann::json base;  // scenario JSON with the gripper resolved
  std::vector<SweepAxis> axes;
  int parallelism = 1;
  std::size_t cap = kDefaultSweepCap;
};

inline SweepSpec sweep_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  using namespace json_util;
  constexpr const char* what = "SweepSpec";
  require_object(j, what);
  reject_unknown(j, {"base", "axes", "parallelism", "cap"}, what);
  SweepSpec s;
  const auto& base = field(j, "base", what);
  if (base.is_string()) {
    const auto p = resolve_config_path(base.get<std::string>(), base_dir);
    s.base = resolve_scenario_json(load_file(p.string()), p.parent_path());
  } else {
    s.base = resolve_scenario_json(base, base_dir);
  }
  const auto& axes = field(j, "axes", what);
  if (!axes.is_array() || axes.empty()) throw InvalidInput("SweepSpec.axes: expected a non-empty array");
  for (const auto& a : axes) {
    require_object(a, "SweepSpec axis");
    reject_unknown(a, {"path", "values"}, "SweepSpec axis");
    SweepAxis ax;
    ax.path = string(a, "path", "SweepSpec axis");
    if (ax.path.empty() || ax.path == "id") throw InvalidInput("SweepSpec axis: path cannot be empty or 'id'");
    const auto& v = field(a, "values", "SweepSpec axis");
    if (!v.is_array() || v.empty()) throw InvalidInput("SweepSpec axis " + ax.path + ": values must be non-empty");
    ax.values.assign(v.begin(), v.end());
    s.axes.push_back(std::move(ax));
  }
  if (j.contains("parallelism")) {
    const auto p = integer(j, "parallelism", what);
    if (p < 1 || p > 256) throw InvalidInput("SweepSpec.parallelism must be in [1, 256]");
    s.parallelism = static_cast<int>(p);
  }
  if (j.contains("cap")) {
    const auto c = integer(j, "cap", what);
    if (c < 1) throw InvalidInput("SweepSpec.cap must be >= 1");
    s.cap = static_cast<std::size_t>(c);
  }
  return s;
}

inline SweepSpec load_sweep(const std::string& path) {
  return sweep_from_json(json_util::load_file(path), fs::path(path).parent_path());
}

/// Number of cells, or 0 if the product overflows.
inline std::size_t sweep_size(const SweepSpec& s) {
  std::size_t n = 1;
  for (const auto& a : s.axes) {
    if (n > std::numeric_limits<std::size_t>::max() / a.values.size()) return 0;
    n *= a.values.size();
  }
  return n;
}

inline void set_path(nlohmann::json& j, const std::string& path, const nlohmann::json& value) {
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw InvalidInput("sweep path '" + path + "': empty component");
    if (!node->is_object()) throw InvalidInput("sweep path '" + path + "': '" + key + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

struct SweepCell {
  std::string id;
  std::vector<nlohmann::json> params;  // one per axis
  nlohmann::json scenario;
};

/// Cartesian product, last axis fastest. Ids are the base id plus a zero-padded
/// cell index, so sorting by id keeps the product order.
inline std::vector<SweepCell> expand_sweep(const SweepSpec& s) {
  const std::size_t n = sweep_size(s);
  if (n == 0 || n > s.cap) throw SweepTooLarge(n, s.cap);
  const std::string base_id = s.base.value("id", std::string("cell"));
  const std::size_t width = std::to_string(n - 1).size();
  std::vector<SweepCell> cells;
  cells.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    SweepCell c;
    c.scenario = s.base;
    std::size_t rem = k;
    c.params.resize(s.axes.size());
    for (std::size_t a = s.axes.size(); a-- > 0;) {
      const auto& ax = s.axes[a];
      c.params[a] = ax.values[rem % ax.values.size()];
      rem /= ax.values.size();
    }
    for (std::size_t a = 0; a < s.axes.size(); ++a) set_path(c.scenario, s.axes[a].path, c.params[a]);
    std::string idx = std::to_string(k);
    c.id = base_id + "-" + std::string(width - idx.size(), '0') + idx;
    c.scenario["id"] = c.id;
    c.scenario.erase("output_dir");
    cells.push_back(std::move(c));
  }
  return cells;
}

struct CellResult {
  std::string id;
  std::vector<nlohmann::json> params;
  std::string status;  // ok, solver_failure, invalid
  std::string message;
  std::optional<SimulationOutput> output;
  std::optional<SimulationFailure> failure;
};

inline CellResult run_cell(const SweepCell& cell, const NoiseHook& noise) {
  CellResult r{cell.id, cell.params, "ok", "", std::nullopt, std::nullopt};
  try {
    r.output = run_scenario(scenario_from_json(cell.scenario), noise);
  } catch (const SimulationFailure& e) {
    r.status = "solver_failure";
    r.message = e.what();
    r.failure = e;
  } catch (const Error& e) {
    r.status = "invalid";
    r.message = e.what();
  }
  return r;
}

/// Runs every cell on `parallelism` threads. Results come back sorted by id
/// whatever order the workers finish in. Cell k uses noise seed `seed + k`.
inline std::vector<CellResult> run_sweep(const SweepSpec& s, const NoiseHook& noise = {}) {
  const auto cells = expand_sweep(s);
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < cells.size();) {
      NoiseHook h = noise;
      if (h.seed) h.seed = *h.seed + k;
      results[k] = run_cell(cells[k], h);
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(s.parallelism), cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::sort(results.begin(), results.end(), [](const CellResult& a, const CellResult& b) { return a.id < b.id; });
  return results;
}

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string aggregate_csv(const SweepSpec& s, const std::vector<CellResult>& results) {
  std::string out = "id";
  for (const auto& a : s.axes) out += "," + csv_cell(a.path);
  out += ",max_holding_force_N,status\n";
  for (const auto& r : results) {
    out += csv_cell(r.id);
    for (const auto& p : r.params) out += "," + csv_cell(p.is_string() ? p.get<std::string>() : p.dump());
    out += ",";
    if (r.output) out += format_g6(r.output->summary.at("max_holding_force_N").get<double>());
    out += "," + r.status + "\n";
  }
  return out;
}

/// Writes cells/<id>.csv and .summary.json (or .failure.json) for every cell
/// and aggregate.csv under `dir`.
inline void write_sweep(const fs::path& dir, const SweepSpec& s, const std::vector<CellResult>& results) {
  for (const auto& r : results) {
    if (r.output) write_outputs(dir / "cells", r.id, *r.output);
    else if (r.failure) write_failure(dir / "cells", r.id, *r.failure);
  }
  write_text(dir / "aggregate.csv", aggregate_csv(s, results));
}

}  // namespace jamcord

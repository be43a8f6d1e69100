// jamcord: validate bead specs, run grasp scenarios and sweeps, plot traces,
// screen bills of materials for fire exposure.
//
// Exit codes: 0 ok, 1 check failed (invalid spec, failing components),
// 2 bad input or usage, 3 solver failure, 4 sweep too large, 5 plot input
// schema mismatch.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "jamcord/bead_geometry.hpp"
#include "jamcord/gripper_assembly.hpp"
#include "jamcord/harness.hpp"
#include "jamcord/svg_plot.hpp"
#include "jamcord/thermal_check.hpp"

using namespace jamcord;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kBadInput = 2, kSolverFailure = 3, kTooLarge = 4, kSchema = 5 };

struct Globals {
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

NoiseHook noise_of(const Globals& g) {
  NoiseHook h;
  h.seed = g.seed;
  return h;
}

std::string fmt_num(double v) { return format_g6(v); }

int cmd_validate(const Globals& g, const std::string& file) {
  const auto j = json_util::load_file(file);
  json_util::require_object(j, "spec");
  BeadSpec bead;
  std::optional<GripperConfig> gripper;
  if (j.contains("chain")) {
    gripper = gripper_config_from_json(j);
    bead = gripper->chain.bead;
  } else if (j.contains("bead")) {
    bead = chain_spec_from_json(j).bead;
  } else {
    bead = bead_spec_from_json(j);
  }
  const auto report = validate_bead_spec(bead);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& v : report.violations)
    std::cout << to_string(v.id) << ": " << v.message << " (measured " << fmt_num(v.measured) << ", required "
              << fmt_num(v.required) << ")\n";
  if (!report.valid()) return kCheckFailed;
  if (gripper) {
    try {
      check_gripper_config(*gripper);
    } catch (const ConfigError& e) {
      std::cout << "CONFIG " << e.field() << ": " << e.what() << "\n";
      return kCheckFailed;
    }
  }
  if (!g.quiet) std::cout << "valid\n";
  return kOk;
}

int cmd_simulate(const Globals& g, const std::string& file) {
  const auto s = load_scenario(file);
  const fs::path dir = !g.out.empty() ? fs::path(g.out) : !s.output_dir.empty() ? fs::path(s.output_dir) : fs::path(".");
  try {
    const auto o = run_scenario(s, noise_of(g));
    const auto files = write_outputs(dir, s.id, o);
    if (!g.quiet)
      std::cout << files.trace.string() << "\n"
                << files.summary.string() << "\n"
                << "max holding force " << fmt_num(o.summary["max_holding_force_N"].get<double>()) << " N\n";
    return kOk;
  } catch (const SimulationFailure& e) {
    const auto p = write_failure(dir, s.id, e);
    std::cerr << e.what() << "\ndiagnostics: " << p.string() << "\n";
    return kSolverFailure;
  }
}

int cmd_sweep(const Globals& g, const std::string& file, int parallelism) {
  auto spec = load_sweep(file);
  if (parallelism > 0) spec.parallelism = parallelism;
  // refuse before touching the output directory
  const auto n = sweep_size(spec);
  if (n == 0 || n > spec.cap) throw SweepTooLarge(n, spec.cap);
  const fs::path dir = !g.out.empty() ? fs::path(g.out)
                       : spec.base.contains("output_dir") ? fs::path(spec.base["output_dir"].get<std::string>())
                                                          : fs::path(".");
  const auto results = run_sweep(spec, noise_of(g));
  write_sweep(dir, spec, results);
  int failed = 0, invalid = 0;
  for (const auto& r : results) {
    if (r.status == "solver_failure") {
      ++failed;
      std::cerr << r.id << ": " << r.message << "\n";
    } else if (r.status == "invalid") {
      ++invalid;
      std::cerr << r.id << ": " << r.message << "\n";
    }
  }
  if (!g.quiet) std::cout << (dir / "aggregate.csv").string() << "\n" << results.size() << " cells\n";
  if (invalid) return kBadInput;
  return failed ? kSolverFailure : kOk;
}

int cmd_plot(const Globals& g, const std::vector<std::string>& files, const std::string& phase,
             const std::string& title, const std::string& name) {
  if (files.empty()) {
    std::cerr << "plot: no traces given\n";
    return kSchema;
  }
  std::vector<PlotSeries> series;
  for (const auto& f : files) {
    const auto text = read_text(f);
    try {
      series.push_back({fs::path(f).stem().string(), trace_from_csv(text)});
    } catch (const InvalidInput& e) {
      std::cerr << f << ": " << e.what() << "\n";
      return kSchema;
    }
  }
  PlotOptions opt;
  opt.title = title;
  if (phase == "press") opt.phase = Phase::Press;
  else if (phase == "jam") opt.phase = Phase::Jam;
  else if (phase == "lift") opt.phase = Phase::Lift;
  else if (!phase.empty()) throw InvalidInput("--phase must be press, jam or lift");
  std::string svg;
  try {
    svg = plot_svg(series, opt);
  } catch (const InvalidInput& e) {
    std::cerr << "plot: " << e.what() << "\n";
    return kSchema;
  }
  if (g.out.empty()) {
    std::cout << svg;
  } else {
    const auto p = fs::path(g.out) / name;
    write_text(p, svg);
    if (!g.quiet) std::cout << p.string() << "\n";
  }
  return kOk;
}

int cmd_firecheck(const Globals& g, const std::string& file, double temp) {
  const auto path = resolve_config_path(file, fs::current_path());
  const auto bom = load_bom(path.string());
  const auto findings = check_fire_exposure(bom, temp);
  for (const auto& f : findings)
    std::cout << "FAIL " << f.component << " (" << f.material << ", limit " << fmt_num(f.max_service_temp)
              << " C, short by " << fmt_num(f.deficit) << " C)\n";
  if (!g.quiet && findings.empty()) std::cout << "all " << bom.components.size() << " components pass at " << fmt_num(temp) << " C\n";
  return findings.empty() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jamcord: bead-chain jamming gripper simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--out", g.out, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for force noise (off when absent)");
  app.add_flag("--quiet", g.quiet, "Only print failures");

  std::string file;
  auto* validate = app.add_subcommand("validate", "Check a bead spec, chain spec or gripper config");
  validate->add_option("file", file, "JSON file")->required();

  auto* simulate = app.add_subcommand("simulate", "Run press, jam and lift for one scenario");
  simulate->add_option("scenario", file, "Scenario JSON")->required();

  int parallelism = 0;
  auto* sweep = app.add_subcommand("sweep", "Run every cell of a parameter sweep");
  sweep->add_option("spec", file, "Sweep JSON")->required();
  sweep->add_option("-j,--parallelism", parallelism, "Override the worker count")->check(CLI::Range(1, 256));

  std::vector<std::string> traces;
  std::string phase, title, name = "plot.svg";
  auto* plot = app.add_subcommand("plot", "Overlay trace CSVs as SVG (stdout unless --out)");
  plot->add_option("traces", traces, "Trace CSV files");
  plot->add_option("--phase", phase, "Only plot press, jam or lift");
  plot->add_option("--title", title, "Plot title");
  plot->add_option("--name", name, "File name under --out");

  double temp = 0.0;
  auto* fire = app.add_subcommand("firecheck", "Screen a bill of materials at an ambient temperature");
  fire->add_option("bom", file, "BOM JSON")->required();
  fire->add_option("temp", temp, "Environment temperature [C]")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*validate) return cmd_validate(g, file);
    if (*simulate) return cmd_simulate(g, file);
    if (*sweep) return cmd_sweep(g, file, parallelism);
    if (*plot) return cmd_plot(g, traces, phase, title, name);
    if (*fire) return cmd_firecheck(g, file, temp);
  } catch (const SweepTooLarge& e) {
    std::cerr << e.what() << "\n";
    return kTooLarge;
  } catch (const SimulationFailure& e) {
    std::cerr << e.what() << "\n";
    return kSolverFailure;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kBadInput;
  }
  return kBadInput;
}

// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "jamcord/bead_geometry.hpp"
#include "jamcord/chain_model.hpp"
#include "jamcord/grasp_simulation.hpp"
#include "jamcord/harness.hpp"
#include "jamcord/jamming_solver.hpp"
#include "jamcord/oracle.hpp"
#include "jamcord/svg_plot.hpp"
#include "jamcord/thermal_check.hpp"

using namespace jamcord;
namespace fs = std::filesystem;

namespace {

const std::string kData = JAMCORD_DATA_DIR;

struct Verdict {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string f6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

ChainSpec prototype_chain() { return GripperConfig{}.chain; }

Verdict c1_constraints() {
  const auto t0 = Clock::now();
  const BeadSpec base;
  if (!validate_bead_spec(base).valid()) return {false, "prototype bead does not validate"};
  struct Case {
    const char* name;
    std::function<void(BeadSpec&)> mutate;
    ConstraintId id;
  };
  const std::vector<Case> cases = {
      {"R2", [](BeadSpec& s) { s.R2 = 2.5; }, ConstraintId::EQ1},
      {"r1", [](BeadSpec& s) { s.r1 = 1.0; }, ConstraintId::EQ2},
      {"SD1", [](BeadSpec& s) { s.SD1 = 1.0; }, ConstraintId::EQ3},
      {"e", [](BeadSpec& s) { s.e = -0.1; }, ConstraintId::POSITIVITY},
      {"D1", [](BeadSpec& s) { s.D1 = s.R1 = s.R2 = s.R3 = 0.0; }, ConstraintId::POSITIVITY},
      {"effective_angle", [](BeadSpec& s) { s.effective_angle = Angle::from_deg(95.0); }, ConstraintId::ANGLE_RANGE},
  };
  for (const auto& c : cases) {
    BeadSpec s = base;
    c.mutate(s);
    const auto r = validate_bead_spec(s);
    std::set<ConstraintId> ids;
    for (const auto& v : r.violations) ids.insert(v.id);
    if (ids != std::set<ConstraintId>{c.id}) return {false, std::string("perturbing ") + c.name + " gave other ids"};
  }
  const double t = seconds_since(t0);
  return {t < 1.0, "6 perturbations, " + f6(t) + " s"};
}

Verdict c2_cup_invariance() {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    BeadSpec s;
    s.variant = BeadVariant::CupShaped;
    s.D1 = 1.0 + 20.0 * u(rng);
    s.R1 = s.R2 = s.R3 = s.D1 / 2;
    s.r2 = 0.1 + 3.0 * u(rng);
    s.r1 = s.r2 + 0.01 + 2.0 * u(rng);
    s.SD2 = 0.1 + 1.0 * u(rng);
    s.e = 0.01 + 0.5 * u(rng);
    s.SD1 = s.SD2 + s.e + 0.01 + u(rng);
    s.effective_angle = Angle::from_deg(1.0 + 88.0 * u(rng));
    if (!validate_bead_spec(s).valid()) return {false, "generator produced an invalid spec"};
    const double l0 = wire_path_length(s, Angle{});
    for (int k = 0; k < 50; ++k) {
      const double a = (2.0 * u(rng) - 1.0) * s.effective_angle.deg();
      worst = std::max(worst, std::abs(wire_path_length(s, Angle::from_deg(a)) - l0));
    }
  }
  return {worst < 1e-9, "max |L(theta) - L(0)| = " + f6(worst) + " mm"};
}

Verdict c3_restoring() {
  // 30 deg needs a bead that admits it; the rest of the prototype chain is kept.
  ChainSpec cup = prototype_chain();
  cup.bead.effective_angle = Angle::from_deg(30.0);
  const double T = 41.0;
  const auto theta = Angle::from_deg(30.0);
  double worst_cup = 0.0;
  for (std::size_t j = cup.rigid_root_units; j < cup.n_joints(); ++j)
    worst_cup = std::max(worst_cup, tip_straightening_force(cup, j, theta, T));

  ChainSpec sphere = cup;
  sphere.bead.variant = BeadVariant::SimpleSphere;
  const double m = restoring_moment(sphere, theta, T);
  const double h = 1e-6;
  const double fd = T *
                    (wire_path_length_unchecked(sphere.bead, theta.rad() + h) -
                     wire_path_length_unchecked(sphere.bead, theta.rad() - h)) /
                    (2 * h);
  const double rel = std::abs(m - fd) / std::abs(fd);
  const bool ok = worst_cup <= 0.9 && m > 0.0 && rel < 1e-6;
  return {ok, "cup tip force " + f6(worst_cup) + " N, sphere moment " + f6(m) + " N mm, fd rel err " + f6(rel)};
}

Verdict c4_linearity() {
  const auto c = prototype_chain();
  for (int i = 1; i <= 10; ++i) {
    const double t = 4.1 * i;
    if (friction_capacity(c, 2 * t) != 2 * friction_capacity(c, t)) return {false, "not exact at T=" + f6(t)};
  }
  return {true, "exact at 10 tensions"};
}

Verdict c5_oracle() {
  const auto t0 = Clock::now();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    ChainSpec c;
    c.bead.variant = u(rng) < 0.5 ? BeadVariant::CupShaped : BeadVariant::SimpleSphere;
    c.bead.effective_angle = Angle::from_deg(10.0 + 25.0 * u(rng));
    c.n_units = u(rng) < 0.25 ? 2 : 3;
    c.unit_pitch = 6.0;
    c.rigid_root_units = 0;
    c.planar = u(rng) < 0.5;
    c.mu = 0.1 + 0.4 * u(rng);
    const double tension = u(rng) < 0.2 ? 0.0 : 50.0 * u(rng);
    const auto start = ChainState::straight(c, tension);
    LoadCase lc;
    const double mag = 0.5 + 15.0 * u(rng);
    const double dir = deg_to_rad(20.0 + 140.0 * u(rng)) * (u(rng) < 0.5 ? 1.0 : -1.0);
    lc.point_loads.push_back({c.n_units - 1, mag * Vec2(std::cos(dir), std::sin(dir))});
    const auto s = solve_equilibrium(c, start, lc);
    const auto o = brute_force_equilibrium(c, start, lc, Angle::from_deg(0.1));
    for (std::size_t j = 0; j < c.n_joints(); ++j)
      worst = std::max(worst, std::abs(s.angles[j].deg() - o.angles[j].deg()));
  }
  const double t = seconds_since(t0);
  return {worst < 0.5 && t < 60.0, "max joint gap " + f6(worst) + " deg, " + f6(t) + " s"};
}

Verdict c6_cantilever() {
  const auto c = prototype_chain();
  double prev = std::numeric_limits<double>::infinity();
  std::string trail;
  bool ok = true;
  for (double t : {0.0, 2.0, 5.0, 10.0, 41.0}) {
    const double d = cantilever_stiffness(c, t, {1.0})[0].tip_deflection;
    ok = ok && d <= prev;
    trail += (trail.empty() ? "" : " ") + f6(d);
    prev = d;
  }
  return {ok, "deflection at T=0,2,5,10,41 N: " + trail + " mm"};
}

Protocol protocol_with(double pA, double pB) {
  Protocol p;
  p.pressure_A = pA;
  p.pressure_B = pB;
  return p;
}

Verdict c7_pressure_trend() {
  const auto t0 = Clock::now();
  const GripperConfig g;
  std::string detail;
  bool ok = true;
  for (const auto& [name, obj] : {std::pair{"cylinder", ObjectShape::cylinder(30.0)},
                                  std::pair{"prism", ObjectShape::prism(Angle::from_deg(30.0))}}) {
    const double f100 = max_holding_force(simulate_grasp(g, obj, protocol_with(20.0, 100.0)).trace);
    const double f200 = max_holding_force(simulate_grasp(g, obj, protocol_with(20.0, 200.0)).trace);
    ok = ok && f200 >= f100;
    detail += std::string(name) + " " + f6(f100) + " -> " + f6(f200) + " N; ";
  }
  const double t = seconds_since(t0);
  return {ok && t < 300.0, detail + f6(t) + " s"};
}

Verdict c8_press_trend() {
  const GripperConfig g;
  const auto obj = ObjectShape::cylinder(30.0);
  std::vector<std::vector<TraceSample>> runs;
  std::vector<std::optional<double>> onsets;
  for (double pA : {10.0, 20.0, 50.0}) {
    const auto r = press(g, build_gripper(g), obj, protocol_with(pA, 200.0));
    runs.push_back(r.trace.phase(Phase::Press));
    onsets.push_back(contact_onset(r.trace));
  }
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].size() != runs[0].size()) return {false, "press traces sampled differently"};
    for (std::size_t i = 0; i < runs[0].size(); ++i)
      if (runs[k][i].force < runs[k - 1][i].force)
        return {false, "force not ordered at " + f6(runs[0][i].displacement) + " mm"};
  }
  for (const auto& o : onsets)
    if (!o) return {false, "no contact during press"};
  const bool onset_ok = *onsets[0] >= *onsets[1] && *onsets[1] >= *onsets[2];
  return {onset_ok, "ordered at all " + std::to_string(runs[0].size()) + " samples; onset 10/20/50 kPa: " +
                        f6(*onsets[0]) + "/" + f6(*onsets[1]) + "/" + f6(*onsets[2]) + " mm"};
}

Verdict c9_prism_decay() {
  const GripperConfig g;
  const auto tr = simulate_grasp(g, ObjectShape::prism(Angle::from_deg(30.0)), protocol_with(20.0, 200.0)).trace;
  const auto w = lift_window_maxima(tr, 5.0);
  std::string trail;
  bool ok = !w.empty();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i > 0) ok = ok && w[i] <= w[i - 1];
    trail += (i ? " " : "") + f6(w[i]);
  }
  return {ok, "5 mm window maxima: " + trail + " N"};
}

Verdict c10_comparison() {
  const auto trace = trace_from_csv(read_text(kData + "/fixtures/torus_synthetic.csv"));
  const auto base = trace_from_csv(read_text(kData + "/fixtures/membrane_baseline.csv"));
  const auto rep = compare_to_baseline(trace, base);
  const bool ok = std::abs(rep.ratio - 1.4) < 1e-9 && rep.crossover && std::abs(*rep.crossover - 25.0) < 1e-9;
  return {ok, "ratio " + f6(rep.ratio) + ", crossover " + (rep.crossover ? f6(*rep.crossover) + " mm" : "none")};
}

Verdict c11_fire() {
  const auto fire = load_bom(kData + "/bom_fire_resistant.json");
  const auto membrane = load_bom(kData + "/bom_membrane.json");
  const auto nf = check_fire_exposure(fire, 600.0).size();
  const auto nm = check_fire_exposure(membrane, 600.0).size();
  bool monotone = true;
  for (const auto* bom : {&fire, &membrane}) {
    std::set<std::string> prev;
    for (int i = 0; i < 10; ++i) {
      std::set<std::string> cur;
      for (const auto& f : check_fire_exposure(*bom, -20.0 + 250.0 * i)) cur.insert(f.component);
      monotone = monotone && std::includes(cur.begin(), cur.end(), prev.begin(), prev.end());
      prev = cur;
    }
  }
  return {nf == 0 && nm > 0 && monotone, "600 C: fire-resistant " + std::to_string(nf) + " failing, membrane " +
                                             std::to_string(nm) + " failing; monotone " + (monotone ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int sh(const std::string& cmd) {
  const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb || fa.empty()) return false;
  for (const auto& f : fa)
    if (slurp(a / f) != slurp(b / f)) return false;
  return true;
}

Verdict c12_determinism(const std::string& cli) {
  const auto root = fs::temp_directory_path() / "jamcord_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string q = "\"";
  const std::string bin = q + cli + q;
  const std::string scen = q + kData + "/scenarios/cylinder_200.json" + q;
  const std::string sweep = q + kData + "/scenarios/sweep_pressure_object.json" + q;
  const std::string traces =
      q + kData + "/fixtures/membrane_baseline.csv" + q + " " + q + kData + "/fixtures/torus_synthetic.csv" + q;
  int rc = 0;
  for (const char* run : {"sim1", "sim2"}) rc |= sh(bin + " --quiet --out " + q + (root / run).string() + q + " simulate " + scen);
  for (const char* run : {"plot1", "plot2"}) rc |= sh(bin + " --quiet --out " + q + (root / run).string() + q + " plot " + traces);
  rc |= sh(bin + " --quiet --out " + q + (root / "sweep1").string() + q + " sweep -j 1 " + sweep);
  rc |= sh(bin + " --quiet --out " + q + (root / "sweep4").string() + q + " sweep -j 4 " + sweep);
  if (rc != 0) return {false, "a CLI run exited non-zero"};
  const bool sim = same_tree(root / "sim1", root / "sim2");
  const bool plot = same_tree(root / "plot1", root / "plot2");
  const bool sw = same_tree(root / "sweep1", root / "sweep4");
  return {sim && plot && sw, std::string("simulate ") + (sim ? "identical" : "differs") + ", plot " +
                                 (plot ? "identical" : "differs") + ", sweep -j1 vs -j4 " + (sw ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : JAMCORD_CLI;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"constraint suite", c1_constraints},
      {"cup path-length invariance", c2_cup_invariance},
      {"restoring-force bound", c3_restoring},
      {"jamming linearity", c4_linearity},
      {"oracle equivalence", c5_oracle},
      {"jamming monotonicity", c6_cantilever},
      {"grasp pressure trend", c7_pressure_trend},
      {"press pressure trend", c8_press_trend},
      {"triangle decay", c9_prism_decay},
      {"comparison arithmetic", c10_comparison},
      {"fire screening", c11_fire},
      {"determinism", [&] { return c12_determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
  }
  return failed == 0 ? 0 : 1;
}

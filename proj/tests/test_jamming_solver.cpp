#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "jamcord/jamming_solver.hpp"
#include "jamcord/oracle.hpp"

using namespace jamcord;
using Catch::Approx;

namespace {

ChainSpec small_chain(BeadVariant v = BeadVariant::CupShaped, bool planar = true) {
  ChainSpec c;
  c.bead.variant = v;
  c.n_units = 3;
  c.unit_pitch = 6.0;
  c.planar = planar;
  return c;
}

ChainSpec prototype_chain() {
  ChainSpec c;
  c.n_units = 30;
  c.unit_pitch = 6.0;
  c.rigid_root_units = 15;
  return c;
}

struct RandomCase {
  ChainSpec spec;
  LoadCase loads;
  ChainState start;
};

RandomCase random_case(std::mt19937& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  RandomCase rc;
  rc.spec = small_chain(u01(rng) < 0.5 ? BeadVariant::CupShaped : BeadVariant::SimpleSphere, u01(rng) < 0.5);
  rc.spec.bead.effective_angle = Angle::from_deg(10.0 + 25.0 * u01(rng));
  rc.spec.mu = 0.1 + 0.4 * u01(rng);
  const double tension = u01(rng) < 0.2 ? 0.0 : 50.0 * u01(rng);
  rc.start = ChainState::straight(rc.spec, tension);
  const double mag = 0.5 + 15.0 * u01(rng);
  const double dir = deg_to_rad(20.0 + 140.0 * u01(rng)) * (u01(rng) < 0.5 ? 1.0 : -1.0);
  rc.loads.point_loads.push_back({2, mag * Vec2(std::cos(dir), std::sin(dir))});
  if (u01(rng) < 0.3) rc.loads.point_loads.push_back({1, Vec2(0.0, 3.0 * (u01(rng) - 0.5))});
  return rc;
}

}  // namespace

TEST_CASE("zero load leaves the start unchanged", "[solver]") {
  const auto c = prototype_chain();
  const auto s0 = ChainState::straight(c, 37.0);
  const auto s = solve_equilibrium(c, s0, LoadCase{});
  CHECK(s.angles == s0.angles);
  for (auto st : s.joint_status) CHECK(st == JointStatus::Stuck);
}

TEST_CASE("tip force below the capacity threshold keeps a 2-joint chain stuck", "[solver]") {
  const auto c = small_chain();
  const double T = 20.0;
  const double cap = friction_capacity(c, T);
  // Root joint carries the largest moment: F * 2 * pitch.
  const double threshold = cap / (2.0 * c.unit_pitch);
  LoadCase lc;
  lc.point_loads.push_back({2, Vec2(0.0, 0.99 * threshold)});
  const auto s = solve_equilibrium(c, ChainState::straight(c, T), lc);
  CHECK(s.angles[0].rad() == 0.0);
  CHECK(s.angles[1].rad() == 0.0);
  lc.point_loads[0].force.y() = 1.05 * threshold;
  const auto moved = solve_equilibrium(c, ChainState::straight(c, T), lc);
  CHECK(moved.angles[0].rad() > 0.0);
  CHECK(moved.joint_status[0] != JointStatus::Stuck);
}

TEST_CASE("floppy chain rotates to its limits under a transverse tip force", "[solver]") {
  const auto c = small_chain();
  LoadCase lc;
  lc.point_loads.push_back({2, Vec2(0.0, 5.0)});
  const auto s = solve_equilibrium(c, ChainState::straight(c, 0.0), lc);
  const auto oracle = brute_force_equilibrium(c, ChainState::straight(c, 0.0), lc, Angle::from_deg(0.1));
  CHECK(s.angles[0].deg() == Approx(15.0));
  CHECK(s.angles[1].deg() == Approx(15.0));
  CHECK(std::abs(s.angles[0].deg() - oracle.angles[0].deg()) < 0.5);
  CHECK(std::abs(s.angles[1].deg() - oracle.angles[1].deg()) < 0.5);
  CHECK(s.joint_status[0] == JointStatus::AtLimit);
}

TEST_CASE("solver matches the brute-force oracle on random two-joint chains", "[solver][oracle]") {
  std::mt19937 rng(20240611);
  for (int i = 0; i < 50; ++i) {
    const auto rc = random_case(rng);
    INFO("case " << i);
    const auto s = solve_equilibrium(rc.spec, rc.start, rc.loads);
    const auto o = brute_force_equilibrium(rc.spec, rc.start, rc.loads, Angle::from_deg(0.1));
    for (std::size_t j = 0; j < 2; ++j) {
      INFO("joint " << j << " solver " << s.angles[j].deg() << " oracle " << o.angles[j].deg());
      CHECK(std::abs(s.angles[j].deg() - o.angles[j].deg()) < 0.5);
    }
  }
}

TEST_CASE("oracle: zero load and symmetry", "[oracle]") {
  const auto c = small_chain(BeadVariant::SimpleSphere, false);
  const auto s0 = ChainState::straight(c, 10.0);
  const auto z = brute_force_equilibrium(c, s0, LoadCase{}, Angle::from_deg(0.5));
  CHECK(z.angles == s0.angles);
  LoadCase up, down;
  up.point_loads.push_back({2, Vec2(0, 8)});
  down.point_loads.push_back({2, Vec2(0, -8)});
  const auto a = brute_force_equilibrium(c, s0, up, Angle::from_deg(0.5));
  const auto b = brute_force_equilibrium(c, s0, down, Angle::from_deg(0.5));
  CHECK(a.angles[0].deg() == Approx(-b.angles[0].deg()));
  CHECK(a.angles[1].deg() == Approx(-b.angles[1].deg()));
  ChainSpec four = c;
  four.n_units = 5;
  CHECK_THROWS_AS(brute_force_equilibrium(four, ChainState::straight(four), up, Angle::from_deg(1)), InvalidInput);
}

TEST_CASE("residual contract holds for a loaded prototype chain", "[solver]") {
  const auto c = prototype_chain();
  LoadCase lc;
  lc.point_loads.push_back({29, Vec2(0.0, 2.0)});
  lc.point_loads.push_back({22, Vec2(0.5, 1.0)});
  SolveSettings cfg;
  const auto rep = solve_equilibrium_report(c, ChainState::straight(c, 5.0), lc, cfg);
  CHECK(rep.max_residual <= cfg.moment_tolerance);
  for (std::size_t j = 0; j < 15; ++j) CHECK(rep.state.angles[j].rad() == 0.0);
}

TEST_CASE("contact: chain pressed onto a half-plane does not penetrate", "[solver][contact]") {
  auto c = small_chain(BeadVariant::CupShaped, false);
  c.n_units = 4;
  LoadCase lc;
  lc.point_loads.push_back({3, Vec2(0.0, -10.0)});
  // Floor under the tip beads: y >= -6 (bead centres must stay 3 above the line y = -9).
  for (std::size_t b = 1; b < 4; ++b) lc.contact_constraints.push_back({b, HalfPlane{Vec2(0, -9), Vec2(0, 1)}});
  const auto rep = solve_equilibrium_report(c, ChainState::straight(c, 0.0), lc);
  CHECK(rep.max_penetration <= 1e-6);
  CHECK(rep.positions[3].y() >= -6.0 - 1e-6);
  CHECK(rep.positions[3].y() == Approx(-6.0).margin(1e-5));
}

TEST_CASE("contact: disk obstacle", "[solver][contact]") {
  auto c = small_chain(BeadVariant::CupShaped, false);
  c.n_units = 4;
  c.bead.effective_angle = Angle::from_deg(40);
  LoadCase lc;
  lc.point_loads.push_back({3, Vec2(0.0, -10.0)});
  lc.contact_constraints.push_back({3, Disk{Vec2(18.0, -12.0), 4.0}});
  const auto rep = solve_equilibrium_report(c, ChainState::straight(c, 0.0), lc);
  CHECK(rep.max_penetration <= 1e-6);
  CHECK((rep.positions[3] - Vec2(18.0, -12.0)).norm() >= 7.0 - 1e-6);
}

TEST_CASE("determinism: identical inputs give identical bits", "[solver]") {
  std::mt19937 rng(99);
  const auto rc = random_case(rng);
  std::ostringstream log_a, log_b;
  const auto a = solve_equilibrium(rc.spec, rc.start, rc.loads, {}, &log_a);
  const auto b = solve_equilibrium(rc.spec, rc.start, rc.loads, {}, &log_b);
  for (std::size_t j = 0; j < a.angles.size(); ++j) CHECK(a.angles[j].rad() == b.angles[j].rad());
  CHECK(log_a.str() == log_b.str());
  CHECK(log_a.str().rfind("step,joint,angle,residual\n", 0) == 0);
}

TEST_CASE("cantilever: jammed, floppy and monotone in tension", "[solver][cantilever]") {
  const auto c = prototype_chain();
  const std::vector<double> forces{0.5, 1.0, 2.0};
  // Root moment at the first free joint: F * 14 * pitch.
  const double root = 2.0 * 14 * c.unit_pitch;
  const double t_jam = 1.01 * root / friction_capacity(c, 1.0);
  for (const auto& p : cantilever_stiffness(c, t_jam, forces)) CHECK(p.tip_deflection == 0.0);

  const auto floppy = cantilever_stiffness(c, 0.0, {1.0});
  // Without tension the free segments turn toward the force until they point
  // along it: six joints at the 15 deg limit reach 90 deg, the rest stay straight.
  std::vector<Angle> at_limit(29);
  for (std::size_t j = 15; j < 21; ++j) at_limit[j] = Angle::from_deg(15);
  const Vec2 tip = forward_kinematics(c, at_limit).back().position;
  CHECK(floppy[0].tip_deflection == Approx((tip - Vec2(174, 0)).norm()).epsilon(1e-6));

  double prev = std::numeric_limits<double>::infinity();
  for (double t : {0.0, 5.0, 10.0, 20.0, 40.0}) {
    const double d = cantilever_stiffness(c, t, {1.0})[0].tip_deflection;
    CHECK(d <= prev + 1e-9);
    prev = d;
  }
}

TEST_CASE("invalid inputs", "[solver]") {
  const auto c = small_chain();
  LoadCase lc;
  lc.point_loads.push_back({3, Vec2(0, 1)});
  CHECK_THROWS_AS(solve_equilibrium(c, ChainState::straight(c), lc), InvalidInput);
  LoadCase bad_normal;
  bad_normal.contact_constraints.push_back({1, HalfPlane{Vec2(0, -5), Vec2(0, 2)}});
  CHECK_THROWS_AS(solve_equilibrium(c, ChainState::straight(c), bad_normal), InvalidInput);
  SolveSettings cfg;
  cfg.load_steps = 0;
  CHECK_THROWS_AS(solve_equilibrium(c, ChainState::straight(c), LoadCase{}, cfg), InvalidInput);
}

TEST_CASE("settings json", "[solver][json]") {
  const auto s = solve_settings_from_json(nlohmann::json{{"load_steps", 10}, {"angle_step_limit", 0.5}});
  CHECK(s.load_steps == 10);
  CHECK(s.angle_step_limit.deg() == Approx(0.5));
  CHECK(s.moment_tolerance == 1e-3);
  CHECK_THROWS_AS(solve_settings_from_json(nlohmann::json{{"steps", 1}}), InvalidInput);
}

TEST_CASE("unsatisfiable contact and iteration budget errors", "[solver]") {
  auto c = small_chain();
  c.rigid_root_units = 2;  // fully rigid
  LoadCase lc;
  lc.contact_constraints.push_back({2, HalfPlane{Vec2(0, 5), Vec2(0, 1)}});
  CHECK_THROWS_AS(solve_equilibrium(c, ChainState::straight(c), lc), Infeasible);

  const auto t = prototype_chain();
  LoadCase big;
  big.point_loads.push_back({29, Vec2(0.0, 50.0)});
  SolveSettings cfg;
  cfg.load_steps = 1;
  cfg.max_iterations = 1;
  try {
    solve_equilibrium(t, ChainState::straight(t, 1.0), big, cfg);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.worst_residual() > cfg.moment_tolerance);
  }
}

TEST_CASE("polygon distance outside, in line with an edge", "[obstacle]") {
  const ConvexPolygon sq{{Vec2(0, 0), Vec2(2, 0), Vec2(2, 2), Vec2(0, 2)}};
  // beyond the top-right corner along the extension of the right edge
  const auto a = proximity(sq, Vec2(2.0, 3.0));
  CHECK(a.distance == Approx(1.0));
  CHECK(a.normal.y() == Approx(1.0));
  // beside the top edge, off the right edge line
  const auto b = proximity(sq, Vec2(2.5, 1.0));
  CHECK(b.distance == Approx(0.5));
  CHECK(b.normal.x() == Approx(1.0));
  const auto c = proximity(sq, Vec2(1.0, 1.5));
  CHECK(c.distance == Approx(-0.5));
  const auto d = proximity(sq, Vec2(3.0, 3.0));
  CHECK(d.distance == Approx(std::sqrt(2.0)));
}

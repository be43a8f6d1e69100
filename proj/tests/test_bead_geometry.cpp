#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "jamcord/bead_geometry.hpp"

using namespace jamcord;
using Catch::Approx;

namespace {

BeadSpec prototype_bead(BeadVariant v = BeadVariant::CupShaped) {
  BeadSpec s;  // defaults are the 6 mm prototype bead
  s.variant = v;
  return s;
}

// Wire path across one sphere-sphere interface, built geometrically: the wire
// follows bead A's bore from its centre until it meets the shared tangent
// plane, then bead B's bore to its centre. The crossing point is found by
// bisection and the length by summing a finely sampled polyline.
double sampled_interface_path(double radius, double theta) {
  const double nx = std::cos(theta / 2), ny = std::sin(theta / 2);  // contact normal
  auto plane = [&](double x, double y) { return x * nx + y * ny - radius; };
  double lo = 0.0, hi = 4.0 * radius;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (plane(mid, 0.0) < 0.0 ? lo : hi) = mid;
  }
  const double kx = 0.5 * (lo + hi), ky = 0.0;
  const double bx = 2 * radius * nx, by = 2 * radius * ny;
  const int samples = 20000;
  double length = 0.0, px = 0.0, py = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    const double x = t * kx, y = t * ky;
    length += std::hypot(x - px, y - py);
    px = x;
    py = y;
  }
  for (int i = 1; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    const double x = kx + t * (bx - kx), y = ky + t * (by - ky);
    length += std::hypot(x - px, y - py);
    px = x;
    py = y;
  }
  return length;
}

}  // namespace

TEST_CASE("prototype bead validates", "[bead]") {
  const auto r = validate_bead_spec(prototype_bead());
  CHECK(r.valid());
  CHECK(r.violations.empty());
}

TEST_CASE("single-constraint perturbations report exactly that id", "[bead]") {
  struct Case {
    const char* name;
    void (*mutate)(BeadSpec&);
    ConstraintId id;
  };
  const Case cases[] = {
      {"R2", [](BeadSpec& s) { s.R2 = 2.5; }, ConstraintId::EQ1},
      {"R3", [](BeadSpec& s) { s.R3 = 3.5; }, ConstraintId::EQ1},
      {"r1", [](BeadSpec& s) { s.r1 = 1.0; }, ConstraintId::EQ2},
      {"SD1", [](BeadSpec& s) { s.SD1 = 1.0; }, ConstraintId::EQ3},
      {"e", [](BeadSpec& s) { s.e = -0.1; }, ConstraintId::POSITIVITY},
      {"angle", [](BeadSpec& s) { s.effective_angle = Angle::from_deg(0.0); }, ConstraintId::ANGLE_RANGE},
      {"angle90", [](BeadSpec& s) { s.effective_angle = Angle::from_deg(90.0); }, ConstraintId::ANGLE_RANGE},
      {"r2", [](BeadSpec& s) { s.r2 = -1.0; }, ConstraintId::POSITIVITY},
  };
  for (const auto& c : cases) {
    INFO(c.name);
    BeadSpec s = prototype_bead();
    c.mutate(s);
    const auto r = validate_bead_spec(s);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].id == c.id);
  }
}

TEST_CASE("EQ3 is strict at the boundary", "[bead]") {
  BeadSpec s = prototype_bead();
  s.SD1 = 1.0;
  s.SD2 = 0.8;
  s.e = 0.2;
  const auto r = validate_bead_spec(s);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].id == ConstraintId::EQ3);
  CHECK(r.violations[0].measured == Approx(1.0));
  CHECK(r.violations[0].required == Approx(1.0));
}

TEST_CASE("zero clearance fails validation", "[bead]") {
  BeadSpec s = prototype_bead();
  s.e = 0.0;
  CHECK_FALSE(validate_bead_spec(s).valid());
}

TEST_CASE("non-finite input is rejected, not reported", "[bead]") {
  BeadSpec s = prototype_bead();
  s.r1 = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate_bead_spec(s), InvalidInput);
  s = prototype_bead();
  s.effective_angle = Angle::from_deg(std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(validate_bead_spec(s), InvalidInput);
}

TEST_CASE("validation is idempotent and emits only violated ids", "[bead][property]") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 8.0);
  for (int i = 0; i < 500; ++i) {
    BeadSpec s;
    s.D1 = u(rng);
    s.R1 = rng() % 2 ? s.D1 / 2 : u(rng);
    s.R2 = rng() % 2 ? s.D1 / 2 : u(rng);
    s.R3 = rng() % 2 ? s.D1 / 2 : u(rng);
    s.r1 = u(rng);
    s.r2 = u(rng);
    s.SD1 = u(rng);
    s.SD2 = u(rng);
    s.e = u(rng);
    s.effective_angle = Angle::from_deg(u(rng) * 15.0);
    const auto a = validate_bead_spec(s);
    const auto b = validate_bead_spec(s);
    CHECK(a == b);
    CHECK(a.has(ConstraintId::EQ2) == !(s.r1 > s.r2));
    CHECK(a.has(ConstraintId::EQ3) == !(s.SD1 > s.SD2 + s.e));
    const double ang = s.effective_angle.deg();
    CHECK(a.has(ConstraintId::ANGLE_RANGE) == !(ang > 0 && ang < 90));
  }
}

TEST_CASE("hole-limited tilt produces a warning only", "[bead]") {
  const auto r = validate_bead_spec(prototype_bead());
  CHECK(r.valid());
  CHECK(r.warnings.size() == 1);  // 2*atan(0.4/6) ~ 7.6 deg < 15 deg
}

TEST_CASE("cup path length is posture independent", "[bead]") {
  const auto s = prototype_bead(BeadVariant::CupShaped);
  CHECK(wire_path_length(s, Angle::from_deg(15)) - wire_path_length(s, Angle{}) == 0.0);
  CHECK(wire_path_slope(s, 0.2) == 0.0);
}

TEST_CASE("sphere path length: closed form against sampled geometry", "[bead]") {
  BeadSpec s = prototype_bead(BeadVariant::SimpleSphere);
  s.effective_angle = Angle::from_deg(35.0);
  // Frozen from sampled_interface_path(3, 30 deg) - sampled_interface_path(3, 0).
  const double oracle = sampled_interface_path(3.0, deg_to_rad(30.0)) - sampled_interface_path(3.0, 0.0);
  CHECK(oracle == Approx(0.211657).margin(1e-6));
  const double dl = wire_path_length(s, Angle::from_deg(30)) - wire_path_length(s, Angle{});
  CHECK(dl == Approx(2 * 3 * (1 / std::cos(deg_to_rad(15.0)) - 1)).epsilon(1e-12));
  CHECK(dl == Approx(oracle).margin(1e-6));
  CHECK(wire_path_length(s, Angle{}) == Approx(s.D1));
  for (double deg : {5.0, 12.0, 21.0, 33.0}) {
    const double o = sampled_interface_path(3.0, deg_to_rad(deg)) - sampled_interface_path(3.0, 0.0);
    CHECK(wire_path_length(s, Angle::from_deg(deg)) - s.D1 == Approx(o).margin(1e-6));
  }
}

TEST_CASE("sphere path length is even and strictly increasing", "[bead][property]") {
  BeadSpec s = prototype_bead(BeadVariant::SimpleSphere);
  s.effective_angle = Angle::from_deg(40);
  double prev = wire_path_length(s, Angle{});
  for (int i = 1; i <= 400; ++i) {
    const Angle a = Angle::from_deg(40.0 * i / 400);
    const double l = wire_path_length(s, a);
    CHECK(l > prev);
    CHECK(l == wire_path_length(s, -a));
    prev = l;
  }
}

TEST_CASE("path slope matches a central difference", "[bead]") {
  BeadSpec s = prototype_bead(BeadVariant::SimpleSphere);
  const double h = 1e-6;
  for (double th : {-0.2, 0.05, 0.25}) {
    const double fd = (wire_path_length_unchecked(s, th + h) - wire_path_length_unchecked(s, th - h)) / (2 * h);
    CHECK(wire_path_slope(s, th) == Approx(fd).epsilon(1e-7));
    const double fd2 = (wire_path_slope(s, th + h) - wire_path_slope(s, th - h)) / (2 * h);
    CHECK(wire_path_curvature(s, th) == Approx(fd2).epsilon(1e-6));
  }
}

TEST_CASE("angles beyond the effective angle are rejected", "[bead]") {
  const auto s = prototype_bead();
  CHECK_THROWS_AS(wire_path_length(s, Angle::from_deg(15.5)), JointLimitError);
  CHECK_NOTHROW(wire_path_length(s, Angle::from_deg(-15)));
}

TEST_CASE("joint limit and range", "[bead]") {
  const auto s = prototype_bead();
  CHECK(joint_limit(s).deg() == Approx(15));
  const auto free = joint_range(s, BendingMode::Unconstrained);
  CHECK(free.lower.deg() == Approx(-15));
  CHECK(free.upper.deg() == Approx(15));
  const auto one = joint_range(s, BendingMode::OnePlane);
  CHECK(one.lower.deg() == 0.0);
  CHECK(one.upper.deg() == Approx(15));
}

TEST_CASE("bead json round trip and unknown-field rejection", "[bead][json]") {
  BeadSpec s = prototype_bead(BeadVariant::SimpleSphere);
  s.effective_angle = Angle::from_deg(22.5);
  const auto j = to_json(s);
  const auto back = bead_spec_from_json(j);
  CHECK(back.variant == s.variant);
  CHECK(back.effective_angle.deg() == Approx(22.5));
  CHECK(back.SD1 == s.SD1);
  auto bad = j;
  bad["colour"] = "red";
  CHECK_THROWS_AS(bead_spec_from_json(bad), InvalidInput);
  bad = j;
  bad.erase("e");
  CHECK_THROWS_AS(bead_spec_from_json(bad), InvalidInput);
  bad = j;
  bad["variant"] = "Cube";
  CHECK_THROWS_AS(bead_spec_from_json(bad), InvalidInput);
}

#include <catch_amalgamated.hpp>

#include <complex>
#include <random>

#include "jamcord/chain_model.hpp"

using namespace jamcord;
using Catch::Approx;

namespace {

ChainSpec chain(std::size_t n, double pitch, BeadVariant v = BeadVariant::CupShaped) {
  ChainSpec c;
  c.bead.variant = v;
  c.n_units = n;
  c.unit_pitch = pitch;
  return c;
}

std::vector<Angle> degs(std::initializer_list<double> d) {
  std::vector<Angle> out;
  for (double x : d) out.push_back(Angle::from_deg(x));
  return out;
}

}  // namespace

TEST_CASE("straight chain spans (n-1) pitches", "[chain]") {
  const auto c = chain(30, 6.0);
  const auto frames = forward_kinematics(c, std::vector<Angle>(29));
  REQUIRE(frames.size() == 30);
  CHECK(frames.back().position.x() == Approx(174.0));
  CHECK(frames.back().position.y() == Approx(0.0).margin(1e-12));
  CHECK((frames.back().position - frames[1].position).norm() == Approx(168.0));
}

TEST_CASE("right-angle turn at the middle bead", "[chain]") {
  // Beyond any valid bead limit, so through the unchecked kinematics.
  const auto f = chain_frames(3, 10.0, degs({0.0, 90.0}));
  CHECK(f[2].position.x() == Approx(10.0));
  CHECK(f[2].position.y() == Approx(10.0));
  CHECK(f[2].heading.y() == Approx(1.0));
  auto c = chain(3, 10.0);
  CHECK_THROWS_AS(forward_kinematics(c, degs({0.0, 90.0})), JointLimitError);
}

TEST_CASE("uniform bending matches the geometric-series polyline", "[chain]") {
  auto c = chain(4, 1.0);
  c.planar = false;
  c.bead.effective_angle = Angle::from_deg(40.0);
  for (double deg : {-35.0, -10.0, 0.0, 7.5, 25.0, 40.0}) {
    const double t = deg_to_rad(deg);
    const auto f = forward_kinematics(c, degs({deg, deg, deg}));
    // sum_{s=1..3} e^{i s t} = e^{it} (1 - e^{3it}) / (1 - e^{it}), or 3 at t = 0
    const std::complex<double> z = std::polar(1.0, t);
    const std::complex<double> tip = deg == 0.0 ? std::complex<double>(3.0, 0.0) : z * (1.0 - z * z * z) / (1.0 - z);
    CHECK(f.back().position.x() == Approx(tip.real()).margin(1e-12));
    CHECK(f.back().position.y() == Approx(tip.imag()).margin(1e-12));
  }
}

TEST_CASE("kinematics invariants under random admissible angles", "[chain][property]") {
  auto c = chain(12, 6.0);
  c.planar = false;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-15.0, 15.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Angle> a;
    for (std::size_t j = 0; j < c.n_joints(); ++j) a.push_back(Angle::from_deg(u(rng)));
    const auto f = forward_kinematics(c, a);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k) {
      const double seg = (f[k + 1].position - f[k].position).norm();
      CHECK(seg == Approx(6.0).epsilon(1e-12));
      total += seg;
    }
    CHECK(total == Approx(66.0).epsilon(1e-12));
    for (const auto& fr : f) CHECK(std::abs(fr.heading.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("out-of-limit and rigid-root violations throw", "[chain]") {
  auto c = chain(4, 6.0);
  CHECK_THROWS_AS(forward_kinematics(c, degs({0, 0, 16})), JointLimitError);
  CHECK_THROWS_AS(forward_kinematics(c, degs({0, 0, -1})), JointLimitError);  // one-plane
  c.rigid_root_units = 1;
  CHECK_THROWS_AS(forward_kinematics(c, degs({5, 0, 0})), JointLimitError);
  CHECK_NOTHROW(forward_kinematics(c, degs({0, 5, 0})));
}

TEST_CASE("restoring moment", "[chain]") {
  auto cup = chain(30, 6.0);
  CHECK(restoring_moment(cup, Angle::from_deg(15), 41.0) == 0.0);
  auto sphere = chain(30, 6.0, BeadVariant::SimpleSphere);
  sphere.bead.effective_angle = Angle::from_deg(35);
  CHECK(restoring_moment(sphere, Angle{}, 41.0) == 0.0);
  const double m = restoring_moment(sphere, Angle::from_deg(30), 41.0);
  CHECK(m == Approx(41.0 * 3.0 * std::tan(deg_to_rad(15)) / std::cos(deg_to_rad(15))));
  CHECK(m == Approx(34.1).margin(0.05));
  // central difference of the path length
  const double h = 1e-6;
  const double fd = 41.0 * (wire_path_length_unchecked(sphere.bead, deg_to_rad(30) + h) -
                            wire_path_length_unchecked(sphere.bead, deg_to_rad(30) - h)) /
                    (2 * h);
  CHECK(m == Approx(fd).epsilon(1e-6));
}

TEST_CASE("friction capacity", "[chain]") {
  auto c = chain(30, 6.0);
  CHECK(friction_capacity(c, 0.0) == 0.0);
  CHECK(friction_capacity(c, 37.0) == Approx(0.3 * 37 * 3 * std::sin(deg_to_rad(45))));
  CHECK(friction_capacity(c, 37.0) == Approx(23.55).margin(0.005));
  for (double t = 0.5; t < 100; t *= 1.7) CHECK(friction_capacity(c, 2 * t) == 2 * friction_capacity(c, t));
}

TEST_CASE("stick-slip law", "[chain]") {
  CHECK(joint_response(10, 23.55, 0).status == JointStatus::Stuck);
  const auto slip = joint_response(30, 23.55, 0);
  CHECK(slip.status == JointStatus::Slipping);
  CHECK(slip.slip_direction == 1);
  CHECK(joint_response(-30, 23.55, 0).slip_direction == -1);
  CHECK(joint_response(23.55, 23.55, 0).status == JointStatus::Stuck);
  CHECK(joint_response(0, 0, 0).status == JointStatus::Stuck);
  CHECK(joint_response(40, 10, 35).status == JointStatus::Stuck);
}

TEST_CASE("tip straightening force of the prototype cup chain is zero", "[chain]") {
  auto c = chain(30, 6.0);
  c.bead.effective_angle = Angle::from_deg(30);
  CHECK(tip_straightening_force(c, 28, Angle::from_deg(30), 41.0) == 0.0);
  c.bead.variant = BeadVariant::SimpleSphere;
  CHECK(tip_straightening_force(c, 28, Angle::from_deg(30), 41.0) > 0.9);
}

TEST_CASE("chain spec checks", "[chain]") {
  auto c = chain(30, 6.0);
  CHECK(check_chain_spec(c).size() == 1);  // hole-tilt warning
  c.unit_pitch = 7.0;
  CHECK(check_chain_spec(c).size() == 2);
  c = chain(1, 6.0);
  CHECK_THROWS_AS(check_chain_spec(c), ConfigError);
  c = chain(5, 6.0);
  c.rigid_root_units = 5;
  CHECK_THROWS_AS(check_chain_spec(c), ConfigError);
  c = chain(5, 6.0);
  c.mu = 0.0;
  CHECK_THROWS_AS(check_chain_spec(c), ConfigError);
}

TEST_CASE("chain json round trip", "[chain][json]") {
  auto c = chain(30, 6.0);
  c.rigid_root_units = 15;
  const auto back = chain_spec_from_json(to_json(c));
  CHECK(back.n_units == 30);
  CHECK(back.rigid_root_units == 15);
  CHECK(back.contact_half_angle.deg() == Approx(45));
  auto j = to_json(c);
  j["extra"] = 1;
  CHECK_THROWS_AS(chain_spec_from_json(j), InvalidInput);

  ChainState s = ChainState::straight(c, 37.0);
  s.angles[20] = Angle::from_deg(12.5);
  s.joint_status[20] = JointStatus::Slipping;
  const auto js = to_json(s);
  CHECK(js["angles"][20].get<double>() == Approx(12.5));
  const auto sb = chain_state_from_json(js);
  CHECK(sb.angles[20].deg() == Approx(12.5));
  CHECK(sb.joint_status[20] == JointStatus::Slipping);
  CHECK(sb.tension == 37.0);
}

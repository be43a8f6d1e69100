#pragma once

// Quasi-static equilibrium of a loaded, tensioned bead chain by incremental
// load stepping, and the cantilever stiffness sweep built on it.

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jamcord/chain_model.hpp"
#include "jamcord/errors.hpp"
#include "jamcord/json_util.hpp"
#include "jamcord/obstacle.hpp"
#include "jamcord/planar_system.hpp"

namespace jamcord {

struct PointLoad {
  std::size_t bead = 0;
  Vec2 force = Vec2::Zero();  // N
};

struct ContactConstraint {
  std::size_t bead = 0;
  Obstacle obstacle;
};

struct LoadCase {
  std::vector<PointLoad> point_loads;
  std::vector<ContactConstraint> contact_constraints;
  std::optional<Vec2> gravity;  // N per bead
};

inline void check_load_case(const ChainSpec& c, const LoadCase& loads) {
  for (const auto& l : loads.point_loads) {
    if (l.bead >= c.n_units) throw InvalidInput("point load bead index out of range");
    if (!l.force.allFinite()) throw InvalidInput("point load is not finite");
  }
  for (const auto& cc : loads.contact_constraints) {
    if (cc.bead >= c.n_units) throw InvalidInput("contact constraint bead index out of range");
    check_obstacle(cc.obstacle);
  }
  if (loads.gravity && !loads.gravity->allFinite()) throw InvalidInput("gravity is not finite");
}

inline void check_settings(const SolveSettings& s) {
  if (s.load_steps <= 0) throw InvalidInput("SolveSettings.load_steps must be > 0");
  if (s.max_iterations <= 0) throw InvalidInput("SolveSettings.max_iterations must be > 0");
  if (!(s.moment_tolerance > 0.0)) throw InvalidInput("SolveSettings.moment_tolerance must be > 0");
  if (!(s.angle_step_limit.rad() > 0.0)) throw InvalidInput("SolveSettings.angle_step_limit must be > 0");
  if (!(s.contact_stiffness > 0.0)) throw InvalidInput("SolveSettings.contact_stiffness must be > 0");
  if (!(s.penetration_tolerance > 0.0)) throw InvalidInput("SolveSettings.penetration_tolerance must be > 0");
  if (s.max_contact_updates < 0) throw InvalidInput("SolveSettings.max_contact_updates must be >= 0");
  if (!(s.slip_regularization > 0.0)) throw InvalidInput("SolveSettings.slip_regularization must be > 0");
}

/// Chain joints as solver dofs: rigid root joints fixed, the rest limited to
/// the bead range and held by the Coulomb capacity at the given tension.
inline ChainSystem chain_system(const ChainSpec& c, double tension, const Frame& base = {}) {
  ChainSystem sys;
  sys.base = base.position;
  sys.base_heading = std::atan2(base.heading.y(), base.heading.x());
  sys.n_beads = c.n_units;
  sys.pitch = c.unit_pitch;
  sys.bead_radius = c.bead.R1;
  sys.bead = c.bead;
  sys.tension = tension;
  const auto range = c.range();
  const double cap = friction_capacity(c, tension);
  for (std::size_t j = 0; j < c.n_joints(); ++j) {
    Dof d;
    d.pivot = j;
    d.lower = range.lower.rad();
    d.upper = range.upper.rad();
    d.fixed = c.is_rigid(j);
    d.capacity = cap;
    d.wire = true;
    sys.dofs.push_back(d);
  }
  return sys;
}

inline void apply_loads(ChainSystem& sys, const LoadCase& loads, double scale) {
  sys.bead_forces.assign(sys.n_beads, Vec2::Zero());
  for (const auto& l : loads.point_loads) sys.bead_forces[l.bead] += scale * l.force;
  if (loads.gravity)
    for (auto& f : sys.bead_forces) f += scale * *loads.gravity;
}

/// Statuses relative to the starting angles: AtLimit when the joint rests on a
/// limit that carries more than the friction can, Slipping when it moved.
inline std::vector<JointStatus> joint_statuses(const ChainSystem& sys, const Eigen::VectorXd& q0,
                                               const IncrementResult& r) {
  std::vector<JointStatus> st(sys.dofs.size(), JointStatus::Stuck);
  for (std::size_t d = 0; d < sys.dofs.size(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    const Dof& dof = sys.dofs[d];
    if (dof.fixed) continue;
    const double x = r.state.q[i];
    const double m = r.dof_moment[d];
    const bool at_lo = x <= dof.lower && m < -dof.capacity;
    const bool at_hi = x >= dof.upper && m > dof.capacity;
    if (at_lo || at_hi) st[d] = JointStatus::AtLimit;
    else if (x != q0[i]) st[d] = JointStatus::Slipping;
  }
  return st;
}

struct EquilibriumReport {
  ChainState state;
  std::vector<Vec2> positions;
  double max_residual = 0.0;
  double max_penetration = 0.0;
};

/// Full report variant of solve_equilibrium.
inline EquilibriumReport solve_equilibrium_report(const ChainSpec& spec, const ChainState& state0,
                                                  const LoadCase& loads, const SolveSettings& cfg = {},
                                                  std::ostream* diagnostics = nullptr,
                                                  const Frame& base = {}) {
  check_chain_spec(spec);
  check_chain_state(spec, state0);
  check_load_case(spec, loads);
  check_settings(cfg);

  ChainSystem sys = chain_system(spec, state0.tension, base);
  for (const auto& cc : loads.contact_constraints) sys.bodies.push_back({cc.obstacle, Vec2::Zero(), 0.0, cc.bead, cc.bead + 1});

  SystemState st;
  st.q.resize(static_cast<Eigen::Index>(spec.n_joints()));
  for (std::size_t j = 0; j < spec.n_joints(); ++j) st.q[static_cast<Eigen::Index>(j)] = state0.angles[j].rad();
  const Eigen::VectorXd q0 = st.q;
  const std::vector<Vec2> offsets(sys.bodies.size(), Vec2::Zero());

  if (diagnostics) *diagnostics << "step,joint,angle,residual\n";
  IncrementResult r;
  for (int step = 1; step <= cfg.load_steps; ++step) {
    apply_loads(sys, loads, static_cast<double>(step) / cfg.load_steps);
    r = solve_increment(sys, st, offsets, cfg, DiagnosticSink{diagnostics, step});
    st = r.state;
  }

  EquilibriumReport rep;
  rep.state.tension = state0.tension;
  rep.state.angles.resize(spec.n_joints());
  for (std::size_t j = 0; j < spec.n_joints(); ++j)
    rep.state.angles[j] = Angle::from_rad(st.q[static_cast<Eigen::Index>(j)]);
  rep.state.joint_status = joint_statuses(sys, q0, r);
  rep.positions = r.positions;
  rep.max_residual = r.max_residual;
  rep.max_penetration = r.max_penetration;
  return rep;
}

inline ChainState solve_equilibrium(const ChainSpec& spec, const ChainState& state0, const LoadCase& loads,
                                    const SolveSettings& cfg = {}, std::ostream* diagnostics = nullptr) {
  return solve_equilibrium_report(spec, state0, loads, cfg, diagnostics).state;
}

struct CantileverPoint {
  double tip_force;       // N, perpendicular to the unloaded chain
  double tip_deflection;  // mm, distance of the tip from its unloaded position
};

/// Tip-load sweep of a base-clamped chain lying along +x with the force along
/// +y, the bending side of one-plane constrained joints. Each point is an
/// independent solve from the straight posture.
inline std::vector<CantileverPoint> cantilever_stiffness(const ChainSpec& spec, double tension,
                                                         const std::vector<double>& tip_forces,
                                                         const SolveSettings& cfg = {}) {
  if (!(tension >= 0.0)) throw InvalidInput("tension must be >= 0");
  const ChainState straight = ChainState::straight(spec, tension);
  const Vec2 tip0(static_cast<double>(spec.n_units - 1) * spec.unit_pitch, 0.0);
  std::vector<CantileverPoint> out;
  for (double f : tip_forces) {
    LoadCase lc;
    lc.point_loads.push_back({spec.n_units - 1, Vec2(0.0, f)});
    const auto rep = solve_equilibrium_report(spec, straight, lc, cfg);
    out.push_back({f, (rep.positions.back() - tip0).norm()});
  }
  return out;
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::json to_json(const SolveSettings& s) {
  return {{"load_steps", s.load_steps},
          {"max_iterations", s.max_iterations},
          {"moment_tolerance", s.moment_tolerance},
          {"angle_step_limit", s.angle_step_limit.deg()},
          {"contact_stiffness", s.contact_stiffness},
          {"penetration_tolerance", s.penetration_tolerance},
          {"max_contact_updates", s.max_contact_updates},
          {"slip_regularization", s.slip_regularization}};
}

/// Keys absent from `j` keep their value in `base`.
inline SolveSettings solve_settings_from_json(const nlohmann::json& j, SolveSettings base = {}) {
  using namespace json_util;
  constexpr const char* what = "SolveSettings";
  require_object(j, what);
  reject_unknown(j, {"load_steps", "max_iterations", "moment_tolerance", "angle_step_limit",
                     "contact_stiffness", "penetration_tolerance", "max_contact_updates", "slip_regularization"},
                 what);
  SolveSettings s = base;
  if (j.contains("load_steps")) s.load_steps = static_cast<int>(integer(j, "load_steps", what));
  if (j.contains("max_iterations")) s.max_iterations = static_cast<int>(integer(j, "max_iterations", what));
  s.moment_tolerance = number_or(j, "moment_tolerance", s.moment_tolerance, what);
  s.angle_step_limit = Angle::from_deg(number_or(j, "angle_step_limit", s.angle_step_limit.deg(), what));
  s.contact_stiffness = number_or(j, "contact_stiffness", s.contact_stiffness, what);
  s.penetration_tolerance = number_or(j, "penetration_tolerance", s.penetration_tolerance, what);
  if (j.contains("max_contact_updates"))
    s.max_contact_updates = static_cast<int>(integer(j, "max_contact_updates", what));
  s.slip_regularization = number_or(j, "slip_regularization", s.slip_regularization, what);
  check_settings(s);
  return s;
}

}  // namespace jamcord

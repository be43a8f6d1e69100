#pragma once

// Press / jam / lift protocols on a fixed object and the force-displacement
// traces they produce.
//
// Every chain is solved in its radial plane (see gripper_assembly.hpp). The
// object enters that plane as its cross-section at the chain's azimuth; chains
// with identical cross-sections share one solve. The rod end carries the chain
// tips; port A pushes it out until the stroke end or the object stops it, or
// until the chains hold it back. Forces are summed over all chains along the
// gripper axis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "jamcord/errors.hpp"
#include "jamcord/gripper_assembly.hpp"
#include "jamcord/jamming_solver.hpp"
#include "jamcord/json_util.hpp"
#include "jamcord/obstacle.hpp"
#include "jamcord/planar_system.hpp"

namespace jamcord {

enum class ObjectKind { Cylinder, TriangularPrism, HalfPlane };

inline const char* to_string(ObjectKind k) {
  switch (k) {
    case ObjectKind::Cylinder: return "Cylinder";
    case ObjectKind::TriangularPrism: return "TriangularPrism";
    case ObjectKind::HalfPlane: return "HalfPlane";
  }
  return "?";
}

/// Default bead-object friction by material label.
inline double default_friction(const std::string& material) {
  if (material == "polyacetal") return 0.2;
  if (material == "acrylic") return 0.25;
  return 0.2;
}

struct ObjectShape {
  ObjectKind kind = ObjectKind::Cylinder;
  double diameter = 30.0;                       // cylinder, mm
  Angle apex_angle = Angle::from_deg(30.0);     // prism, apex up
  double prism_height = 60.0;                   // mm, apex to base
  double prism_length = 30.0;                   // mm, along the ridge
  std::string material = "polyacetal";
  double friction = 0.2;

  static ObjectShape cylinder(double d, std::string material = "polyacetal") {
    ObjectShape o;
    o.kind = ObjectKind::Cylinder;
    o.diameter = d;
    o.friction = default_friction(material);
    o.material = std::move(material);
    return o;
  }
  static ObjectShape prism(Angle apex, std::string material = "acrylic") {
    ObjectShape o;
    o.kind = ObjectKind::TriangularPrism;
    o.apex_angle = apex;
    o.friction = default_friction(material);
    o.material = std::move(material);
    return o;
  }
  static ObjectShape half_plane(std::string material = "steel") {
    ObjectShape o;
    o.kind = ObjectKind::HalfPlane;
    o.friction = default_friction(material);
    o.material = std::move(material);
    return o;
  }
};

inline void check_object(const ObjectShape& o) {
  if (!(o.friction >= 0.0) || !std::isfinite(o.friction)) throw InvalidInput("object.friction must be >= 0");
  switch (o.kind) {
    case ObjectKind::Cylinder:
      if (!(o.diameter > 0.0) || !std::isfinite(o.diameter)) throw InvalidInput("object.diameter must be > 0");
      break;
    case ObjectKind::TriangularPrism: {
      const double a = o.apex_angle.deg();
      if (!(a > 0.0 && a < 180.0)) throw InvalidInput("object.apex_angle must lie in (0, 180)");
      if (!(o.prism_height > 0.0) || !(o.prism_length > 0.0))
        throw InvalidInput("object prism dimensions must be > 0");
      break;
    }
    case ObjectKind::HalfPlane: break;
  }
}

// Depth of the fixture the object stands on; it extends the side walls so
// that beads cannot hook under the object.
inline constexpr double kFixtureDepth = 400.0;

/// Cross-section of the object in the radial plane at `azimuth`, top at y = 0,
/// y pointing down. The prism ridge runs perpendicular to azimuth 0.
inline Obstacle object_profile(const ObjectShape& o, Angle azimuth) {
  switch (o.kind) {
    case ObjectKind::HalfPlane:
      return HalfPlane{Vec2(0.0, 0.0), Vec2(0.0, -1.0)};
    case ObjectKind::Cylinder: {
      const double r = 0.5 * o.diameter;
      return ConvexPolygon{{Vec2(-r, 0.0), Vec2(r, 0.0), Vec2(r, kFixtureDepth), Vec2(-r, kFixtureDepth)}};
    }
    case ObjectKind::TriangularPrism: {
      // Quantised so that symmetric azimuths give bit-identical sections.
      auto q = [](double v) { return std::round(std::abs(v) * 1e12) / 1e12; };
      const double c = q(std::cos(azimuth.rad())), s = q(std::sin(azimuth.rad()));
      const double half_end = s > 0.0 ? 0.5 * o.prism_length / s : std::numeric_limits<double>::infinity();
      const double t = std::tan(0.5 * o.apex_angle.rad());
      const double h = o.prism_height;
      const double base_half = c > 0.0 ? h * t / c : std::numeric_limits<double>::infinity();
      std::vector<Vec2> v;
      if (base_half <= half_end) {
        v = {Vec2(0.0, 0.0), Vec2(base_half, h), Vec2(base_half, kFixtureDepth), Vec2(-base_half, kFixtureDepth),
             Vec2(-base_half, h)};
      } else {
        const double y_end = c > 0.0 ? half_end * c / t : 0.0;
        if (y_end <= 0.0) {
          v = {Vec2(-half_end, 0.0), Vec2(half_end, 0.0), Vec2(half_end, kFixtureDepth),
               Vec2(-half_end, kFixtureDepth)};
        } else {
          v = {Vec2(0.0, 0.0), Vec2(half_end, y_end), Vec2(half_end, kFixtureDepth),
               Vec2(-half_end, kFixtureDepth), Vec2(-half_end, y_end)};
        }
      }
      return ConvexPolygon{v};
    }
  }
  throw InvalidInput("unknown object kind");
}

/// Solver settings for gripper runs: a softer contact penalty, which the
/// solver stiffens only where the gap does not close.
inline SolveSettings grasp_solver_settings() {
  SolveSettings s;
  s.contact_stiffness = 1e3;
  s.penetration_tolerance = 1e-4;
  s.max_contact_updates = 200;
  return s;
}

struct Protocol {
  double press_depth = 60.0;     // mm
  double lift_distance = 40.0;   // mm
  double speed = 100.0;          // mm/min, recorded only
  double pressure_A = 20.0;      // kPa
  double pressure_B = 200.0;     // kPa
  int trials = 1;
  double sample_step = 1.0;      // mm
  double standoff = 10.0;        // mm between tip bead and object at displacement 0
  int jam_steps = 10;
  SolveSettings solver = grasp_solver_settings();
};

inline void check_protocol(const Protocol& p) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(p.press_depth)) throw InvalidInput("protocol.press_depth must be > 0");
  if (!positive(p.lift_distance)) throw InvalidInput("protocol.lift_distance must be > 0");
  if (!positive(p.speed)) throw InvalidInput("protocol.speed must be > 0");
  if (!positive(p.sample_step)) throw InvalidInput("protocol.sample_step must be > 0");
  if (p.trials < 1) throw InvalidInput("protocol.trials must be >= 1");
  if (p.jam_steps < 1) throw InvalidInput("protocol.jam_steps must be >= 1");
  if (!(p.standoff >= 0.0) || !std::isfinite(p.standoff)) throw InvalidInput("protocol.standoff must be >= 0");
  check_pneumatics({p.pressure_A, p.pressure_B});
  check_settings(p.solver);
}

enum class Phase { Press, Jam, Lift };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Press: return "press";
    case Phase::Jam: return "jam";
    case Phase::Lift: return "lift";
  }
  return "?";
}

struct TraceSample {
  double displacement = 0.0;  // mm, measured from the start of the phase's motion
  double force = 0.0;         // N; press: pushing on the object, lift: pulling it up
  Phase phase = Phase::Press;
  bool operator==(const TraceSample&) const = default;
};

struct GraspTrace {
  std::vector<TraceSample> samples;
  nlohmann::json metadata = nlohmann::json::object();
  bool escaped = false;       // object lost contact during the lift
  std::vector<std::size_t> chains_in_contact;  // per phase end: press, jam, lift

  std::vector<TraceSample> phase(Phase p) const {
    std::vector<TraceSample> out;
    for (const auto& s : samples)
      if (s.phase == p) out.push_back(s);
    return out;
  }
};

/// Throws InvalidInput unless displacements rise strictly within each phase
/// and every force is finite.
inline void check_trace(const GraspTrace& t) {
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const auto& s = t.samples[i];
    if (!std::isfinite(s.displacement) || !std::isfinite(s.force)) throw InvalidInput("trace: non-finite sample");
    if (i > 0 && t.samples[i - 1].phase == s.phase && !(s.displacement > t.samples[i - 1].displacement))
      throw InvalidInput("trace: displacements must increase strictly within a phase");
  }
}

class SimulationFailure : public Error {
 public:
  SimulationFailure(Phase phase, double displacement, const std::string& cause)
      : Error(std::string("solver failed during ") + to_string(phase) + " at displacement " +
              std::to_string(displacement) + " mm: " + cause),
        phase_(phase),
        displacement_(displacement) {}
  Phase phase() const noexcept { return phase_; }
  double displacement() const noexcept { return displacement_; }

 private:
  Phase phase_;
  double displacement_;
};

/// FNV-1a of the canonical JSON of the configuration.
inline std::string config_hash(const GripperConfig& g) {
  const std::string text = to_json(g).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::json to_json(const Protocol& p);
inline nlohmann::json to_json(const ObjectShape& o);

namespace detail {

// Solver dof layout: 0 is the hinge, j >= 1 is chain joint j (joint 0 sits in
// the rigid root and is replaced by the hinge). The tip bead is held on the
// rod end by two stiff tethers; the rod height is found outside the chain
// solve from its own balance.
struct RadialChain {
  ChainSystem sys;
  SystemState st;
  std::size_t object_body = 0;
  double top0 = 0.0;   // object top (y) at displacement 0
  double rod_y = 0.0;  // tip anchor height
};

inline std::size_t tip(const RadialChain& rc) { return rc.sys.n_beads - 1; }

inline RadialChain radial_chain(const GripperConfig& g, const ObjectShape& obj, Angle azimuth,
                                const Protocol& proto) {
  const ChainSpec& c = g.chain;
  RadialChain rc;
  ChainSystem& s = rc.sys;
  s.base = Vec2(g.hinge_radius(), 0.0);
  s.base_heading = 0.5 * kPi;
  s.n_beads = c.n_units;
  s.pitch = c.unit_pitch;
  s.bead_radius = c.bead.R1;
  s.bead = c.bead;
  s.tension = 0.0;

  Dof hinge;
  hinge.pivot = 0;
  hinge.lower = g.hinge_open_stop.rad();
  hinge.upper = g.hinge_closed_stop.rad();
  hinge.spring_k = g.hinge_spring.stiffness * 180.0 / kPi;
  hinge.spring_rest = g.hinge_spring.free_angle.rad();
  s.dofs.push_back(hinge);
  const auto range = c.range();
  for (std::size_t j = 1; j < c.n_joints(); ++j) {
    Dof d;
    d.pivot = j;
    d.lower = range.lower.rad();
    d.upper = range.upper.rad();
    d.fixed = c.is_rigid(j);
    d.wire = true;
    d.capacity = g.slack_joint_capacity;
    s.dofs.push_back(d);
  }
  s.bead_forces.assign(s.n_beads, Vec2(0.0, g.bead_weight));

  rc.top0 = g.extension_depth + c.bead.R1 + proto.standoff;  // until mounted
  s.bodies.push_back({object_profile(obj, azimuth), Vec2(0.0, rc.top0), obj.friction, 1, s.n_beads - 1});

  rc.st.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.dofs.size()));
  rc.st.q[0] = g.hinge_spring.free_angle.rad();
  return rc;
}

inline std::vector<Vec2> offsets(const ChainSystem& s) {
  std::vector<Vec2> o;
  for (const auto& b : s.bodies) o.push_back(b.offset);
  return o;
}

// Loading of `a` moved a fraction f toward that of `b`.
inline ChainSystem blend(const ChainSystem& a, const ChainSystem& b, double f) {
  ChainSystem m = b;
  for (std::size_t i = 0; i < m.bodies.size(); ++i)
    m.bodies[i].offset = a.bodies[i].offset + f * (b.bodies[i].offset - a.bodies[i].offset);
  for (std::size_t i = 0; i < m.tethers.size() && i < a.tethers.size(); ++i)
    m.tethers[i].anchor = a.tethers[i].anchor + f * (b.tethers[i].anchor - a.tethers[i].anchor);
  m.tension = a.tension + f * (b.tension - a.tension);
  for (std::size_t d = 0; d < m.dofs.size(); ++d) {
    m.dofs[d].capacity = a.dofs[d].capacity + f * (b.dofs[d].capacity - a.dofs[d].capacity);
    m.dofs[d].moment = a.dofs[d].moment + f * (b.dofs[d].moment - a.dofs[d].moment);
  }
  return m;
}

/// One quasi-static step from the loading `from` to the current one; a step
/// that fails is retried in halves. Advances the chain state.
inline IncrementResult advance(RadialChain& rc, const ChainSystem& from, const SolveSettings& cfg, int splits = 5) {
  try {
    IncrementResult r = solve_increment(rc.sys, rc.st, offsets(from), cfg);
    rc.st = r.state;
    return r;
  } catch (const NonConvergence&) {
    if (splits == 0) throw;
  } catch (const Infeasible&) {
    if (splits == 0) throw;
  }
  const ChainSystem target = rc.sys;
  const ChainSystem mid = blend(from, target, 0.5);
  const SystemState st0 = rc.st;
  try {
    rc.sys = mid;
    advance(rc, from, cfg, splits - 1);
    rc.sys = target;
  } catch (...) {
    rc.sys = target;
    rc.st = st0;
    throw;
  }
  try {
    return advance(rc, mid, cfg, splits - 1);
  } catch (...) {
    rc.st = st0;
    throw;
  }
}

inline void set_rod(RadialChain& rc, double y) {
  rc.rod_y = y;
  rc.sys.tethers[1].anchor.y() = y;
}

/// Upward pull of the chain on the rod end, N.
inline double rod_pull(const RadialChain& rc, const IncrementResult& r) {
  const Tether& t = rc.sys.tethers[1];
  return t.stiffness * (t.anchor.y() - r.positions[t.bead].y());
}

// Lowest rod height at which the tip bead clears the object, capped by the
// stroke end. Second: whether the object is what stops the rod.
inline std::pair<double, bool> rod_bound(const RadialChain& rc, const GripperConfig& g) {
  const Body& body = rc.sys.bodies[rc.object_body];
  const double r = rc.sys.bead_radius;
  auto clear = [&](double y) {
    return proximity(body.shape, Vec2(g.rod_radius, y) - body.offset).distance - r;
  };
  const double full = g.extension_depth;
  if (clear(full) >= 0.0) return {full, false};
  double above = body.offset.y() - r - 1.0, below = full;  // clear(above) > 0 > clear(below)
  for (int i = 0; i < 200 && below - above > 1e-12; ++i) {
    const double mid = 0.5 * (above + below);
    (clear(mid) >= 0.0 ? above : below) = mid;
  }
  return {above, true};
}

// Mounts the chain on the rod end at full extension, starting from the
// uniform bend of the free joints whose tip lands closest to it.
inline void mount(RadialChain& rc, const GripperConfig& g, const SolveSettings& cfg) {
  ChainSystem& s = rc.sys;
  const Vec2 target(g.rod_radius, g.extension_depth);
  const auto& free_dof = s.dofs.back();
  double best_a = 0.0, best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 3000; ++i) {
    const double a = free_dof.lower + (free_dof.upper - free_dof.lower) * i / 3000.0;
    Eigen::VectorXd q = rc.st.q;
    for (std::size_t d = 1; d < s.dofs.size(); ++d)
      if (!s.dofs[d].fixed) q[static_cast<Eigen::Index>(d)] = a;
    const double dist = (bead_positions(s, q).back() - target).norm();
    if (dist < best_d) {
      best_d = dist;
      best_a = a;
    }
  }
  for (std::size_t d = 1; d < s.dofs.size(); ++d)
    if (!s.dofs[d].fixed) rc.st.q[static_cast<Eigen::Index>(d)] = best_a;

  const Vec2 tip0 = bead_positions(s, rc.st.q).back();
  s.tethers = {Tether{tip(rc), Vec2(tip0.x(), 0.0), Vec2::UnitX(), g.tip_tether_stiffness},
               Tether{tip(rc), Vec2(0.0, tip0.y()), Vec2::UnitY(), g.tip_tether_stiffness}};
  // The object is brought in only after mounting.
  const Vec2 object_at = s.bodies[rc.object_body].offset;
  s.bodies[rc.object_body].offset.y() += 1e4;
  const int steps = 20;
  for (int k = 1; k <= steps; ++k) {
    const double f = static_cast<double>(k) / steps;
    const ChainSystem before = s;
    s.tethers[0].anchor.x() = tip0.x() + f * (target.x() - tip0.x());
    set_rod(rc, tip0.y() + f * (target.y() - tip0.y()));
    advance(rc, before, cfg);
  }
  s.bodies[rc.object_body].offset = object_at;
}

inline bool touches_object(const RadialChain& rc, const IncrementResult& r) {
  const auto& p = rc.sys.bodies[rc.object_body];
  for (std::size_t k = p.first_bead; k < std::min(p.end_bead, rc.sys.n_beads); ++k)
    if (r.bead_in_contact[k]) return true;
  return false;
}

inline ChainState chain_state_of(const GripperConfig& g, const RadialChain& rc) {
  ChainState cs = ChainState::straight(g.chain, rc.sys.tension);
  for (std::size_t j = 1; j < g.chain.n_joints(); ++j) cs.angles[j] = Angle::from_rad(rc.st.q[static_cast<Eigen::Index>(j)]);
  return cs;
}

/// Chains grouped by identical object cross-section: (representative azimuth, members).
inline std::vector<std::pair<Angle, std::vector<std::size_t>>> chain_classes(const GripperConfig& g,
                                                                           const ObjectShape& obj) {
  std::vector<std::pair<Angle, std::vector<std::size_t>>> classes;
  std::vector<Obstacle> seen;
  for (std::size_t i = 0; i < g.n_chains; ++i) {
    const Angle az = chain_azimuth(g, i);
    const Obstacle prof = object_profile(obj, az);
    std::size_t k = 0;
    for (; k < seen.size(); ++k) {
      const bool same = std::visit(
          [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            const auto* b = std::get_if<T>(&seen[k]);
            if (!b) return false;
            if constexpr (std::is_same_v<T, ConvexPolygon>) return a.vertices == b->vertices;
            else if constexpr (std::is_same_v<T, HalfPlane>) return a.point == b->point && a.normal == b->normal;
            else return a.center == b->center && a.radius == b->radius;
          },
          prof);
      if (same) break;
    }
    if (k == seen.size()) {
      seen.push_back(prof);
      classes.push_back({az, {}});
    }
    classes[k].second.push_back(i);
  }
  return classes;
}

}  // namespace detail

struct GraspRun {
  GripperState state;  // at the end of the last simulated phase
  GraspTrace trace;
};

struct NoiseHook {
  std::optional<std::uint64_t> seed;  // off when empty
  double force_sd = 0.05;             // N
};

/// Adds seeded Gaussian noise to every force; a no-op when the hook is off.
inline void apply_noise(GraspTrace& t, const NoiseHook& noise) {
  if (!noise.seed) return;
  std::mt19937_64 rng(*noise.seed);
  std::normal_distribution<double> n(0.0, noise.force_sd);
  for (auto& s : t.samples) s.force += n(rng);
}

namespace detail {

struct Phases {
  bool press = true;
  bool lift = true;
};

inline GraspRun run_protocol(const GripperConfig& g, const GripperState& start, const ObjectShape& obj,
                             const Protocol& proto, Phases which) {
  check_gripper_config(g);
  check_object(obj);
  check_protocol(proto);
  if (start.chains.size() != g.n_chains) throw InvalidInput("gripper state does not match the config");
  for (const auto& c : start.chains)
    if (c.tension != 0.0) throw InvalidInput("press requires the released (flexible) gripper");

  const auto classes = chain_classes(g, obj);
  const double rod_load = pressure_force_N(proto.pressure_A, g.piston_area_A);
  const PneumaticState jam_p{proto.pressure_A, proto.pressure_B};
  const double tension = equalizer_tension(g, jam_p);
  const double closing = hinge_closing_moment(g, jam_p);
  const SolveSettings& cfg = proto.solver;

  std::vector<RadialChain> chains;
  for (const auto& [az, members] : classes) chains.push_back(radial_chain(g, obj, az, proto));

  auto weight = [&](std::size_t k) { return static_cast<double>(classes[k].second.size()); };
  auto guarded = [&](Phase ph, double disp, auto&& fn) {
    try {
      return fn();
    } catch (const NonConvergence& e) {
      throw SimulationFailure(ph, disp, e.what());
    } catch (const Infeasible& e) {
      throw SimulationFailure(ph, disp, e.what());
    }
  };

  GraspRun run;
  GraspTrace& trace = run.trace;
  trace.metadata = {{"protocol", to_json(proto)},
                    {"object", to_json(obj)},
                    {"config_hash", config_hash(g)},
                    {"n_chains", g.n_chains},
                    {"tension_N", tension}};

  const int n_press = static_cast<int>(std::floor(proto.press_depth / proto.sample_step + 1e-9));
  const int n_lift = static_cast<int>(std::floor(proto.lift_distance / proto.sample_step + 1e-9));
  std::vector<IncrementResult> last(chains.size());
  auto count_contacts = [&] {
    std::size_t total = 0;
    for (std::size_t k = 0; k < chains.size(); ++k)
      if (touches_object(chains[k], last[k])) total += classes[k].second.size();
    return total;
  };
  auto object_force = [&] {
    double f = 0.0;
    for (std::size_t k = 0; k < chains.size(); ++k)
      f += weight(k) * last[k].body_force[chains[k].object_body].y();
    return f;
  };

  // Solves every chain for one object position with the rod free to ride up
  // against port A. Returns the rod-end force on the object.
  auto press_step = [&](double object_y) {
    std::vector<SystemState> starts;
    std::vector<ChainSystem> befores;
    double bound = std::numeric_limits<double>::infinity();
    bool on_object = false;
    for (auto& rc : chains) {
      starts.push_back(rc.st);
      befores.push_back(rc.sys);
      rc.sys.bodies[rc.object_body].offset.y() = object_y;
      const auto [b, obj_stop] = rod_bound(rc, g);
      if (b < bound) {
        bound = b;
        on_object = obj_stop;
      }
    }
    auto solve_at = [&](double y) {
      double pull = 0.0;
      for (std::size_t k = 0; k < chains.size(); ++k) {
        RadialChain& rc = chains[k];
        rc.st = starts[k];
        set_rod(rc, y);
        last[k] = advance(rc, befores[k], cfg);
        pull += weight(k) * rod_pull(rc, last[k]);
      }
      return pull;
    };
    const double pull = solve_at(bound);
    if (pull <= rod_load) return on_object ? rod_load - pull : 0.0;
    // The chains hold the rod short of its stop: bisect on the rod height.
    double hi = bound, lo = bound;
    for (double span = 1.0;; span *= 2.0) {
      lo = bound - span;
      if (solve_at(lo) <= rod_load || span > g.stroke) break;
      hi = lo;
    }
    for (int i = 0; i < 30 && hi - lo > 1e-6; ++i) {
      const double mid = 0.5 * (lo + hi);
      (solve_at(mid) > rod_load ? hi : lo) = mid;
    }
    solve_at(lo);
    return 0.0;
  };

  // Press: flexible chains, rod pushed out by port A.
  double rod_force = 0.0;
  guarded(Phase::Press, 0.0, [&] {
    for (auto& rc : chains) mount(rc, g, cfg);
    return 0;
  });
  // Displacement 0: the object a standoff below the lowest point of the gripper.
  double lowest = -std::numeric_limits<double>::infinity();
  for (auto& rc : chains)
    for (const Vec2& p : bead_positions(rc.sys, rc.st.q)) lowest = std::max(lowest, p.y());
  for (auto& rc : chains) {
    rc.top0 = lowest + rc.sys.bead_radius + proto.standoff;
    rc.sys.bodies[rc.object_body].offset.y() = rc.top0;
  }
  double depth = 0.0;
  for (int i = 0; i <= n_press; ++i) {
    const double d = i * proto.sample_step;
    rod_force = guarded(Phase::Press, d, [&] { return press_step(chains.front().top0 - d); });
    depth = d;
    if (which.press) trace.samples.push_back({d, object_force() + rod_force, Phase::Press});
  }
  trace.chains_in_contact.push_back(count_contacts());

  auto snapshot = [&] {
    GripperState gs;
    gs.chains.resize(g.n_chains);
    gs.hinge_angles.resize(g.n_chains);
    for (std::size_t k = 0; k < chains.size(); ++k) {
      for (std::size_t m : classes[k].second) {
        gs.chains[m] = chain_state_of(g, chains[k]);
        gs.hinge_angles[m] = Angle::from_rad(chains[k].st.q[0]);
      }
    }
    gs.equalizer_position = std::clamp(g.stroke - (g.extension_depth - chains.front().rod_y), 0.0, g.stroke);
    return gs;
  };
  if (!which.lift) {
    run.state = snapshot();
    return run;
  }

  // Jam: the wire is pulled, the rod locks, the hinges close.
  for (std::size_t k = 0; k < chains.size(); ++k) {
    RadialChain& rc = chains[k];
    for (int s = 1; s <= proto.jam_steps; ++s) {
      const double f = static_cast<double>(s) / proto.jam_steps;
      const ChainSystem before = rc.sys;
      rc.sys.tension = f * tension;
      const double cap = std::max(g.slack_joint_capacity, friction_capacity(g.chain, rc.sys.tension));
      for (std::size_t d = 1; d < rc.sys.dofs.size(); ++d) rc.sys.dofs[d].capacity = cap;
      rc.sys.dofs[0].moment = f * closing;
      last[k] = guarded(Phase::Jam, depth, [&] { return advance(rc, before, cfg); });
    }
  }
  trace.samples.push_back({depth, object_force() + rod_force, Phase::Jam});
  trace.chains_in_contact.push_back(count_contacts());

  // Lift: the gripper rises, the object stays; pull on the object is positive.
  for (int i = 1; i <= n_lift; ++i) {
    const double u = i * proto.sample_step;
    if (trace.escaped) {
      trace.samples.push_back({u, 0.0, Phase::Lift});
      continue;
    }
    bool any = false;
    for (std::size_t k = 0; k < chains.size(); ++k) {
      RadialChain& rc = chains[k];
      const ChainSystem before = rc.sys;
      rc.sys.bodies[rc.object_body].offset.y() = rc.top0 - depth + u;
      last[k] = guarded(Phase::Lift, u, [&] { return advance(rc, before, cfg); });
      any = any || touches_object(rc, last[k]);
    }
    const double force = any ? -object_force() : 0.0;
    if (!any) trace.escaped = true;
    trace.samples.push_back({u, force, Phase::Lift});
  }
  trace.chains_in_contact.push_back(count_contacts());
  run.state = snapshot();
  for (auto& c : run.state.chains) c.tension = tension;
  return run;
}

}  // namespace detail

/// Press the flexible gripper onto the object. The trace holds the press phase.
inline GraspRun press(const GripperConfig& g, const GripperState& released, const ObjectShape& obj,
                      const Protocol& proto) {
  return detail::run_protocol(g, released, obj, proto, {true, false});
}

/// Jam after the press and lift off the fixed object. The press is replayed
/// from the released state (it is deterministic); the trace holds the jam and
/// lift phases only.
inline GraspTrace jam_and_lift(const GripperConfig& g, const GripperState& released, const ObjectShape& obj,
                               const Protocol& proto) {
  return detail::run_protocol(g, released, obj, proto, {false, true}).trace;
}

/// Press, jam and lift in one trace.
inline GraspRun simulate_grasp(const GripperConfig& g, const ObjectShape& obj, const Protocol& proto) {
  return detail::run_protocol(g, build_gripper(g), obj, proto, {true, true});
}

inline double max_holding_force(const GraspTrace& t) {
  const auto lift = t.phase(Phase::Lift);
  if (lift.empty()) throw InvalidInput("max_holding_force: trace has no lift samples");
  double m = lift.front().force;
  for (const auto& s : lift) m = std::max(m, s.force);
  return m;
}

/// Largest lift force in each consecutive `window` mm, counted from the lift
/// peak onward. Slip wiggles inside a window do not show.
inline std::vector<double> lift_window_maxima(const GraspTrace& t, double window) {
  if (!(window > 0.0)) throw InvalidInput("lift_window_maxima: window must be > 0");
  const auto lift = t.phase(Phase::Lift);
  if (lift.empty()) throw InvalidInput("lift_window_maxima: trace has no lift samples");
  std::size_t peak = 0;
  for (std::size_t i = 1; i < lift.size(); ++i)
    if (lift[i].force > lift[peak].force) peak = i;
  std::vector<double> out;
  const double x0 = lift[peak].displacement;
  for (std::size_t i = peak; i < lift.size(); ++i) {
    const auto w = static_cast<std::size_t>(std::floor((lift[i].displacement - x0) / window + 1e-9));
    if (w >= out.size()) out.resize(w + 1, -std::numeric_limits<double>::infinity());
    out[w] = std::max(out[w], lift[i].force);
  }
  std::erase_if(out, [](double v) { return std::isinf(v); });
  return out;
}

/// Displacement of the first press sample with non-zero force.
inline std::optional<double> contact_onset(const GraspTrace& t, double threshold = 1e-6) {
  for (const auto& s : t.samples)
    if (s.phase == Phase::Press && s.force > threshold) return s.displacement;
  return std::nullopt;
}

struct ComparisonReport {
  double ratio = 0.0;                 // max(trace) / max(baseline)
  std::optional<double> crossover;    // pressing curves only
};

namespace detail {

inline double interpolate(const std::vector<TraceSample>& s, double x) {
  if (x <= s.front().displacement) return s.front().force;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (x <= s[i].displacement) {
      const double t = (x - s[i - 1].displacement) / (s[i].displacement - s[i - 1].displacement);
      return s[i - 1].force + t * (s[i].force - s[i - 1].force);
    }
  }
  return s.back().force;
}

}  // namespace detail

/// Ratio of maximum forces (lift phase when both traces have one, press
/// otherwise) and, on the press phase, the first sample after which the trace
/// never exceeds the baseline again.
inline ComparisonReport compare_to_baseline(const GraspTrace& trace, const GraspTrace& baseline) {
  const bool lift = !trace.phase(Phase::Lift).empty() && !baseline.phase(Phase::Lift).empty();
  const auto a = trace.phase(lift ? Phase::Lift : Phase::Press);
  const auto b = baseline.phase(lift ? Phase::Lift : Phase::Press);
  if (a.empty() || b.empty()) throw InvalidInput("compare_to_baseline: empty trace");
  if (a.back().displacement < b.front().displacement || b.back().displacement < a.front().displacement)
    throw InvalidInput("compare_to_baseline: displacement ranges do not overlap");
  auto max_of = [](const std::vector<TraceSample>& s) {
    double m = s.front().force;
    for (const auto& x : s) m = std::max(m, x.force);
    return m;
  };
  ComparisonReport rep;
  const double mb = max_of(b);
  if (mb == 0.0) throw InvalidInput("compare_to_baseline: baseline maximum is zero");
  rep.ratio = max_of(a) / mb;

  const auto pa = trace.phase(Phase::Press);
  const auto pb = baseline.phase(Phase::Press);
  if (pa.empty() || pb.empty()) return rep;
  const double lo = std::max(pa.front().displacement, pb.front().displacement);
  const double hi = std::min(pa.back().displacement, pb.back().displacement);
  std::optional<std::size_t> last_above;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double x = pa[i].displacement;
    if (x < lo || x > hi) continue;
    if (pa[i].force > detail::interpolate(pb, x)) last_above = i;
  }
  if (last_above) {
    for (std::size_t i = *last_above + 1; i < pa.size(); ++i) {
      if (pa[i].displacement > hi) break;
      rep.crossover = pa[i].displacement;
      break;
    }
  }
  return rep;
}

// ---- CSV -------------------------------------------------------------------

inline std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v);  // no "-0"
  return buf;
}

inline std::string trace_to_csv(const GraspTrace& t) {
  std::string out = "displacement_mm,force_N,phase\n";
  for (const auto& s : t.samples) {
    out += format_g6(s.displacement);
    out += ',';
    out += format_g6(s.force);
    out += ',';
    out += to_string(s.phase);
    out += '\n';
  }
  return out;
}

inline GraspTrace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "displacement_mm,force_N,phase")
    throw InvalidInput("trace csv: bad header");
  GraspTrace t;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) throw InvalidInput("trace csv: empty line " + std::to_string(row));
    if (line.back() == '\r') throw InvalidInput("trace csv: CRLF line ending");
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 3) throw InvalidInput("trace csv: expected 3 columns on line " + std::to_string(row));
    TraceSample s;
    try {
      std::size_t used = 0;
      s.displacement = std::stod(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("trailing");
      s.force = std::stod(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw InvalidInput("trace csv: bad number on line " + std::to_string(row));
    }
    if (cells[2] == "press") s.phase = Phase::Press;
    else if (cells[2] == "jam") s.phase = Phase::Jam;
    else if (cells[2] == "lift") s.phase = Phase::Lift;
    else throw InvalidInput("trace csv: unknown phase '" + cells[2] + "'");
    t.samples.push_back(s);
  }
  check_trace(t);
  return t;
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::json to_json(const ObjectShape& o) {
  nlohmann::json j{{"kind", to_string(o.kind)}, {"material", o.material}, {"friction", o.friction}};
  if (o.kind == ObjectKind::Cylinder) j["diameter"] = o.diameter;
  if (o.kind == ObjectKind::TriangularPrism) {
    j["apex_angle"] = o.apex_angle.deg();
    j["prism_height"] = o.prism_height;
    j["prism_length"] = o.prism_length;
  }
  return j;
}

inline ObjectShape object_from_json(const nlohmann::json& j) {
  using namespace json_util;
  constexpr const char* what = "ObjectShape";
  require_object(j, what);
  reject_unknown(j, {"kind", "material", "friction", "diameter", "apex_angle", "prism_height", "prism_length"}, what);
  const auto kind = string(j, "kind", what);
  const std::string material = j.contains("material") ? string(j, "material", what) : "";
  ObjectShape o;
  if (kind == "Cylinder") {
    o = ObjectShape::cylinder(number(j, "diameter", what), material.empty() ? "polyacetal" : material);
  } else if (kind == "TriangularPrism") {
    o = ObjectShape::prism(Angle::from_deg(number(j, "apex_angle", what)), material.empty() ? "acrylic" : material);
    o.prism_height = number_or(j, "prism_height", o.prism_height, what);
    o.prism_length = number_or(j, "prism_length", o.prism_length, what);
  } else if (kind == "HalfPlane") {
    o = ObjectShape::half_plane(material.empty() ? "steel" : material);
  } else {
    throw InvalidInput("ObjectShape.kind: unknown kind '" + kind + "'");
  }
  o.friction = number_or(j, "friction", o.friction, what);
  check_object(o);
  return o;
}

inline nlohmann::json to_json(const Protocol& p) {
  return {{"press_depth", p.press_depth}, {"lift_distance", p.lift_distance}, {"speed", p.speed},
          {"pressure_A", p.pressure_A},   {"pressure_B", p.pressure_B},       {"trials", p.trials},
          {"sample_step", p.sample_step}, {"standoff", p.standoff},           {"jam_steps", p.jam_steps},
          {"solver", to_json(p.solver)}};
}

inline Protocol protocol_from_json(const nlohmann::json& j) {
  using namespace json_util;
  constexpr const char* what = "Protocol";
  require_object(j, what);
  reject_unknown(j, {"press_depth", "lift_distance", "speed", "pressure_A", "pressure_B", "trials", "sample_step",
                     "standoff", "jam_steps", "solver"},
                 what);
  Protocol p;
  p.press_depth = number_or(j, "press_depth", p.press_depth, what);
  p.lift_distance = number_or(j, "lift_distance", p.lift_distance, what);
  p.speed = number_or(j, "speed", p.speed, what);
  p.pressure_A = number_or(j, "pressure_A", p.pressure_A, what);
  p.pressure_B = number_or(j, "pressure_B", p.pressure_B, what);
  p.trials = j.contains("trials") ? static_cast<int>(integer(j, "trials", what)) : p.trials;
  p.sample_step = number_or(j, "sample_step", p.sample_step, what);
  p.standoff = number_or(j, "standoff", p.standoff, what);
  p.jam_steps = j.contains("jam_steps") ? static_cast<int>(integer(j, "jam_steps", what)) : p.jam_steps;
  if (j.contains("solver")) p.solver = solve_settings_from_json(j.at("solver"), grasp_solver_settings());
  check_protocol(p);
  return p;
}

}  // namespace jamcord

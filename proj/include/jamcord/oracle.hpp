#pragma once

// Exhaustive-grid equilibrium for chains with at most three free joints.
// Independent of the incremental solver: its own kinematics, no derivatives.
//
// Among grid configurations that keep every constrained bead outside its
// obstacle, it returns the one minimising
//
//   -sum(F . p) + T * sum L(theta) + sum capacity * |theta - theta0|,
//
// i.e. potential energy plus the friction work of a monotone path from the
// starting posture.

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "jamcord/chain_model.hpp"
#include "jamcord/errors.hpp"
#include "jamcord/jamming_solver.hpp"
#include "jamcord/obstacle.hpp"

namespace jamcord {

inline double oracle_potential(const ChainSpec& spec, const LoadCase& loads, double tension,
                               const std::vector<double>& theta, const std::vector<double>& theta0,
                               bool* feasible = nullptr) {
  using C = std::complex<double>;
  std::vector<C> pos(spec.n_units);
  C heading(1.0, 0.0);
  for (std::size_t s = 0; s + 1 < spec.n_units; ++s) {
    heading *= std::polar(1.0, theta[s]);
    pos[s + 1] = pos[s] + spec.unit_pitch * heading;
  }
  double energy = 0.0;
  for (const auto& l : loads.point_loads)
    energy -= l.force.x() * pos[l.bead].real() + l.force.y() * pos[l.bead].imag();
  if (loads.gravity)
    for (const auto& p : pos) energy -= loads.gravity->x() * p.real() + loads.gravity->y() * p.imag();
  const double cap = friction_capacity(spec, tension);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    energy += tension * wire_path_length_unchecked(spec.bead, theta[j]);
    energy += cap * std::abs(theta[j] - theta0[j]);
  }
  if (feasible) {
    *feasible = true;
    for (const auto& cc : loads.contact_constraints) {
      const Vec2 p(pos[cc.bead].real(), pos[cc.bead].imag());
      if (proximity(cc.obstacle, p).distance < spec.bead.R1) *feasible = false;
    }
  }
  return energy;
}

inline ChainState brute_force_equilibrium(const ChainSpec& spec, const ChainState& state0,
                                          const LoadCase& loads, Angle grid_step) {
  check_chain_spec(spec);
  check_chain_state(spec, state0);
  check_load_case(spec, loads);
  const double h = grid_step.rad();
  if (!(h > 0.0)) throw InvalidInput("grid_step must be > 0");

  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < spec.n_joints(); ++j)
    if (!spec.is_rigid(j)) free.push_back(j);
  if (free.size() > 3) throw InvalidInput("brute-force oracle supports at most 3 free joints");

  const auto range = spec.range();
  std::vector<double> theta0(spec.n_joints());
  for (std::size_t j = 0; j < theta0.size(); ++j) theta0[j] = state0.angles[j].rad();

  // Grid per free joint: lower + k*h, plus the exact start and upper bound.
  std::vector<std::vector<double>> axes;
  for (std::size_t j : free) {
    std::vector<double> axis;
    const double lo = range.lower.rad(), hi = range.upper.rad();
    const auto steps = static_cast<long>(std::floor((hi - lo) / h + 1e-9));
    for (long k = 0; k <= steps; ++k) axis.push_back(lo + static_cast<double>(k) * h);
    if (axis.back() < hi) axis.push_back(hi);
    axis.push_back(theta0[j]);
    axes.push_back(std::move(axis));
  }

  std::vector<double> theta = theta0, best = theta0;
  double best_e = std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<std::size_t> idx(free.size(), 0);
  while (true) {
    for (std::size_t a = 0; a < free.size(); ++a) theta[free[a]] = axes[a][idx[a]];
    bool ok = false;
    const double e = oracle_potential(spec, loads, state0.tension, theta, theta0, &ok);
    // Ties keep the configuration closest to the start.
    if (ok && (e < best_e - 1e-12 ||
               (std::abs(e - best_e) <= 1e-12 && found &&
                [&] {
                  double dn = 0.0, db = 0.0;
                  for (std::size_t j = 0; j < theta.size(); ++j) {
                    dn += std::abs(theta[j] - theta0[j]);
                    db += std::abs(best[j] - theta0[j]);
                  }
                  return dn < db;
                }()))) {
      best_e = e;
      best = theta;
      found = true;
    }
    std::size_t a = 0;
    while (a < free.size() && ++idx[a] == axes[a].size()) idx[a++] = 0;
    if (a == free.size()) break;
  }
  if (!found) throw Infeasible("no feasible grid configuration; refine grid_step");

  ChainState out;
  out.tension = state0.tension;
  for (double t : best) out.angles.push_back(Angle::from_rad(t));
  out.joint_status.assign(best.size(), JointStatus::Stuck);
  for (std::size_t j = 0; j < best.size(); ++j) {
    if (best[j] != theta0[j]) out.joint_status[j] = JointStatus::Slipping;
  }
  return out;
}

}  // namespace jamcord

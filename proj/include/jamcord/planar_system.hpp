#pragma once

// Quasi-static increment of a planar serial bead chain with Coulomb joints,
// joint springs, dead loads, tethers and frictional obstacle contact.
//
// One increment minimises
//
//   E(q) + sum_d capacity_d * |q_d - q_ref_d|
//
// where E collects wire path energy, springs, applied moments, dead-load
// work, tether springs, augmented-Lagrangian contact terms and lagged
// obstacle friction. The stationarity conditions of this problem are the
// stick-slip conditions of every joint. Bound constraints (joint limits) and
// the friction kink are handled by an active set; the free joints take
// damped Newton steps whose largest component is capped by
// angle_step_limit. An outer loop updates contact multipliers until the
// penetration is below tolerance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "jamcord/bead_geometry.hpp"
#include "jamcord/errors.hpp"
#include "jamcord/obstacle.hpp"
#include "jamcord/units.hpp"

namespace jamcord {

struct SolveSettings {
  int load_steps = 50;
  int max_iterations = 200;         // Newton iterations per increment
  double moment_tolerance = 1e-3;   // N*mm
  Angle angle_step_limit = Angle::from_deg(1.0);
  double contact_stiffness = 1e4;   // N/mm, augmented-Lagrangian penalty
  double penetration_tolerance = 1e-7;  // mm
  int max_contact_updates = 60;
  double slip_regularization = 1e-4;    // mm of object slip below which friction is smoothed
};

/// One rotational degree of freedom. It turns every segment from `pivot` on.
struct Dof {
  std::size_t pivot = 0;
  double lower = -kPi;
  double upper = kPi;
  bool fixed = false;
  double capacity = 0.0;   // N*mm, Coulomb holding moment
  double spring_k = 0.0;   // N*mm/rad
  double spring_rest = 0.0;
  double moment = 0.0;     // constant applied moment along +q
  bool wire = false;       // contributes tension * wire_path_length(q)
};

/// Linear spring pulling bead `bead` toward the line through `anchor` with unit normal `normal`.
struct Tether {
  std::size_t bead = 0;
  Vec2 anchor = Vec2::Zero();
  Vec2 normal = Vec2::UnitX();
  double stiffness = 0.0;  // N/mm
};

struct Body {
  Obstacle shape;
  Vec2 offset = Vec2::Zero();         // current translation
  double friction = 0.0;              // bead-object Coulomb coefficient
  std::size_t first_bead = 0;         // beads [first_bead, end_bead) may touch
  std::size_t end_bead = static_cast<std::size_t>(-1);
};

struct ChainSystem {
  Vec2 base = Vec2::Zero();
  double base_heading = 0.0;  // rad
  std::size_t n_beads = 2;
  double pitch = 6.0;
  double bead_radius = 3.0;
  BeadSpec bead;
  double tension = 0.0;
  std::vector<Dof> dofs;           // sorted by pivot
  std::vector<Vec2> bead_forces;   // dead loads, size n_beads (may be empty)
  std::vector<Tether> tethers;
  std::vector<Body> bodies;
};

struct ContactPair {
  std::size_t bead;
  std::size_t body;
};

inline std::vector<ContactPair> contact_pairs(const ChainSystem& s) {
  std::vector<ContactPair> pairs;
  for (std::size_t b = 0; b < s.bodies.size(); ++b) {
    const std::size_t end = std::min(s.bodies[b].end_bead, s.n_beads);
    for (std::size_t k = s.bodies[b].first_bead; k < end; ++k) pairs.push_back({k, b});
  }
  return pairs;
}

/// State carried between increments.
struct SystemState {
  Eigen::VectorXd q;
  std::vector<double> lambda;  // contact multiplier per pair (N)
};

struct IncrementResult {
  SystemState state;
  std::vector<Vec2> positions;
  std::vector<Vec2> body_force;        // force exerted by the chain on each body
  std::vector<bool> bead_in_contact;
  std::vector<double> dof_residual;    // excess moment beyond what the joint can hold, N*mm
  std::vector<double> dof_moment;      // -dE/dq at the solution (net applied minus restoring)
  double max_residual = 0.0;
  double max_penetration = 0.0;
  int iterations = 0;
};

/// Per-iteration diagnostics: "step,joint,angle,residual".
struct DiagnosticSink {
  std::ostream* out = nullptr;
  int step = 0;
};

namespace detail {

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

inline std::vector<Vec2> bead_positions(const ChainSystem& s, const Eigen::VectorXd& q) {
  std::vector<Vec2> p(s.n_beads);
  p[0] = s.base;
  double h = s.base_heading;
  std::size_t d = 0;
  for (std::size_t seg = 0; seg + 1 < s.n_beads; ++seg) {
    while (d < s.dofs.size() && s.dofs[d].pivot == seg) h += q[static_cast<Eigen::Index>(d++)];
    p[seg + 1] = p[seg] + s.pitch * Vec2(std::cos(h), std::sin(h));
  }
  return p;
}

// Smoothed |u| with C2 transition on [-eps, eps].
inline double slip_potential(double u, double eps) {
  const double a = std::abs(u);
  if (a >= eps) return a;
  return -a * a * a / (3.0 * eps * eps) + a * a / eps + eps / 3.0;
}
inline double slip_force(double u, double eps) {
  const double a = std::abs(u);
  const double s = u < 0.0 ? -1.0 : 1.0;
  if (a >= eps) return s;
  return s * (-a * a / (eps * eps) + 2.0 * a / eps);
}
inline double slip_stiffness(double u, double eps) {
  const double a = std::abs(u);
  if (a >= eps) return 0.0;
  return -2.0 * a / (eps * eps) + 2.0 / eps;
}

/// Quantities frozen during one inner solve.
struct Frozen {
  double kc;
  double slip_eps;
  std::vector<ContactPair> pairs;
  std::vector<double> lambda;       // AL multipliers
  std::vector<double> normal_force; // lagged, for friction
  std::vector<Vec2> tangent;        // lagged
  std::vector<Vec2> ref_positions;  // bead positions at increment start
  std::vector<Vec2> body_shift;     // body offset change since increment start
};

struct Evaluation {
  double energy = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  std::vector<Vec2> p;
  double max_penetration = 0.0;
};

inline Evaluation evaluate(const ChainSystem& s, const Frozen& fz, const Eigen::VectorXd& q,
                           bool want_hessian) {
  const std::size_t n = s.n_beads;
  const auto nd = static_cast<Eigen::Index>(s.dofs.size());
  Evaluation ev;
  ev.p = bead_positions(s, q);
  ev.grad = Eigen::VectorXd::Zero(nd);
  if (want_hessian) ev.hess = Eigen::MatrixXd::Zero(nd, nd);

  std::vector<Vec2> f(n, Vec2::Zero());  // dE/dp_k
  std::vector<Mat2> K(n, Mat2::Zero());  // d2E/dp_k^2
  std::vector<bool> has_k(n, false);

  for (std::size_t k = 0; k < s.bead_forces.size() && k < n; ++k) {
    ev.energy -= s.bead_forces[k].dot(ev.p[k]);
    f[k] -= s.bead_forces[k];
  }
  for (const auto& t : s.tethers) {
    const double d = t.normal.dot(ev.p[t.bead] - t.anchor);
    ev.energy += 0.5 * t.stiffness * d * d;
    f[t.bead] += t.stiffness * d * t.normal;
    K[t.bead] += t.stiffness * t.normal * t.normal.transpose();
    has_k[t.bead] = true;
  }
  for (std::size_t c = 0; c < fz.pairs.size(); ++c) {
    const auto& pr = fz.pairs[c];
    const Body& body = s.bodies[pr.body];
    const Vec2 local = ev.p[pr.bead] - body.offset;
    const Proximity px = proximity(body.shape, local);
    const double g = px.distance - s.bead_radius;
    ev.max_penetration = std::max(ev.max_penetration, -g);
    const double lam = fz.lambda[c];
    const double force = lam - fz.kc * g;
    if (force > 0.0) {
      ev.energy += -lam * g + 0.5 * fz.kc * g * g;
      f[pr.bead] -= force * px.normal;
      K[pr.bead] += fz.kc * px.normal * px.normal.transpose() - force * px.hessian;
      has_k[pr.bead] = true;
    } else {
      ev.energy += -lam * lam / (2.0 * fz.kc);
    }
    const double nbar = fz.normal_force[c];
    if (body.friction > 0.0 && nbar > 0.0) {
      const Vec2& t = fz.tangent[c];
      const double u = t.dot(ev.p[pr.bead] - fz.ref_positions[pr.bead] - fz.body_shift[pr.body]);
      const double w = body.friction * nbar;
      ev.energy += w * slip_potential(u, fz.slip_eps);
      f[pr.bead] += w * slip_force(u, fz.slip_eps) * t;
      K[pr.bead] += w * slip_stiffness(u, fz.slip_eps) * t * t.transpose();
      has_k[pr.bead] = true;
    }
  }

  // Joint-local terms.
  for (Eigen::Index d = 0; d < nd; ++d) {
    const Dof& dof = s.dofs[static_cast<std::size_t>(d)];
    const double x = q[d];
    if (dof.wire && s.tension != 0.0) {
      ev.energy += s.tension * wire_path_length_unchecked(s.bead, x);
      ev.grad[d] += s.tension * wire_path_slope(s.bead, x);
      if (want_hessian) ev.hess(d, d) += s.tension * wire_path_curvature(s.bead, x);
    }
    if (dof.spring_k != 0.0) {
      const double dx = x - dof.spring_rest;
      ev.energy += 0.5 * dof.spring_k * dx * dx;
      ev.grad[d] += dof.spring_k * dx;
      if (want_hessian) ev.hess(d, d) += dof.spring_k;
    }
    if (dof.moment != 0.0) {
      ev.energy -= dof.moment * x;
      ev.grad[d] -= dof.moment;
    }
  }

  // Suffix sums over beads: sum f, sum cross(p, f), sum f.p
  std::vector<Vec2> sf(n + 1, Vec2::Zero());
  std::vector<double> sc(n + 1, 0.0), sfp(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    sf[k] = sf[k + 1] + f[k];
    sc[k] = sc[k + 1] + cross2(ev.p[k], f[k]);
    sfp[k] = sfp[k + 1] + f[k].dot(ev.p[k]);
  }
  for (Eigen::Index d = 0; d < nd; ++d) {
    const std::size_t pv = s.dofs[static_cast<std::size_t>(d)].pivot;
    ev.grad[d] += sc[pv + 1] - cross2(ev.p[pv], sf[pv + 1]);
  }
  if (!want_hessian) return ev;

  for (Eigen::Index d = 0; d < nd; ++d) {
    for (Eigen::Index e = d; e < nd; ++e) {
      const std::size_t m = std::max(s.dofs[static_cast<std::size_t>(d)].pivot,
                                     s.dofs[static_cast<std::size_t>(e)].pivot);
      const double h = -(sfp[m + 1] - ev.p[m].dot(sf[m + 1]));
      ev.hess(d, e) += h;
      if (e != d) ev.hess(e, d) += h;
    }
  }
  Eigen::VectorXd jac(nd);
  Eigen::MatrixXd jk(2, nd);
  for (std::size_t k = 1; k < n; ++k) {
    if (!has_k[k]) continue;
    for (Eigen::Index d = 0; d < nd; ++d) {
      const std::size_t pv = s.dofs[static_cast<std::size_t>(d)].pivot;
      jk.col(d) = pv < k ? perp(ev.p[k] - ev.p[pv]) : Vec2::Zero();
    }
    ev.hess.noalias() += jk.transpose() * K[k] * jk;
  }
  return ev;
}

enum class Side { Locked, Free };

struct Classification {
  std::vector<Side> side;
  std::vector<double> sigma;  // friction slope sign for free dofs
  std::vector<double> lo, hi; // projection box for free dofs
  std::vector<double> residual;
  double max_residual = 0.0;
};

// Decides which dofs may move, on which side of their friction kink, and the
// per-dof stationarity residual.
inline Classification classify(const ChainSystem& s, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& qref, const Eigen::VectorXd& grad) {
  const std::size_t nd = s.dofs.size();
  Classification c;
  c.side.assign(nd, Side::Locked);
  c.sigma.assign(nd, 0.0);
  c.lo.assign(nd, 0.0);
  c.hi.assign(nd, 0.0);
  c.residual.assign(nd, 0.0);
  for (std::size_t d = 0; d < nd; ++d) {
    const Dof& dof = s.dofs[d];
    const auto i = static_cast<Eigen::Index>(d);
    if (dof.fixed) continue;
    const double x = q[i], k = qref[i], cap = dof.capacity, g = grad[i];
    const bool kinked = cap > 0.0;
    const bool at_kink = kinked && x == k;
    const bool at_lo = x <= dof.lower;
    const bool at_hi = x >= dof.upper;
    double dir = 0.0;
    if (!at_kink && !at_lo && !at_hi) {
      dir = 0.0;  // interior: either way
      c.side[d] = Side::Free;
      c.sigma[d] = kinked ? (x > k ? 1.0 : -1.0) : 0.0;
    } else {
      const double up_slope = g + (kinked ? (x >= k ? cap : -cap) : 0.0);
      const double dn_slope = -g + (kinked ? (x <= k ? cap : -cap) : 0.0);
      if (!at_hi && up_slope < 0.0) {
        dir = 1.0;
      } else if (!at_lo && dn_slope < 0.0) {
        dir = -1.0;
      }
      if (dir != 0.0) {
        c.side[d] = Side::Free;
        if (kinked) c.sigma[d] = (x > k || (x == k && dir > 0.0)) ? 1.0 : -1.0;
      }
    }
    if (c.side[d] == Side::Free) {
      double lo = dof.lower, hi = dof.upper;
      if (kinked) {
        if (c.sigma[d] > 0.0) lo = std::max(lo, k);
        else hi = std::min(hi, k);
      }
      c.lo[d] = lo;
      c.hi[d] = hi;
      c.residual[d] = std::abs(g + cap * c.sigma[d]);
      // A free dof at the edge of its box can only move inward.
      if ((x <= lo && g + cap * c.sigma[d] > 0.0) || (x >= hi && g + cap * c.sigma[d] < 0.0)) {
        c.residual[d] = 0.0;
        c.side[d] = Side::Locked;
      }
    }
    c.max_residual = std::max(c.max_residual, c.residual[d]);
  }
  return c;
}

inline double objective(const ChainSystem& s, const Evaluation& ev, const Eigen::VectorXd& q,
                        const Eigen::VectorXd& qref) {
  double phi = ev.energy;
  for (std::size_t d = 0; d < s.dofs.size(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    phi += s.dofs[d].capacity * std::abs(q[i] - qref[i]);
  }
  return phi;
}

struct InnerResult {
  Eigen::VectorXd q;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Minimises the local model
//   0.5 (x - x0)' H (x - x0) + g' (x - x0) + sum c_i |x_i - k_i|,  lo <= x <= hi
// over the dofs listed in `vars` (H positive definite on them) by a primal
// active-set method. Breakpoints are the bounds and the kinks; a dof resting
// on one is held until its one-sided slope says it should leave.
inline Eigen::VectorXd local_model_minimiser(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                             const Eigen::VectorXd& x0, const std::vector<Eigen::Index>& vars,
                                             const std::vector<double>& lo, const std::vector<double>& hi,
                                             const Eigen::VectorXd& k, const std::vector<double>& c) {
  const auto nv = static_cast<Eigen::Index>(vars.size());
  Eigen::VectorXd x(nv), x0v(nv), gv(nv), kv(nv), cv(nv), lov(nv), hiv(nv);
  for (Eigen::Index a = 0; a < nv; ++a) {
    const auto i = vars[static_cast<std::size_t>(a)];
    x0v[a] = x0[i];
    gv[a] = g[i];
    kv[a] = k[i];
    cv[a] = c[static_cast<std::size_t>(i)];
    lov[a] = lo[static_cast<std::size_t>(i)];
    hiv[a] = hi[static_cast<std::size_t>(i)];
  }
  Eigen::MatrixXd Hv(nv, nv);
  for (Eigen::Index a = 0; a < nv; ++a)
    for (Eigen::Index b = 0; b < nv; ++b) Hv(a, b) = H(vars[static_cast<std::size_t>(a)], vars[static_cast<std::size_t>(b)]);
  x = x0v;

  // sigma: side of the kink for free dofs (0 without friction); held: on a breakpoint.
  std::vector<double> sigma(static_cast<std::size_t>(nv), 0.0);
  std::vector<bool> held(static_cast<std::size_t>(nv), false);
  for (Eigen::Index a = 0; a < nv; ++a) {
    const auto u = static_cast<std::size_t>(a);
    const bool kinked = cv[a] > 0.0;
    if (x[a] <= lov[a] || x[a] >= hiv[a] || (kinked && x[a] == kv[a])) held[u] = true;
    else if (kinked) sigma[u] = x[a] > kv[a] ? 1.0 : -1.0;
  }
  auto segment = [&](Eigen::Index a) {
    double l = lov[a], h = hiv[a];
    const auto u = static_cast<std::size_t>(a);
    if (cv[a] > 0.0) {
      if (sigma[u] > 0.0) l = std::max(l, kv[a]);
      else h = std::min(h, kv[a]);
    }
    return std::pair{l, h};
  };

  const int budget = 20 * static_cast<int>(nv) + 50;
  for (int iter = 0; iter < budget; ++iter) {
    const Eigen::VectorXd smooth = gv + Hv * (x - x0v);
    std::vector<Eigen::Index> F;
    for (Eigen::Index a = 0; a < nv; ++a)
      if (!held[static_cast<std::size_t>(a)]) F.push_back(a);
    const auto m = static_cast<Eigen::Index>(F.size());
    Eigen::VectorXd p = Eigen::VectorXd::Zero(nv);
    bool moved = false;
    if (m > 0) {
      Eigen::MatrixXd HF(m, m);
      Eigen::VectorXd rF(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        rF[a] = -(smooth[F[static_cast<std::size_t>(a)]] + cv[F[static_cast<std::size_t>(a)]] * sigma[static_cast<std::size_t>(F[static_cast<std::size_t>(a)])]);
        for (Eigen::Index b = 0; b < m; ++b) HF(a, b) = Hv(F[static_cast<std::size_t>(a)], F[static_cast<std::size_t>(b)]);
      }
      const Eigen::VectorXd pF = HF.ldlt().solve(rF);
      for (Eigen::Index a = 0; a < m; ++a) p[F[static_cast<std::size_t>(a)]] = pF[a];
      double alpha = 1.0;
      Eigen::Index block = -1;
      for (Eigen::Index a : F) {
        const auto [l, h] = segment(a);
        if (p[a] > 0.0 && x[a] + p[a] > h) {
          const double t = (h - x[a]) / p[a];
          if (t < alpha) { alpha = t; block = a; }
        } else if (p[a] < 0.0 && x[a] + p[a] < l) {
          const double t = (l - x[a]) / p[a];
          if (t < alpha) { alpha = t; block = a; }
        }
      }
      alpha = std::max(alpha, 0.0);
      const double size = (alpha * p).cwiseAbs().maxCoeff();
      for (Eigen::Index a : F) {
        const auto [l, h] = segment(a);
        x[a] = std::clamp(x[a] + alpha * p[a], l, h);
      }
      if (block >= 0) {
        const auto [l, h] = segment(block);
        x[block] = p[block] > 0.0 ? h : l;
        held[static_cast<std::size_t>(block)] = true;
        sigma[static_cast<std::size_t>(block)] = 0.0;
        continue;
      }
      moved = size > 0.0;
      (void)moved;
    }
    // Subspace minimum reached: release the held dof with the steepest descent.
    const Eigen::VectorXd sm = gv + Hv * (x - x0v);
    double best = -1e-12 * std::max(1.0, sm.cwiseAbs().maxCoeff());
    Eigen::Index rel = -1;
    double rel_dir = 0.0;
    for (Eigen::Index a = 0; a < nv; ++a) {
      if (!held[static_cast<std::size_t>(a)]) continue;
      const bool kinked = cv[a] > 0.0;
      const double up = sm[a] + (kinked ? (x[a] >= kv[a] ? cv[a] : -cv[a]) : 0.0);
      const double dn = -sm[a] + (kinked ? (x[a] <= kv[a] ? cv[a] : -cv[a]) : 0.0);
      if (x[a] < hiv[a] && up < best) { best = up; rel = a; rel_dir = 1.0; }
      if (x[a] > lov[a] && dn < best) { best = dn; rel = a; rel_dir = -1.0; }
    }
    if (rel < 0) break;
    const auto u = static_cast<std::size_t>(rel);
    held[u] = false;
    if (cv[rel] > 0.0) sigma[u] = (x[rel] > kv[rel] || (x[rel] == kv[rel] && rel_dir > 0.0)) ? 1.0 : -1.0;
  }
  Eigen::VectorXd out = x0;
  for (Eigen::Index a = 0; a < nv; ++a) out[vars[static_cast<std::size_t>(a)]] = x[a];
  return out;
}

inline InnerResult inner_solve(const ChainSystem& s, const Frozen& fz, Eigen::VectorXd q,
                               const Eigen::VectorXd& qref, const SolveSettings& cfg,
                               double tolerance, const DiagnosticSink& sink) {
  InnerResult out;
  const double step_cap = cfg.angle_step_limit.rad();
  std::vector<Eigen::Index> vars;
  std::vector<double> lo, hi, cap;
  for (std::size_t d = 0; d < s.dofs.size(); ++d) {
    lo.push_back(s.dofs[d].lower);
    hi.push_back(s.dofs[d].upper);
    cap.push_back(s.dofs[d].capacity);
    if (!s.dofs[d].fixed) vars.push_back(static_cast<Eigen::Index>(d));
  }
  for (int it = 0;; ++it) {
    Evaluation ev = evaluate(s, fz, q, true);
    const Classification cl = classify(s, q, qref, ev.grad);
    if (sink.out) {
      for (std::size_t d = 0; d < s.dofs.size(); ++d) {
        if (s.dofs[d].fixed) continue;
        *sink.out << sink.step << ',' << d << ',' << rad_to_deg(q[static_cast<Eigen::Index>(d)])
                  << ',' << cl.residual[d] << '\n';
      }
    }
    out.residual = cl.max_residual;
    out.iterations = it;
    if (cl.max_residual <= tolerance) {
      out.converged = true;
      break;
    }
    if (it >= cfg.max_iterations || vars.empty()) break;

    // Positive definite model Hessian: eigenvalues by magnitude, floored.
    const auto nv = static_cast<Eigen::Index>(vars.size());
    Eigen::MatrixXd Hv(nv, nv);
    for (Eigen::Index a = 0; a < nv; ++a)
      for (Eigen::Index b = 0; b < nv; ++b) Hv(a, b) = ev.hess(vars[static_cast<std::size_t>(a)], vars[static_cast<std::size_t>(b)]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Hv);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    const double floor = 1e-9 * scale;
    const Eigen::VectorXd mag = lam.unaryExpr([&](double v) { return std::max(std::abs(v), floor); });
    const Eigen::MatrixXd Hp = eig.eigenvectors() * mag.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(ev.hess.rows(), ev.hess.cols());
    for (Eigen::Index a = 0; a < nv; ++a)
      for (Eigen::Index b = 0; b < nv; ++b) H(vars[static_cast<std::size_t>(a)], vars[static_cast<std::size_t>(b)]) = Hp(a, b);

    const Eigen::VectorXd target = local_model_minimiser(H, ev.grad, q, vars, lo, hi, qref, cap);
    const Eigen::VectorXd d = target - q;
    const double biggest = d.cwiseAbs().maxCoeff();
    if (biggest == 0.0) break;
    double predicted = ev.grad.dot(d);
    for (std::size_t i = 0; i < s.dofs.size(); ++i) {
      const auto e = static_cast<Eigen::Index>(i);
      predicted += cap[i] * (std::abs(target[e] - qref[e]) - std::abs(q[e] - qref[e]));
    }
    const double phi0 = objective(s, ev, q, qref);
    double alpha = std::min(1.0, step_cap / biggest);
    Eigen::VectorXd best = q;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      const Eigen::VectorXd trial = q + alpha * d;
      if (trial == q) break;
      const Evaluation et = evaluate(s, fz, trial, false);
      if (objective(s, et, trial, qref) <= phi0 + 1e-4 * alpha * std::min(predicted, 0.0)) {
        best = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Near the optimum the energy decrease drops below round-off; take the
      // model step when it still shrinks the residual.
      double a = std::min(1.0, step_cap / biggest);
      for (int ls = 0; ls < 8 && !accepted; ++ls, a *= 0.5) {
        const Eigen::VectorXd trial = q + a * d;
        const Evaluation et = evaluate(s, fz, trial, false);
        if (classify(s, trial, qref, et.grad).max_residual < 0.9 * cl.max_residual) {
          best = trial;
          accepted = true;
        }
      }
    }
    if (!accepted) break;  // no further decrease representable
    q = best;
  }
  out.q = std::move(q);
  return out;
}

}  // namespace detail

/// Advances `start` to equilibrium under the current loads and body offsets of
/// `sys`. `body_offsets_at_start` gives where each body sat when the increment
/// began; object friction resists bead slip relative to that motion.
inline IncrementResult solve_increment(const ChainSystem& sys, const SystemState& start,
                                       const std::vector<Vec2>& body_offsets_at_start,
                                       const SolveSettings& cfg, DiagnosticSink sink = {}) {
  using namespace detail;
  Frozen fz;
  fz.kc = cfg.contact_stiffness;
  fz.slip_eps = cfg.slip_regularization;
  fz.pairs = contact_pairs(sys);
  fz.lambda = start.lambda;
  fz.lambda.resize(fz.pairs.size(), 0.0);
  fz.ref_positions = bead_positions(sys, start.q);
  fz.body_shift.resize(sys.bodies.size());
  for (std::size_t b = 0; b < sys.bodies.size(); ++b)
    fz.body_shift[b] = sys.bodies[b].offset -
                       (b < body_offsets_at_start.size() ? body_offsets_at_start[b] : sys.bodies[b].offset);

  auto refresh_lagged = [&](const std::vector<Vec2>& p, const std::vector<double>& forces) {
    fz.normal_force = forces;
    fz.tangent.assign(fz.pairs.size(), Vec2::UnitX());
    for (std::size_t c = 0; c < fz.pairs.size(); ++c) {
      const Body& body = sys.bodies[fz.pairs[c].body];
      const Proximity px = proximity(body.shape, p[fz.pairs[c].bead] - body.offset);
      fz.tangent[c] = perp(px.normal);
    }
  };
  auto contact_forces = [&](const std::vector<Vec2>& p) {
    std::vector<double> forces(fz.pairs.size(), 0.0);
    for (std::size_t c = 0; c < fz.pairs.size(); ++c) {
      const Body& body = sys.bodies[fz.pairs[c].body];
      const double g = proximity(body.shape, p[fz.pairs[c].bead] - body.offset).distance - sys.bead_radius;
      forces[c] = std::max(0.0, fz.lambda[c] - fz.kc * g);
    }
    return forces;
  };

  Eigen::VectorXd q = start.q;
  const Eigen::VectorXd qref = start.q;
  refresh_lagged(fz.ref_positions, contact_forces(fz.ref_positions));

  IncrementResult res;
  int total_iterations = 0;
  bool done = false;
  double residual = 0.0;
  double last_pen = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer <= cfg.max_contact_updates && !done; ++outer) {
    // Inner equilibrium is held tighter than the reported tolerance so that a
    // multiplier update always forces a fresh solve until the gap closes.
    const InnerResult in = inner_solve(sys, fz, q, qref, cfg, 0.1 * cfg.moment_tolerance, sink);
    q = in.q;
    total_iterations += in.iterations;
    residual = in.residual;
    if (!in.converged && in.residual > cfg.moment_tolerance) break;
    const auto p = bead_positions(sys, q);
    const auto forces = contact_forces(p);
    double pen = 0.0;
    for (std::size_t c = 0; c < fz.pairs.size(); ++c) {
      const Body& body = sys.bodies[fz.pairs[c].body];
      const double g = proximity(body.shape, p[fz.pairs[c].bead] - body.offset).distance - sys.bead_radius;
      pen = std::max(pen, -g);
    }
    fz.lambda = forces;
    refresh_lagged(p, forces);
    // Multipliers alone close the gap slowly against a stiff chain.
    if (pen > cfg.penetration_tolerance && pen > 0.25 * last_pen) fz.kc = std::min(10.0 * fz.kc, 1e3 * cfg.contact_stiffness);
    last_pen = pen;
    if (pen <= cfg.penetration_tolerance) {
      const Evaluation ev = evaluate(sys, fz, q, false);
      if (classify(sys, q, qref, ev.grad).max_residual <= cfg.moment_tolerance) {
        done = true;
        break;
      }
    }
  }

  const Evaluation ev = evaluate(sys, fz, q, false);
  const Classification cl = classify(sys, q, qref, ev.grad);
  res.state.q = q;
  res.state.lambda = fz.lambda;
  res.positions = ev.p;
  res.max_penetration = ev.max_penetration;
  res.iterations = total_iterations;
  res.dof_residual = cl.residual;
  res.max_residual = cl.max_residual;
  res.dof_moment.resize(sys.dofs.size());
  for (std::size_t d = 0; d < sys.dofs.size(); ++d) res.dof_moment[d] = -ev.grad[static_cast<Eigen::Index>(d)];

  res.body_force.assign(sys.bodies.size(), Vec2::Zero());
  res.bead_in_contact.assign(sys.n_beads, false);
  for (std::size_t c = 0; c < fz.pairs.size(); ++c) {
    const auto& pr = fz.pairs[c];
    const Body& body = sys.bodies[pr.body];
    const Proximity px = proximity(body.shape, ev.p[pr.bead] - body.offset);
    const double g = px.distance - sys.bead_radius;
    const double fn = std::max(0.0, fz.lambda[c] - fz.kc * g);
    if (fn <= 0.0) continue;
    res.bead_in_contact[pr.bead] = true;
    Vec2 on_bead = fn * px.normal;
    if (body.friction > 0.0 && fz.normal_force[c] > 0.0) {
      const Vec2& t = fz.tangent[c];
      const double u = t.dot(ev.p[pr.bead] - fz.ref_positions[pr.bead] - fz.body_shift[pr.body]);
      on_bead -= body.friction * fz.normal_force[c] * slip_force(u, fz.slip_eps) * t;
    }
    res.body_force[pr.body] -= on_bead;
  }

  if (!done) {
    if (residual <= cfg.moment_tolerance && res.max_penetration > cfg.penetration_tolerance * 10.0)
      throw Infeasible("contact constraints cannot be satisfied (penetration " +
                       std::to_string(res.max_penetration) + " mm)");
    throw NonConvergence("quasi-static increment did not converge", std::max(residual, res.max_residual));
  }
  return res;
}

}  // namespace jamcord

#pragma once

// Rigid planar obstacles a bead may not penetrate, with signed distance,
// outward normal and distance Hessian.

#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "jamcord/errors.hpp"

namespace jamcord {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Free side is where (p - point) . normal >= 0.
struct HalfPlane {
  Vec2 point = Vec2::Zero();
  Vec2 normal = Vec2::UnitY();
};

struct Disk {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
};

/// Counter-clockwise vertices; the interior is the obstacle.
struct ConvexPolygon {
  std::vector<Vec2> vertices;
};

using Obstacle = std::variant<HalfPlane, Disk, ConvexPolygon>;

struct Proximity {
  double distance;  // signed, positive outside
  Vec2 normal;      // gradient of distance
  Mat2 hessian;     // of distance
};

namespace detail {

inline Proximity point_proximity(const Vec2& p, const Vec2& q) {
  const Vec2 d = p - q;
  const double r = d.norm();
  if (r < 1e-15) return {0.0, Vec2::UnitY(), Mat2::Zero()};
  const Vec2 n = d / r;
  return {r, n, (Mat2::Identity() - n * n.transpose()) / r};
}

inline Proximity proximity_impl(const HalfPlane& h, const Vec2& p) {
  return {h.normal.dot(p - h.point), h.normal, Mat2::Zero()};
}

inline Proximity proximity_impl(const Disk& c, const Vec2& p) {
  auto pr = point_proximity(p, c.center);
  pr.distance -= c.radius;
  return pr;
}

inline Proximity proximity_impl(const ConvexPolygon& poly, const Vec2& p) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  double max_edge = -std::numeric_limits<double>::infinity();
  std::size_t max_i = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = v[(i + 1) % n] - v[i];
    const Vec2 nrm = Vec2(e.y(), -e.x()).normalized();
    const double d = nrm.dot(p - v[i]);
    if (d > max_edge) {
      max_edge = d;
      max_i = i;
    }
  }
  if (max_edge <= 0.0) {
    const Vec2 e = v[(max_i + 1) % n] - v[max_i];
    return {max_edge, Vec2(e.y(), -e.x()).normalized(), Mat2::Zero()};
  }
  Proximity best{std::numeric_limits<double>::infinity(), Vec2::UnitY(), Mat2::Zero()};
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v[i];
    const Vec2 e = v[(i + 1) % n] - a;
    const double t = e.dot(p - a) / e.squaredNorm();
    Proximity cand;
    if (t <= 0.0) {
      cand = point_proximity(p, a);
    } else if (t >= 1.0) {
      cand = point_proximity(p, v[(i + 1) % n]);
    } else {
      const Vec2 nrm = Vec2(e.y(), -e.x()).normalized();
      const double d = nrm.dot(p - a);
      cand = {std::abs(d), d < 0.0 ? Vec2(-nrm) : nrm, Mat2::Zero()};
    }
    if (cand.distance < best.distance) best = cand;
  }
  return best;
}

}  // namespace detail

inline Proximity proximity(const Obstacle& o, const Vec2& p) {
  return std::visit([&](const auto& shape) { return detail::proximity_impl(shape, p); }, o);
}

inline Obstacle translated(const Obstacle& o, const Vec2& offset) {
  return std::visit(
      [&](const auto& shape) -> Obstacle {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, HalfPlane>) {
          return HalfPlane{shape.point + offset, shape.normal};
        } else if constexpr (std::is_same_v<T, Disk>) {
          return Disk{shape.center + offset, shape.radius};
        } else {
          ConvexPolygon moved = shape;
          for (auto& v : moved.vertices) v += offset;
          return moved;
        }
      },
      o);
}

/// Throws InvalidInput when the obstacle is degenerate.
inline void check_obstacle(const Obstacle& o) {
  std::visit(
      [](const auto& shape) {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, HalfPlane>) {
          if (std::abs(shape.normal.norm() - 1.0) > 1e-9)
            throw InvalidInput("half-plane normal must be unit length");
        } else if constexpr (std::is_same_v<T, Disk>) {
          if (!(shape.radius > 0.0)) throw InvalidInput("disk radius must be > 0");
        } else {
          const auto& v = shape.vertices;
          if (v.size() < 3) throw InvalidInput("polygon needs at least 3 vertices");
          for (std::size_t i = 0; i < v.size(); ++i) {
            const Vec2 a = v[(i + 1) % v.size()] - v[i];
            const Vec2 b = v[(i + 2) % v.size()] - v[(i + 1) % v.size()];
            if (a.x() * b.y() - a.y() * b.x() <= 0.0)
              throw InvalidInput("polygon must be convex and counter-clockwise");
          }
        }
      },
      o);
}

}  // namespace jamcord

#pragma once

// Cylindrical/Cartesian charts, the two-formula region split of the map,
// the Jacobian case split, and the square-torus family
// T_c = { |r - 1| + |z| = c }.

#include "fdlab/core.hpp"

#include <utility>

namespace fdlab {

enum class Region { Square, Cut };

enum class JacobianCase { Inner, Cone, Outer };

inline const char* to_string(Region region) {
  return region == Region::Cut ? "CUT" : "SQUARE";
}

inline const char* to_string(JacobianCase jc) {
  switch (jc) {
    case JacobianCase::Inner: return "INNER";
    case JacobianCase::Cone: return "CONE";
    case JacobianCase::Outer: return "OUTER";
  }
  return "UNKNOWN";
}

inline CartPoint cyl_to_cart(const CylPoint& p) {
  return {p.r * std::cos(p.theta), p.r * std::sin(p.theta), p.z};
}

inline CylPoint cart_to_cyl(const CartPoint& p) {
  const double r = std::hypot(p.x, p.y);
  if (r == 0.0) return {0.0, 0.0, p.z};
  double theta = std::atan2(p.y, p.x);
  // atan2(-0.0, x < 0) returns -pi; the branch is (-pi, pi].
  if (theta <= -pi) theta = pi;
  return {r, theta, p.z};
}

/// Level c of the square torus through p.
inline double torus_level(const CylPoint& p) { return std::abs(p.r - 1.0) + std::abs(p.z); }

/// CUT iff r <= 1 and r < |z|; the interface r = |z| belongs to SQUARE.
inline Region classify_region(const CylPoint& p) {
  return (p.r <= 1.0 && p.r < std::abs(p.z)) ? Region::Cut : Region::Square;
}

/// First match in the order INNER (|z| <= r <= 1), CONE (r <= min(1, |z|)),
/// OUTER (r >= 1).
inline JacobianCase classify_jacobian_case(const CylPoint& p) {
  const double az = std::abs(p.z);
  if (az <= p.r && p.r <= 1.0) return JacobianCase::Inner;
  if (p.r <= 1.0 && p.r <= az) return JacobianCase::Cone;
  return JacobianCase::Outer;
}

/// Point of the cross-section {|r - 1| + |z| = c} in the half-plane of angle
/// theta. The full square is traversed counterclockwise in the (r - 1, z)
/// chart with four equal sides, s = 0 at the outer corner (1 + c, 0); for
/// c > 1 the part with r < 0 is clipped onto the axis segment
/// |z| <= c - 1.
inline CylPoint slice_param(double c, double theta, double s) {
  if (c < 0.0) throw Error(ErrorCode::OutOfRange, "slice_param: level must be >= 0");
  double u = s - std::floor(s);  // [0, 1)
  const double side = std::floor(u * 4.0);
  const double f = u * 4.0 - side;
  double dr = 0.0;
  double dz = 0.0;
  switch (static_cast<int>(side)) {
    case 0: dr = c * (1.0 - f); dz = c * f; break;     // outer -> top
    case 1: dr = -c * f; dz = c * (1.0 - f); break;    // top -> inner
    case 2: dr = -c * (1.0 - f); dz = -c * f; break;   // inner -> bottom
    default: dr = c * f; dz = -c * (1.0 - f); break;   // bottom -> outer
  }
  const double r = std::max(1.0 + dr, 0.0);
  return CylPoint::make(r, theta, dz);
}

/// Parameter values where the square of level c > 1 meets the axis:
/// {top clip, bottom clip}. For c = 1 both equal 1/2.
inline std::pair<double, double> slice_clip_params(double c) {
  if (c < 1.0) throw Error(ErrorCode::OutOfRange, "slice_clip_params: level must be >= 1");
  return {0.25 + 0.25 / c, 0.75 - 0.25 / c};
}

}  // namespace fdlab

#pragma once

// The monotone map h : R^3 -> R^3 with figure-eight fibers.
//
// Domain points are cylindrical (r, theta, z), image points Cartesian. The
// square tori T_c are collapsed slice by slice: on {|r-1| + |z| <= 1} and
// wherever r >= min(1, |z|) the "square" formula applies, on the cone-shaped
// cut {r <= 1, r < |z|} the "cut" formula applies. The two agree on r = |z|.
//
// Differentials are reported in the frame [d_r h | r^-1 d_theta h | d_z h],
// i.e. against the orthonormal cylindrical basis of the domain, so its
// determinant is the Cartesian Jacobian and its spectral norm is |Dh|.

#include "fdlab/coords.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fdlab {

namespace detail {

inline CartPoint eval_square_formula(double r, double theta, double z) {
  const double a = std::abs(theta) / pi;
  const double c = std::abs(r - 1.0) + std::abs(z);
  const double u = r - 1.0 + std::abs(r - 1.0) + std::abs(z);
  const double g = (pi - std::abs(theta)) * theta / (pi * pi);
  return {a * u - c, a * z, g * u};
}

inline CartPoint eval_cut_formula(double r, double theta, double z) {
  const double a = std::abs(theta) / pi;
  const double s = std::abs(z) - r + 1.0;
  const double g = (pi - std::abs(theta)) * theta / (pi * pi);
  return {(a * r - 1.0) * s, a * r * s * sgn(z), g * r * s};
}

// Columns are d_r, d_theta, d_z of (h_x, h_y, h_z); sgn(0) = 0 on the strata.
inline Mat3 square_partials(double r, double theta, double z) {
  const double a = std::abs(theta) / pi;
  const double u = r - 1.0 + std::abs(r - 1.0) + std::abs(z);
  const double g = (pi - std::abs(theta)) * theta / (pi * pi);
  const double sr = sgn(r - 1.0);
  const double st = sgn(theta);
  const double sz = sgn(z);
  const double gt = (pi - 2.0 * std::abs(theta)) / (pi * pi);
  Mat3 d;
  d << a + (a - 1.0) * sr, st / pi * u, (a - 1.0) * sz,
       0.0,                st / pi * z, a,
       g * (sr + 1.0),     gt * u,      g * sz;
  return d;
}

inline Mat3 cut_partials(double r, double theta, double z) {
  const double a = std::abs(theta) / pi;
  const double s = std::abs(z) - r + 1.0;
  const double w = std::abs(z) - 2.0 * r + 1.0;
  const double g = (pi - std::abs(theta)) * theta / (pi * pi);
  const double st = sgn(theta);
  const double sz = sgn(z);
  const double gt = (pi - 2.0 * std::abs(theta)) / (pi * pi);
  Mat3 d;
  d << a * w + 1.0,  st / pi * r * s,      (a * r - 1.0) * sz,
       a * w * sz,   st / pi * r * s * sz, a * r,
       g * w,        gt * r * s,           g * r * sz;
  return d;
}

// Frame matrix with the r^-1 on the theta column applied analytically, so
// the cut formula stays finite on the axis.
inline Mat3 frame_ae(double r, double theta, double z) {
  if (r <= 1.0 && r < std::abs(z)) {
    const double a = std::abs(theta) / pi;
    const double s = std::abs(z) - r + 1.0;
    const double w = std::abs(z) - 2.0 * r + 1.0;
    const double g = (pi - std::abs(theta)) * theta / (pi * pi);
    const double st = sgn(theta);
    const double sz = sgn(z);
    const double gt = (pi - 2.0 * std::abs(theta)) / (pi * pi);
    Mat3 m;
    m << a * w + 1.0, st / pi * s,      (a * r - 1.0) * sz,
         a * w * sz,  st / pi * s * sz, a * r,
         g * w,       gt * s,           g * r * sz;
    return m;
  }
  Mat3 m = square_partials(r, theta, z);
  m.col(1) = r > 0.0 ? Vec3(m.col(1) / r) : Vec3::Zero();
  return m;
}

inline double jacobian_closed_form(double r, double theta, double z) {
  const double at = std::abs(theta);
  const double az = std::abs(z);
  const double pi3 = pi * pi * pi;
  switch (classify_jacobian_case({r, theta, z})) {
    case JacobianCase::Inner:
      return r > 0.0 ? az / r * at * at / pi3 : 0.0;
    case JacobianCase::Cone: {
      const double s = 1.0 + az - r;
      return s * s * at * at / pi3;
    }
    case JacobianCase::Outer:
      return at / (pi3 * pi * r) *
             ((4.0 * at * at - 4.0 * pi * at + 2.0 * pi * pi) * (r - 1.0) +
              (2.0 * at * at - 3.0 * pi * at + 2.0 * pi * pi) * az);
  }
  return 0.0;
}

// Orthonormal cylindrical basis at angle theta, as columns (e_r, e_theta, e_z).
inline Mat3 cylindrical_basis(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat3 b;
  b << c, -s, 0.0,
       s,  c, 0.0,
       0.0, 0.0, 1.0;
  return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Singular strata

/// Exact distances to the strata where h fails to be C^1, and to the set
/// where J_h vanishes.
struct SingularLocus {
  static double to_half_plane_theta0(const CylPoint& p) {
    return std::abs(p.theta) <= pi / 2 ? p.r * std::abs(std::sin(p.theta)) : p.r;
  }
  static double to_half_plane_theta_pi(const CylPoint& p) {
    return std::abs(p.theta) >= pi / 2 ? p.r * std::abs(std::sin(p.theta)) : p.r;
  }
  static double to_plane_z0(const CylPoint& p) { return std::abs(p.z); }
  static double to_cylinder(const CylPoint& p) { return std::abs(p.r - 1.0); }
  /// Cone {r = |z|, r <= 1}: distance in the meridian half-plane to the
  /// segment from (0, 0) to (1, 1).
  static double to_cone(const CylPoint& p) {
    const double az = std::abs(p.z);
    const double t = std::clamp((p.r + az) / 2.0, 0.0, 1.0);
    return std::hypot(p.r - t, az - t);
  }
  static double to_axis(const CylPoint& p) { return p.r; }
  static double to_disk(const CylPoint& p) {
    return p.r <= 1.0 ? std::abs(p.z) : std::hypot(p.r - 1.0, p.z);
  }

  /// Distance to every non-smooth stratum, including the half-plane
  /// theta = pi where |theta| has its branch kink.
  static double smooth_margin(const CylPoint& p) {
    return std::min({to_half_plane_theta0(p), to_half_plane_theta_pi(p), to_plane_z0(p),
                     to_cylinder(p), to_cone(p), to_axis(p)});
  }

  /// As smooth_margin, but the theta = pi half-plane is excluded: the
  /// closed-form partials there are the one-sided ones of the
  /// theta in (-pi, pi] branch.
  static double frame_margin(const CylPoint& p) {
    return std::min({to_half_plane_theta0(p), to_plane_z0(p), to_cylinder(p), to_cone(p),
                     to_axis(p)});
  }

  /// Distance to {theta = 0} union {z = 0, r <= 1}, where J_h = 0.
  static double degeneracy_margin(const CylPoint& p) {
    return std::min(to_half_plane_theta0(p), to_disk(p));
  }
};

// ---------------------------------------------------------------------------
// Evaluation and differentials

inline CartPoint eval(const CylPoint& p) {
  return classify_region(p) == Region::Cut ? detail::eval_cut_formula(p.r, p.theta, p.z)
                                           : detail::eval_square_formula(p.r, p.theta, p.z);
}

inline CartPoint eval_cart(const CartPoint& x) { return eval(cart_to_cyl(x)); }

/// Partial derivatives d(h_x, h_y, h_z)/d(r, theta, z) of the formula piece
/// containing p (no r^-1 scaling).
inline Mat3 coordinate_partials(const CylPoint& p) {
  return classify_region(p) == Region::Cut ? detail::cut_partials(p.r, p.theta, p.z)
                                           : detail::square_partials(p.r, p.theta, p.z);
}

inline constexpr double default_smooth_margin = 1e-3;

/// Frame differential [d_r h | r^-1 d_theta h | d_z h]. Throws
/// SINGULAR_POINT within `margin` of a non-smooth stratum.
inline Mat3 frame_differential(const CylPoint& p, double margin = default_smooth_margin) {
  if (SingularLocus::frame_margin(p) <= margin)
    throw Error(ErrorCode::SingularPoint, "frame_differential: point within margin of a non-smooth stratum");
  return detail::frame_ae(p.r, p.theta, p.z);
}

/// Same matrix without the margin check, valid almost everywhere. Used by
/// the integrators, which sample strata with probability zero.
inline Mat3 frame_differential_ae(const CylPoint& p) { return detail::frame_ae(p.r, p.theta, p.z); }

/// Cartesian differential D h (image x domain Cartesian), almost everywhere.
inline Mat3 cartesian_differential_ae(const CylPoint& p) {
  return detail::frame_ae(p.r, p.theta, p.z) * detail::cylindrical_basis(p.theta).transpose();
}

/// Closed-form Cartesian Jacobian; exactly 0 on {theta = 0} and on the disk
/// {z = 0, r <= 1}.
inline double jacobian(const CylPoint& p) { return detail::jacobian_closed_form(p.r, p.theta, p.z); }

/// K = |M|^3 / J with |.| the spectral norm.
inline double distortion(const CylPoint& p, double margin = default_smooth_margin) {
  const double j = jacobian(p);
  if (!(j > 0.0)) throw Error(ErrorCode::DegenerateJacobian, "distortion: J_h = 0");
  const double n = spectral_norm(frame_differential(p, margin));
  return n * n * n / j;
}

/// Central-difference differential of eval in the Cartesian directions,
/// assembled in the same frame as frame_differential. Independent of the
/// closed-form partials.
inline Mat3 fd_differential(const CylPoint& p, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::OutOfRange, "fd_differential: step must be positive");
  if (SingularLocus::smooth_margin(p) <= step)
    throw Error(ErrorCode::SingularPoint, "fd_differential: stencil crosses a non-smooth stratum");
  const Vec3 x0 = cyl_to_cart(p).vec();
  Mat3 dcart;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e(j) = step;
    const Vec3 fp = eval_cart(CartPoint::from(x0 + e)).vec();
    const Vec3 fm = eval_cart(CartPoint::from(x0 - e)).vec();
    dcart.col(j) = (fp - fm) / (2.0 * step);
  }
  return dcart * detail::cylindrical_basis(p.theta);
}

struct MapJet {
  CartPoint value;
  Mat3 frame;
  double jac = 0.0;
  double dist = 0.0;
};

inline MapJet jet(const CylPoint& p, double margin = default_smooth_margin) {
  MapJet out;
  out.value = eval(p);
  out.frame = frame_differential(p, margin);
  out.jac = jacobian(p);
  out.dist = distortion(p, margin);
  return out;
}

/// Adapter exposing h through the Cartesian map interface used by the
/// quadrature routines.
struct BingMap {
  CartPoint value(const CartPoint& x) const { return eval_cart(x); }
  Mat3 differential(const CartPoint& x) const { return cartesian_differential_ae(cart_to_cyl(x)); }
  double jacobian(const CartPoint& x) const { return fdlab::jacobian(cart_to_cyl(x)); }
};

struct IdentityMap {
  CartPoint value(const CartPoint& x) const { return x; }
  Mat3 differential(const CartPoint&) const { return Mat3::Identity(); }
  double jacobian(const CartPoint&) const { return 1.0; }
};

/// (x, y, z) -> (x^2, y, z): two-to-one, used as a non-monotone control.
struct FoldMap {
  CartPoint value(const CartPoint& x) const { return {x.x * x.x, x.y, x.z}; }
  Mat3 differential(const CartPoint& x) const {
    Mat3 d = Mat3::Identity();
    d(0, 0) = 2.0 * x.x;
    return d;
  }
  double jacobian(const CartPoint& x) const { return 2.0 * x.x; }
};

/// Bounding box of h over a Cartesian box from an m^3 grid.
inline Box image_bounding_box(const Box& box, int m = 17) {
  Box out{Vec3::Constant(std::numeric_limits<double>::infinity()), Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l) {
        const Vec3 t(i, j, l);
        const Vec3 x = box.lo + (box.hi - box.lo).cwiseProduct(t / (m - 1));
        const Vec3 v = eval_cart(CartPoint::from(x)).vec();
        out.lo = out.lo.cwiseMin(v);
        out.hi = out.hi.cwiseMax(v);
      }
  return out;
}

/// Bounding box of h over a cylindrical box from an m^3 parameter grid.
inline Box image_bounding_box(const CylBox& box, int m = 17) {
  Box out{Vec3::Constant(std::numeric_limits<double>::infinity()), Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l) {
        const double r = box.r0 + (box.r1 - box.r0) * i / (m - 1);
        const double t = box.theta0 + (box.theta1 - box.theta0) * j / (m - 1);
        const double z = box.z0 + (box.z1 - box.z0) * l / (m - 1);
        const Vec3 v = eval(CylPoint::make(r, t, z)).vec();
        out.lo = out.lo.cwiseMin(v);
        out.hi = out.hi.cwiseMax(v);
      }
  return out;
}

// ---------------------------------------------------------------------------
// Inversion

struct InvertOptions {
  double tol = 1e-12;
  int max_newton_iterations = 80;
  int restarts = 8;
  std::uint64_t seed = 0;
};

namespace detail {

struct NewtonResult {
  CylPoint point;
  double residual = 0.0;
};

inline double residual_norm(const CylPoint& u, const Vec3& target) {
  return (eval(u).vec() - target).norm();
}

// Damped semismooth Newton in (r, theta, z) using the partials of the piece
// containing the current iterate.
inline NewtonResult newton_invert(CylPoint u, const Vec3& target, double stop_tol, int max_iter) {
  double res = residual_norm(u, target);
  for (int it = 0; it < max_iter && res > stop_tol; ++it) {
    const Vec3 f = eval(u).vec() - target;
    const Mat3 d = coordinate_partials(u);
    const Eigen::FullPivLU<Mat3> lu(d);
    Vec3 step;
    if (lu.isInvertible()) {
      step = -lu.solve(f);
    } else {
      // Degenerate piece (theta = 0 or z = 0 exactly): gradient step.
      step = -d.transpose() * f;
      if (step.norm() == 0.0) step = Vec3(0.0, 1e-6, 1e-6);
    }
    double lambda = 1.0;
    CylPoint trial;
    double trial_res = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      trial = CylPoint::make(u.r + lambda * step(0), u.theta + lambda * step(1), u.z + lambda * step(2));
      trial_res = residual_norm(trial, target);
      if (trial_res < res * (1.0 - 1e-4 * lambda)) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
    u = trial;
    res = trial_res;
  }
  return {u, res};
}

// Closed-form preimage candidates, one per piece. With a = |theta|/pi the
// sign of theta is the sign of y_z; on INNER and CUT 1 - a = |y_z|/|y_y|,
// on OUTER a solves 2x a^2 + (2|y_z| - 2x + |y_y|) a - (|y_z| + |y_y|) = 0.
inline std::vector<CylPoint> closed_form_candidates(const CartPoint& y) {
  std::vector<CylPoint> out;
  const double X = y.x, Y = std::abs(y.y), Z = std::abs(y.z);
  const double sign_theta = y.z < 0.0 ? -1.0 : 1.0;
  auto push = [&](double r, double a, double z) {
    if (!(r >= 0.0) || !std::isfinite(r) || !std::isfinite(z) || !(a > 0.0) || a > 1.0) return;
    out.push_back(CylPoint::make(r, sign_theta * a * pi, z));
  };
  if (Y > 0.0 && Z < Y) {
    const double a = 1.0 - Z / Y;
    {
      const double z = y.y / a;
      const double c = a * std::abs(z) - X;
      push(1.0 + std::abs(z) - c, a, z);
    }
    const double s = Y - X;
    if (s > 0.0) {
      const double r = Y / (a * s);
      push(r, a, sgn(y.y) * (s + r - 1.0));
    }
  }
  if (Z == 0.0) push(1.0 + X, 1.0, y.y);
  const double qa = 2.0 * X, qb = 2.0 * Z - 2.0 * X + Y, qc = -(Z + Y);
  std::vector<double> roots;
  if (qa == 0.0) {
    if (qb != 0.0) roots.push_back(-qc / qb);
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
      if (q != 0.0) roots.push_back(q / qa);
      if (q != 0.0) roots.push_back(qc / q);
    }
  }
  for (double a : roots) {
    if (!(a > 0.0 && a < 1.0)) continue;
    const double u = Z / (a * (1.0 - a));
    const double c = a * u - X;
    push(1.0 + u - c, a, y.y / a);
  }
  return out;
}

}  // namespace detail

/// True when y lies on the half-line {-t e_x : t >= 0}, the image of the
/// non-injectivity set.
inline bool on_noninjective_image(const CartPoint& y) { return y.y == 0.0 && y.z == 0.0 && y.x <= 0.0; }

/// Unique preimage of y off the half-line {-t e_x}. Seeds come from a coarse
/// scan of the region allowed by |h| >= c/4; up to `restarts` perturbed
/// seeds are tried before INVERSION_FAILED.
inline CylPoint invert(const CartPoint& y, const InvertOptions& opt = {}) {
  if (on_noninjective_image(y))
    throw Error(ErrorCode::OnNonInjectiveSet, "invert: target lies on the half-line {-t e_x}");
  const Vec3 target = y.vec();
  const double stop_tol = opt.tol * 1e-3;
  {
    detail::NewtonResult best{{}, std::numeric_limits<double>::infinity()};
    for (const auto& cand : detail::closed_form_candidates(y)) {
      const auto result = detail::newton_invert(cand, target, stop_tol, 8);
      if (result.residual < best.residual) best = result;
    }
    if (best.residual < opt.tol) return best.point;
  }
  const double cmax = 4.0 * y.norm() + 0.1;
  const double rmax = 1.0 + cmax;

  constexpr int nr = 12, nt = 32, nz = 16;
  struct Seed {
    double res;
    CylPoint p;
  };
  std::vector<Seed> seeds;
  seeds.reserve(nr * nt * nz);
  for (int i = 0; i < nr; ++i) {
    const double r = rmax * (i + 0.5) / nr;
    for (int j = 0; j < nt; ++j) {
      const double theta = -pi + 2.0 * pi * (j + 0.5) / nt;
      for (int k = 0; k < nz; ++k) {
        const double z = -cmax + 2.0 * cmax * (k + 0.5) / nz;
        const CylPoint p{r, theta, z};
        seeds.push_back({detail::residual_norm(p, target), p});
      }
    }
  }
  const std::size_t keep = std::min<std::size_t>(seeds.size(), static_cast<std::size_t>(opt.restarts) + 1);
  std::partial_sort(seeds.begin(), seeds.begin() + keep, seeds.end(),
                    [](const Seed& a, const Seed& b) { return a.res < b.res; });

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  const double hr = rmax / nr, ht = 2.0 * pi / nt, hz = 2.0 * cmax / nz;

  detail::NewtonResult best{seeds.front().p, seeds.front().res};
  for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
    CylPoint start = seeds[static_cast<std::size_t>(attempt) % keep].p;
    if (attempt > 0) {
      start = CylPoint::make(std::abs(start.r + hr * jitter(rng)), start.theta + ht * jitter(rng),
                             start.z + hz * jitter(rng));
    }
    const auto result = detail::newton_invert(start, target, stop_tol, opt.max_newton_iterations);
    if (result.residual < best.residual) best = result;
    if (best.residual < opt.tol) return best.point;
  }
  throw Error(ErrorCode::InversionFailed,
              "invert: residual " + std::to_string(best.residual) + " above tolerance");
}

// ---------------------------------------------------------------------------
// Fibers

enum class FiberKind { Point, Circle, FigureEight, Arc };

inline const char* to_string(FiberKind kind) {
  switch (kind) {
    case FiberKind::Point: return "POINT";
    case FiberKind::Circle: return "CIRCLE";
    case FiberKind::FigureEight: return "FIGURE_EIGHT";
    case FiberKind::Arc: return "ARC";
  }
  return "UNKNOWN";
}

/// Closed-form curve [0, 1] -> domain.
struct FiberCurve {
  std::string description;
  std::function<CylPoint(double)> at;
};

struct Fiber {
  FiberKind kind = FiberKind::Point;
  std::vector<FiberCurve> components;
  std::optional<CartPoint> wedge;
  CartPoint target;
};

namespace detail {

inline FiberCurve horizontal_circle(double radius) {
  return {"circle {r=" + std::to_string(radius) + ", z=0}", [radius](double s) {
            return CylPoint::make(radius, -pi + 2.0 * pi * s, 0.0);
          }};
}

inline FiberCurve theta0_square(double level) {
  return {"slice {theta=0, |r-1|+|z|=" + std::to_string(level) + "}",
          [level](double s) { return slice_param(level, 0.0, s); }};
}

// Visible part of the theta = 0 slice of level c > 1, from the top axis
// point through the outer corner to the bottom axis point. Endpoints are
// returned exactly.
inline FiberCurve theta0_arc(double level) {
  const auto [top, bottom] = slice_clip_params(level);
  const double span = top + 1.0 - bottom;
  return {"arc {theta=0, |r-1|+|z|=" + std::to_string(level) + ", r>=0}",
          [level, top, span](double s) {
            if (s <= 0.0) return CylPoint{0.0, 0.0, level - 1.0};
            if (s >= 1.0) return CylPoint{0.0, 0.0, -(level - 1.0)};
            return slice_param(level, 0.0, top - s * span);
          }};
}

}  // namespace detail

/// Classified preimage h^-1{y}.
inline Fiber fiber(const CartPoint& y, const InvertOptions& opt = {}) {
  Fiber out;
  out.target = y;
  if (on_noninjective_image(y)) {
    const double t = -y.x;
    if (t == 0.0) {
      out.kind = FiberKind::Circle;
      out.components.push_back(detail::horizontal_circle(1.0));
    } else if (t < 1.0) {
      out.kind = FiberKind::FigureEight;
      out.components.push_back(detail::horizontal_circle(1.0 - t));
      out.components.push_back(detail::theta0_square(t));
      out.wedge = CartPoint{1.0 - t, 0.0, 0.0};
    } else if (t == 1.0) {
      out.kind = FiberKind::Circle;
      out.components.push_back(detail::theta0_square(1.0));
    } else {
      out.kind = FiberKind::Arc;
      out.components.push_back(detail::theta0_arc(t));
    }
    return out;
  }
  const CylPoint x = invert(y, opt);
  out.kind = FiberKind::Point;
  out.components.push_back({"point", [x](double) { return x; }});
  return out;
}

}  // namespace fdlab

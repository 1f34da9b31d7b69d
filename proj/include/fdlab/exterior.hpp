#pragma once

// Exterior algebra of R^3 and Monte Carlo checks of the pullback norm
// estimate and of the weak commutation d f^* = f^* d.
//
// Basis of Lambda^k is lexicographic: (1), (dx, dy, dz),
// (dx^dy, dx^dz, dy^dz), (dx^dy^dz). Internally a basis element is the
// bitmask of its indices (dx = 1, dy = 2, dz = 4).

#include "fdlab/bingmap.hpp"
#include "fdlab/montecarlo.hpp"

#include <array>
#include <bit>
#include <functional>
#include <limits>
#include <optional>

namespace fdlab {

using Coeffs = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

template <typename Scalar>
using WedgeMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

inline int basis_size(int k) {
  if (k < 0 || k > 3) throw Error(ErrorCode::OutOfRange, "degree must be in 0..3");
  return (k == 0 || k == 3) ? 1 : 3;
}

inline const std::array<unsigned, 3>& basis_masks(int k) {
  static const std::array<std::array<unsigned, 3>, 4> masks{{{0u, 0u, 0u}, {1u, 2u, 4u}, {3u, 5u, 6u}, {7u, 0u, 0u}}};
  basis_size(k);
  return masks[static_cast<std::size_t>(k)];
}

namespace detail {

inline int mask_index(unsigned mask) {
  const auto& m = basis_masks(std::popcount(mask));
  for (int i = 0; i < 3; ++i)
    if (m[static_cast<std::size_t>(i)] == mask) return i;
  return 0;
}

// Sign of dx_A ^ dx_B relative to dx_{A|B}; 0 if A and B overlap.
inline int wedge_sign(unsigned a, unsigned b) {
  if (a & b) return 0;
  int swaps = 0;
  for (unsigned i = 0; i < 3; ++i)
    if (a & (1u << i))
      for (unsigned j = 0; j < i; ++j)
        if (b & (1u << j)) ++swaps;
  return swaps % 2 ? -1 : 1;
}

}  // namespace detail

/// Pointwise value of a k-form.
struct KCovector {
  int k = 0;
  Coeffs coeffs = Coeffs::Zero(1);

  KCovector() = default;
  KCovector(int degree, const Coeffs& c) : k(degree), coeffs(c) {
    if (c.size() != basis_size(degree)) throw Error(ErrorCode::OutOfRange, "coefficient length does not match degree");
  }

  static KCovector zero(int degree) { return {degree, Coeffs::Zero(basis_size(degree))}; }
  static KCovector scalar(double v) { return {0, Coeffs::Constant(1, v)}; }
  static KCovector basis(int degree, int index) {
    KCovector out = zero(degree);
    out.coeffs(index) = 1.0;
    return out;
  }

  double norm() const { return coeffs.norm(); }
};

/// Induced linear map on Lambda^k: entry (I, J) is the minor A[I, J].
template <typename Scalar>
WedgeMatrix<Scalar> wedge_power(const Eigen::Matrix<Scalar, 3, 3>& a, int k) {
  const int n = basis_size(k);
  WedgeMatrix<Scalar> out(n, n);
  if (k == 0) {
    out(0, 0) = Scalar(1);
  } else if (k == 1) {
    out = a;
  } else if (k == 3) {
    out(0, 0) = a.determinant();
  } else {
    static constexpr int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const int r0 = pairs[i][0], r1 = pairs[i][1], c0 = pairs[j][0], c1 = pairs[j][1];
        out(i, j) = a(r0, c0) * a(r1, c1) - a(r0, c1) * a(r1, c0);
      }
    }
  }
  return out;
}

inline KCovector hodge_star(const KCovector& v) {
  KCovector out = KCovector::zero(3 - v.k);
  const auto& masks = basis_masks(v.k);
  for (int i = 0; i < basis_size(v.k); ++i) {
    const unsigned m = masks[static_cast<std::size_t>(i)];
    const unsigned c = 7u & ~m;
    out.coeffs(detail::mask_index(c)) += detail::wedge_sign(m, c) * v.coeffs(i);
  }
  return out;
}

inline KCovector wedge(const KCovector& a, const KCovector& b) {
  if (a.k + b.k > 3) throw Error(ErrorCode::OutOfRange, "wedge: total degree above 3");
  KCovector out = KCovector::zero(a.k + b.k);
  const auto& ma = basis_masks(a.k);
  const auto& mb = basis_masks(b.k);
  for (int i = 0; i < basis_size(a.k); ++i) {
    for (int j = 0; j < basis_size(b.k); ++j) {
      const unsigned x = ma[static_cast<std::size_t>(i)], y = mb[static_cast<std::size_t>(j)];
      const int s = detail::wedge_sign(x, y);
      if (s != 0) out.coeffs(detail::mask_index(x | y)) += s * a.coeffs(i) * b.coeffs(j);
    }
  }
  return out;
}

/// (M^* w)(v_1, ..., v_k) = w(M v_1, ..., M v_k).
inline KCovector pullback_at(const Mat3& m, const KCovector& w) {
  return {w.k, wedge_power(m, w.k).transpose() * w.coeffs};
}

inline constexpr double singular_tolerance = 1e-14;

/// w composed with Lambda^k(M^-1).
inline KCovector pushforward_at(const Mat3& m, const KCovector& w, double tol = singular_tolerance) {
  const double det = m.determinant();
  if (!(det > tol)) throw Error(ErrorCode::SingularMatrix, "pushforward_at: det M = " + std::to_string(det));
  return pullback_at(m.inverse(), w);
}

template <typename Scalar>
Scalar wedge_operator_norm(const Eigen::Matrix<Scalar, 3, 3>& a, int k) {
  const WedgeMatrix<Scalar> w = wedge_power(a, k);
  if (w.rows() == 1) {
    using std::abs;
    return abs(w(0, 0));
  }
  return spectral_norm(Eigen::Matrix<Scalar, 3, 3>(w));
}

struct WedgeInequality {
  long double lhs = 0;
  long double rhs = 0;
  bool holds = false;
};

/// |Lambda^k A^-1| <= (det A)^-1 |A|^(3-k), evaluated in long double with a
/// relative slack of 1e-12.
inline WedgeInequality wedge_inequality(const Mat3& a, int k) {
  using LMat = Eigen::Matrix<long double, 3, 3>;
  const LMat al = a.cast<long double>();
  const long double det = al.determinant();
  if (!(det > 0)) throw Error(ErrorCode::SingularMatrix, "wedge inequality needs det A > 0");
  const long double lhs = wedge_operator_norm<long double>(LMat(al.inverse()), k);
  const long double rhs = std::pow(spectral_norm<long double>(al), static_cast<long double>(3 - k)) / det;
  return {lhs, rhs, lhs <= rhs + 1e-12L * std::max(1.0L, rhs)};
}

inline bool check_wedge_inequality(const Mat3& a, int k) { return wedge_inequality(a, k).holds; }

// ---------------------------------------------------------------------------
// Form fields

struct FormField {
  int k = 0;
  std::function<KCovector(const CartPoint&)> coeff_fn;
  /// Exact exterior derivative, when the constructor knows it.
  std::function<KCovector(const CartPoint&)> d_fn;
  std::optional<Box> support;

  KCovector operator()(const CartPoint& x) const {
    if (!coeff_fn || (support && !support->contains(x))) return KCovector::zero(k);
    return coeff_fn(x);
  }

  KCovector d(const CartPoint& x) const {
    if (k == 3) throw Error(ErrorCode::OutOfRange, "d of a 3-form");
    if (!coeff_fn || (support && !support->contains(x))) return KCovector::zero(k + 1);
    if (!d_fn) throw Error(ErrorCode::OutOfRange, "form field has no exterior derivative");
    return d_fn(x);
  }
};

inline FormField zero_form_field(int k, std::optional<Box> support = std::nullopt) {
  FormField f;
  f.k = k;
  f.support = support;
  return f;
}

inline FormField constant_form_field(const KCovector& w, std::optional<Box> support = std::nullopt) {
  FormField f;
  f.k = w.k;
  f.support = support;
  f.coeff_fn = [w](const CartPoint&) { return w; };
  if (w.k < 3) f.d_fn = [k = w.k](const CartPoint&) { return KCovector::zero(k + 1); };
  return f;
}

/// phi(u) * sum_I (alpha_I + beta_I . u) dx_I on `support`, where u in
/// [-1, 1]^3 are the normalised box coordinates and
/// phi(u) = prod_i (1 - u_i^2)^2.
inline FormField bump_form_field(int k, const Box& support, const Coeffs& alpha,
                                 const Eigen::Matrix<double, Eigen::Dynamic, 3, 0, 3, 3>& beta) {
  const int n = basis_size(k);
  if (alpha.size() != n || beta.rows() != n) throw Error(ErrorCode::OutOfRange, "bump coefficients have the wrong size");
  const Vec3 center = support.center();
  const Vec3 half = support.half();
  if (!(half.minCoeff() > 0.0)) throw Error(ErrorCode::EmptyDomain, "bump support has zero volume");

  struct Local {
    Vec3 u;
    double phi;
    Vec3 grad_phi;  // with respect to x
  };
  auto local = [center, half](const CartPoint& x) {
    Local l;
    l.u = (x.vec() - center).cwiseQuotient(half);
    Vec3 f, df;
    for (int i = 0; i < 3; ++i) {
      const double s = 1.0 - l.u(i) * l.u(i);
      f(i) = s * s;
      df(i) = -4.0 * l.u(i) * s / half(i);
    }
    l.phi = f.prod();
    l.grad_phi = Vec3(df(0) * f(1) * f(2), f(0) * df(1) * f(2), f(0) * f(1) * df(2));
    return l;
  };

  FormField field;
  field.k = k;
  field.support = support;
  field.coeff_fn = [=](const CartPoint& x) {
    const Local l = local(x);
    Coeffs c = alpha + beta * l.u;
    return KCovector(k, l.phi * c);
  };
  if (k < 3) {
    field.d_fn = [=](const CartPoint& x) {
      const Local l = local(x);
      const Coeffs c = alpha + beta * l.u;
      KCovector out = KCovector::zero(k + 1);
      const auto& masks = basis_masks(k);
      for (int i = 0; i < n; ++i) {
        const unsigned m = masks[static_cast<std::size_t>(i)];
        for (unsigned j = 0; j < 3; ++j) {
          const int s = detail::wedge_sign(1u << j, m);
          if (s == 0) continue;
          const double dj = l.grad_phi(j) * c(i) + l.phi * beta(i, j) / half(j);
          out.coeffs(detail::mask_index(m | (1u << j))) += s * dj;
        }
      }
      return out;
    };
  }
  return field;
}

// ---------------------------------------------------------------------------
// Monte Carlo norms

struct NormEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double p = 0.0;
};

inline constexpr double infinite_exponent = std::numeric_limits<double>::infinity();

inline CartPoint sample_box(Rng& rng, const Box& box) {
  return {uniform(rng, box.lo.x(), box.hi.x()), uniform(rng, box.lo.y(), box.hi.y()),
          uniform(rng, box.lo.z(), box.hi.z())};
}

/// (int_domain |field|^p)^(1/p) by uniform sampling of the box; p = infinity
/// gives the sample supremum.
inline NormEstimate mc_norm(const FormField& field, double p, const Box& domain, std::size_t n,
                            std::uint64_t seed) {
  const double vol = domain.volume();
  if (!(vol > 0.0)) throw Error(ErrorCode::EmptyDomain, "mc_norm: empty box");
  if (!(p >= 1.0)) throw Error(ErrorCode::OutOfRange, "mc_norm: p must be >= 1");
  NormEstimate out;
  out.samples = n;
  out.seed = seed;
  out.p = p;
  if (std::isinf(p)) {
    if (n < 1) throw Error(ErrorCode::InsufficientSamples, "mc_norm: no samples");
    const std::size_t batches = std::min(default_batches, n);
    std::vector<double> sup(batches, 0.0);
    parallel_for(batches, [&](std::size_t b) {
      Rng rng = make_stream(seed, b);
      const std::size_t count = n / batches + (b < n % batches ? 1 : 0);
      for (std::size_t i = 0; i < count; ++i) sup[b] = std::max(sup[b], field(sample_box(rng, domain)).norm());
    });
    out.value = *std::max_element(sup.begin(), sup.end());
    return out;
  }
  const auto bm = run_batches(n, seed, 1, [&](Rng& rng, Eigen::Ref<Eigen::VectorXd> x) {
    x(0) = vol * std::pow(field(sample_box(rng, domain)).norm(), p);
  });
  const auto est = bm.estimate([p](const Eigen::VectorXd& m) { return std::pow(m(0), 1.0 / p); });
  out.value = est.value;
  out.std_error = est.std_error;
  return out;
}

// ---------------------------------------------------------------------------
// Pullback norm estimate

/// Distance from the cylindrical box to {theta = 0} u {z = 0, r <= 1}.
inline double degeneracy_distance(const CylBox& box) {
  double tmin = 0.0;
  if (box.theta0 > 0.0) tmin = box.theta0;
  else if (box.theta1 < 0.0) tmin = -box.theta1;
  const double d_half_plane = tmin >= pi / 2 ? box.r0 : box.r0 * std::sin(tmin);
  double zmin = 0.0;
  if (box.z0 > 0.0) zmin = box.z0;
  else if (box.z1 < 0.0) zmin = -box.z1;
  const double d_disk = box.r0 <= 1.0 ? zmin : std::hypot(box.r0 - 1.0, zmin);
  return std::min(d_half_plane, d_disk);
}

inline CylPoint sample_cyl_box(Rng& rng, const CylBox& box) {
  return CylPoint::make(uniform(rng, box.r0, box.r1), uniform(rng, box.theta0, box.theta1), uniform(rng, box.z0, box.z1));
}

struct PullbackReport {
  int k = 0;
  double p = 0.0, q = 0.0, r = 0.0;
  McEstimate lhs;                // |f^* omega|_r
  McEstimate rhs;                // |omega|_p |K|_q^(1/p) |Df|_n^(k - n/p)
  double omega_norm = 0.0;       // |omega|_p over the image
  double distortion_norm = 0.0;  // |K|_q
  double differential_norm = 0.0;  // |Df|_n
  double exponent = 0.0;         // k - n/p
  double printed_exponent = 0.0;  // (qk - n)/q
  double rhs_printed_exponent = 0.0;
  double degeneracy_distance = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  bool pass = false;
};

/// Checks |f^* omega|_r <= |omega|_p |K_f|_q^(1/p) |Df|_n^(k - n/p) with
/// r = n/(k + n/(pq)) on a box away from the degeneracy set; |omega|_p is
/// computed on the image through the change of variables.
inline PullbackReport verify_pullback_estimate(const FormField& omega, double p, double q, int k,
                                               const CylBox& domain, std::size_t n, std::uint64_t seed) {
  constexpr double dim = 3.0;
  if (k < 1 || k > 3 || omega.k != k) throw Error(ErrorCode::OutOfRange, "pullback estimate: degree mismatch");
  if (!(p >= dim / k) || !std::isfinite(p)) throw Error(ErrorCode::OutOfRange, "pullback estimate: need finite p >= n/k");
  if (!(q >= 1.0 / (dim - 1.0)) || !std::isfinite(q)) throw Error(ErrorCode::OutOfRange, "pullback estimate: need finite q >= 1/(n-1)");
  if (domain.empty()) throw Error(ErrorCode::EmptyDomain, "pullback estimate: empty box");
  const double dist = degeneracy_distance(domain);
  if (!(dist > 0.0)) throw Error(ErrorCode::OutOfRange, "pullback estimate: box meets the degeneracy set");

  PullbackReport rep;
  rep.k = k;
  rep.p = p;
  rep.q = q;
  rep.r = dim / (k + dim / (p * q));
  rep.exponent = k - dim / p;
  rep.printed_exponent = (q * k - dim) / q;
  rep.degeneracy_distance = dist;
  rep.samples = n;
  rep.seed = seed;

  const double vol = domain.param_volume();
  const double r = rep.r;
  const auto bm = run_batches(n, seed, 4, [&](Rng& rng, Eigen::Ref<Eigen::VectorXd> x) {
    const CylPoint u = sample_cyl_box(rng, domain);
    const double w = u.r * vol;
    const Mat3 frame = frame_differential_ae(u);
    const Mat3 df = frame * detail::cylindrical_basis(u.theta).transpose();
    const double jac = jacobian(u);
    const double norm = spectral_norm(frame);
    const KCovector om = omega(eval(u));
    x(0) = w * std::pow(pullback_at(df, om).norm(), r);
    x(1) = w * std::pow(om.norm(), p) * jac;
    x(2) = w * std::pow(norm * norm * norm / jac, q);
    x(3) = w * norm * norm * norm;
  });
  auto rhs_with = [&](double e) {
    return [p, q, e, dim](const Eigen::VectorXd& m) {
      return std::pow(m(1), 1.0 / p) * std::pow(m(2), 1.0 / (p * q)) * std::pow(m(3), e / dim);
    };
  };
  rep.lhs = bm.estimate([r](const Eigen::VectorXd& m) { return std::pow(m(0), 1.0 / r); });
  rep.rhs = bm.estimate(rhs_with(rep.exponent));
  rep.rhs_printed_exponent = bm.estimate(rhs_with(rep.printed_exponent)).value;
  const Eigen::VectorXd m = bm.overall();
  rep.omega_norm = std::pow(m(1), 1.0 / p);
  rep.distortion_norm = std::pow(m(2), 1.0 / q);
  rep.differential_norm = std::cbrt(m(3));
  const double combined = std::hypot(rep.lhs.std_error, rep.rhs.std_error);
  rep.pass = rep.lhs.value <= rep.rhs.value + 3.0 * combined;
  return rep;
}

// ---------------------------------------------------------------------------
// Weak commutation

struct CommutationReport {
  int k = 0;
  McEstimate lhs;       // int d omega ^ f^* eta
  McEstimate rhs;       // (-1)^(k+1) int omega ^ f^* d eta
  McEstimate residual;  // lhs - rhs
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  bool pass = false;
};

/// Monte Carlo residual of
///   int d omega ^ f^* eta = (-1)^(k+1) int omega ^ f^* d eta
/// for omega of degree k supported in a box and eta of degree 2 - k.
/// `map` provides value(CartPoint) and the a.e. Cartesian differential.
template <typename Map>
CommutationReport verify_commutation(const Map& map, const FormField& omega, const FormField& eta, std::size_t n,
                                     std::uint64_t seed) {
  if (omega.k < 0 || omega.k > 2 || eta.k != 2 - omega.k)
    throw Error(ErrorCode::OutOfRange, "commutation: need deg omega = k <= 2 and deg eta = 2 - k");
  if (!omega.support || !(omega.support->volume() > 0.0))
    throw Error(ErrorCode::EmptyDomain, "commutation: omega needs a compact support box");
  const Box box = *omega.support;
  const double vol = box.volume();
  const double sign = omega.k % 2 == 0 ? -1.0 : 1.0;  // (-1)^(k+1)

  const auto bm = run_batches(n, seed, 2, [&](Rng& rng, Eigen::Ref<Eigen::VectorXd> x) {
    const CartPoint p = sample_box(rng, box);
    const CartPoint y = map.value(p);
    const Mat3 df = map.differential(p);
    const double a = wedge(omega.d(p), pullback_at(df, eta(y))).coeffs(0);
    const double b = wedge(omega(p), pullback_at(df, eta.d(y))).coeffs(0);
    x(0) = vol * a;
    x(1) = vol * sign * b;
  });
  CommutationReport rep;
  rep.k = omega.k;
  rep.samples = n;
  rep.seed = seed;
  rep.lhs = bm.component(0);
  rep.rhs = bm.component(1);
  rep.residual = bm.estimate([](const Eigen::VectorXd& m) { return m(0) - m(1); });
  rep.pass = std::abs(rep.residual.value) <= 3.0 * rep.residual.std_error;
  return rep;
}

}  // namespace fdlab

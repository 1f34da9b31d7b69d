#pragma once

// Shared vocabulary for the fdlab headers: point types, matrix aliases,
// the error type, and a deterministic parallel-for.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fdlab {

inline constexpr double pi = std::numbers::pi;

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

enum class ErrorCode {
  SingularPoint,
  DegenerateJacobian,
  InversionFailed,
  OnNonInjectiveSet,
  SingularMatrix,
  EmptyDomain,
  InsufficientSamples,
  InsufficientScales,
  GridTooCoarse,
  OutOfRange,
  DegenerateLevel,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularPoint: return "SINGULAR_POINT";
    case ErrorCode::DegenerateJacobian: return "DEGENERATE_JACOBIAN";
    case ErrorCode::InversionFailed: return "INVERSION_FAILED";
    case ErrorCode::OnNonInjectiveSet: return "ON_NONINJECTIVE_SET";
    case ErrorCode::SingularMatrix: return "SINGULAR_MATRIX";
    case ErrorCode::EmptyDomain: return "EMPTY_DOMAIN";
    case ErrorCode::InsufficientSamples: return "INSUFFICIENT_SAMPLES";
    case ErrorCode::InsufficientScales: return "INSUFFICIENT_SCALES";
    case ErrorCode::GridTooCoarse: return "GRID_TOO_COARSE";
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::DegenerateLevel: return "DEGENERATE_LEVEL";
    case ErrorCode::IoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Point in the cylindrical chart of the domain. Construct through
/// `CylPoint::make` to get the canonical angle branch.
struct CylPoint {
  double r = 0.0;
  double theta = 0.0;
  double z = 0.0;

  /// Wraps theta into (-pi, pi], reflects negative r through the axis and
  /// pins theta = 0 on the axis.
  static CylPoint make(double r, double theta, double z) {
    if (r < 0.0) {
      r = -r;
      theta += pi;
    }
    theta = std::remainder(theta, 2.0 * pi);
    if (theta <= -pi) theta += 2.0 * pi;
    if (r == 0.0) theta = 0.0;
    return {r, theta, z};
  }
};

struct CartPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 vec() const { return {x, y, z}; }
  static CartPoint from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double distance(const CartPoint& a, const CartPoint& b) {
  return (a.vec() - b.vec()).norm();
}

/// Axis-aligned Cartesian box.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  static Box centered(const Vec3& center, const Vec3& half) { return {center - half, center + half}; }

  double volume() const {
    const Vec3 e = (hi - lo).cwiseMax(0.0);
    return e.x() * e.y() * e.z();
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 half() const { return 0.5 * (hi - lo); }
  bool contains(const CartPoint& p) const {
    return p.x >= lo.x() && p.x <= hi.x() && p.y >= lo.y() && p.y <= hi.y() && p.z >= lo.z() && p.z <= hi.z();
  }
};

/// Box in the cylindrical parameters; the volume element is r dr dtheta dz.
struct CylBox {
  double r0 = 0.0, r1 = 2.0;
  double theta0 = -pi, theta1 = pi;
  double z0 = -1.0, z1 = 1.0;

  double param_volume() const { return (r1 - r0) * (theta1 - theta0) * (z1 - z0); }
  double volume() const { return 0.5 * (r1 * r1 - r0 * r0) * (theta1 - theta0) * (z1 - z0); }
  bool empty() const { return !(r1 > r0 && theta1 > theta0 && z1 > z0) || r0 < 0.0; }
};

/// Sign with sgn(0) = 0.
inline double sgn(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

/// Largest singular value of a 3x3 matrix from the symmetric eigen-solve of
/// M^T M.
template <typename Scalar>
Scalar spectral_norm(const Eigen::Matrix<Scalar, 3, 3>& m) {
  const Eigen::Matrix<Scalar, 3, 3> gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 3, 3>> solver(gram, Eigen::EigenvaluesOnly);
  const Scalar top = solver.eigenvalues()(2);
  using std::sqrt;
  return top > Scalar(0) ? sqrt(top) : Scalar(0);
}

/// Thread count from FDLAB_THREADS, falling back to hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("FDLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs fn(i) for i in [0, n) on up to thread_count() threads. Callers write
/// results into per-index slots and reduce in index order, so results do not
/// depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fdlab

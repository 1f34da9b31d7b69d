#pragma once

// Seeded random streams and batch-means estimation shared by the Monte Carlo
// routines. Every batch owns a stream derived from (seed, batch index) and
// batches are reduced in index order, so estimates are reproducible
// bit-for-bit regardless of FDLAB_THREADS.

#include "fdlab/core.hpp"

#include <cstdint>
#include <random>

namespace fdlab {

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return std::generate_canonical<double, 53>(rng); }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Per-batch means of a vector-valued sample function.
struct BatchMeans {
  Eigen::MatrixXd means;           // batches x dim
  Eigen::VectorXd counts;          // samples per batch
  std::size_t samples = 0;

  std::size_t batches() const { return static_cast<std::size_t>(means.rows()); }

  Eigen::VectorXd overall() const {
    return (means.transpose() * counts) / static_cast<double>(samples);
  }

  /// Estimate of f(E[X]) with the batch spread of f(batch mean) as error.
  template <typename F>
  McEstimate estimate(F&& f) const {
    const double value = f(Eigen::VectorXd(overall()));
    const std::size_t b = batches();
    if (b < 2) return {value, 0.0};
    Eigen::VectorXd per(b);
    for (std::size_t i = 0; i < b; ++i) per(i) = f(Eigen::VectorXd(means.row(i).transpose()));
    const double mean = per.mean();
    const double var = (per.array() - mean).square().sum() / static_cast<double>(b - 1);
    return {value, std::sqrt(var / static_cast<double>(b))};
  }

  McEstimate component(Eigen::Index i) const {
    return estimate([i](const Eigen::VectorXd& m) { return m(i); });
  }
};

inline constexpr std::size_t default_batches = 64;

/// Runs `sample(rng, out)` n times, where `out` is an Eigen::Ref to a
/// zero-initialised vector of length dim, and returns per-batch means.
template <typename Sample>
BatchMeans run_batches(std::size_t n, std::uint64_t seed, Eigen::Index dim, Sample&& sample,
                       std::size_t batches = default_batches) {
  if (n < 2) throw Error(ErrorCode::InsufficientSamples, "Monte Carlo needs at least 2 samples");
  batches = std::min(batches, n);
  BatchMeans out;
  out.samples = n;
  out.means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(batches), dim);
  out.counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(batches));
  parallel_for(batches, [&](std::size_t b) {
    const std::size_t count = n / batches + (b < n % batches ? 1 : 0);
    Rng rng = make_stream(seed, b);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd x(dim);
    for (std::size_t i = 0; i < count; ++i) {
      x.setZero();
      sample(rng, Eigen::Ref<Eigen::VectorXd>(x));
      sum += x;
    }
    out.means.row(static_cast<Eigen::Index>(b)) = sum.transpose() / static_cast<double>(count);
    out.counts(static_cast<Eigen::Index>(b)) = static_cast<double>(count);
  });
  return out;
}

}  // namespace fdlab

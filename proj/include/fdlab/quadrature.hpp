#pragma once

// Integration of K^p and of the energy |Df|^p + J^-q away from an exclusion
// tube around the degeneracy set, trend fitting of the results as the tube
// shrinks, voxel connectivity of ball preimages, box-counting dimension and
// change-of-variables checks.

#include "fdlab/bingmap.hpp"
#include "fdlab/montecarlo.hpp"

#include <array>
#include <cstdint>
#include <numeric>
#include <unordered_set>

namespace fdlab {

/// Excludes |theta| < eps_theta everywhere and |z| < eps_z for r <= 1 + margin.
struct ExclusionTube {
  double eps_theta = 0.0;
  double eps_z = 0.0;
  double margin = 0.05;

  static ExclusionTube uniform(double eps, double margin = 0.05) { return {eps, eps, margin}; }

  bool excludes(const CylPoint& u) const {
    return std::abs(u.theta) < eps_theta || (std::abs(u.z) < eps_z && u.r <= 1.0 + margin);
  }
};

struct IntegralEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double p = 0.0;
  ExclusionTube tube;
  CylBox domain;
  /// Contributions of the INNER, CONE and OUTER cases.
  std::array<double, 3> regions{};
};

/// Estimates for several exponents and tubes from one shared sample set.
struct KpSweep {
  std::vector<double> ps;
  std::vector<ExclusionTube> tubes;
  std::vector<std::vector<IntegralEstimate>> estimates;  // [p][tube]
  /// Integral over the part removed by tube t + 1 but kept by tube t,
  /// i.e. estimates[p][t + 1] - estimates[p][t] with its own error.
  std::vector<std::vector<McEstimate>> increments;  // [p][tube pair]
};

namespace detail {

// Sampling density on [a, b] subset of [0, inf): mixture of uniform and
// log-uniform on [max(a, floor), b].
struct MixtureAxis {
  double a = 0.0, b = 1.0, lo = 0.0;
  double w_uniform = 0.25;
  bool has_log = false;

  MixtureAxis(double a_, double b_, double floor) : a(a_), b(b_) {
    lo = std::max(a, floor);
    has_log = lo > 0.0 && b > lo * (1.0 + 1e-12);
    if (!has_log) w_uniform = 1.0;
  }

  double sample(Rng& rng) const {
    const double u = uniform01(rng);
    if (u < w_uniform) return fdlab::uniform(rng, a, b);
    return lo * std::exp(uniform01(rng) * std::log(b / lo));
  }

  double pdf(double t) const {
    double d = w_uniform / (b - a);
    if (has_log && t >= lo) d += (1.0 - w_uniform) / (t * std::log(b / lo));
    return d;
  }
};

struct Stratum {
  double r0, r1;
  double theta_sign;
  MixtureAxis theta;
  double z_sign;
  MixtureAxis z;
};

inline std::vector<Stratum> make_strata(const CylBox& box, double floor, int radial_slabs = 8) {
  std::vector<Stratum> out;
  auto halves = [](double lo, double hi) {
    std::vector<std::pair<double, std::pair<double, double>>> h;  // sign, |range|
    if (hi > 0.0 && hi > std::max(lo, 0.0)) h.push_back({1.0, {std::max(lo, 0.0), hi}});
    if (lo < 0.0 && std::min(hi, 0.0) > lo) h.push_back({-1.0, {-std::min(hi, 0.0), -lo}});
    return h;
  };
  for (int i = 0; i < radial_slabs; ++i) {
    const double r0 = box.r0 + (box.r1 - box.r0) * i / radial_slabs;
    const double r1 = box.r0 + (box.r1 - box.r0) * (i + 1) / radial_slabs;
    for (const auto& [ts, tr] : halves(box.theta0, box.theta1))
      for (const auto& [zs, zr] : halves(box.z0, box.z1))
        out.push_back({r0, r1, ts, MixtureAxis(tr.first, tr.second, floor), zs, MixtureAxis(zr.first, zr.second, floor)});
  }
  return out;
}

// Stratified estimator with sparse per-sample contributions: add(i, v) may be
// called at most once per component per sample.
struct StratifiedResult {
  Eigen::VectorXd value;
  Eigen::VectorXd variance;
};

template <typename Fn>
StratifiedResult run_stratified(const CylBox& box, double floor, std::size_t n, std::uint64_t seed, Eigen::Index dim,
                                Fn&& fn) {
  if (box.empty()) throw Error(ErrorCode::EmptyDomain, "integration box is empty");
  const auto strata = make_strata(box, floor);
  if (strata.empty()) throw Error(ErrorCode::EmptyDomain, "integration box is empty");
  const std::size_t s_count = strata.size();
  if (n < 2 * s_count) throw Error(ErrorCode::InsufficientSamples, "need at least two samples per stratum");
  std::vector<Eigen::VectorXd> sums(s_count), sumsq(s_count);
  std::vector<std::size_t> counts(s_count);
  parallel_for(s_count, [&](std::size_t s) {
    const Stratum& st = strata[s];
    Rng rng = make_stream(seed, s);
    const std::size_t count = n / s_count + (s < n % s_count ? 1 : 0);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sq = Eigen::VectorXd::Zero(dim);
    const double r_width = st.r1 - st.r0;
    for (std::size_t i = 0; i < count; ++i) {
      const double r = fdlab::uniform(rng, st.r0, st.r1);
      const double t = st.theta.sample(rng);
      const double z = st.z.sample(rng);
      const double weight = r * r_width / (st.theta.pdf(t) * st.z.pdf(z));
      const CylPoint u{r, st.theta_sign * t, st.z_sign * z};
      fn(u, weight, [&](Eigen::Index c, double v) {
        sum(c) += v;
        sq(c) += v * v;
      });
    }
    sums[s] = sum;
    sumsq[s] = sq;
    counts[s] = count;
  });
  StratifiedResult out{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim)};
  for (std::size_t s = 0; s < s_count; ++s) {
    const double m = static_cast<double>(counts[s]);
    const Eigen::VectorXd mean = sums[s] / m;
    out.value += mean;
    out.variance += ((sumsq[s] / m - mean.cwiseProduct(mean)) * (m / (m - 1.0))).cwiseMax(0.0) / m;
  }
  return out;
}

inline double sampling_floor(const std::vector<ExclusionTube>& tubes) {
  double f = std::numeric_limits<double>::infinity();
  for (const auto& t : tubes) {
    if (t.eps_theta > 0.0) f = std::min(f, t.eps_theta);
    if (t.eps_z > 0.0) f = std::min(f, t.eps_z);
  }
  return std::isfinite(f) ? f / 4.0 : 1e-6;
}

inline int region_index(const CylPoint& u) { return static_cast<int>(classify_jacobian_case(u)); }

}  // namespace detail

/// Shared-sample estimates of int_{domain \ tube} K^p r dr dtheta dz for
/// every exponent and tube.
inline KpSweep integrate_Kp_sweep(const std::vector<double>& ps, const CylBox& domain,
                                  const std::vector<ExclusionTube>& tubes, std::size_t n, std::uint64_t seed) {
  for (double p : ps)
    if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::OutOfRange, "integrate_Kp: need 0 < p <= 1");
  if (tubes.empty() || ps.empty()) throw Error(ErrorCode::OutOfRange, "integrate_Kp: nothing to estimate");
  const auto np = static_cast<Eigen::Index>(ps.size());
  const auto nt = static_cast<Eigen::Index>(tubes.size());
  // Layout per p: 3 region slots per tube, then one increment slot per pair.
  const Eigen::Index per_p = 3 * nt + (nt - 1);
  const auto res = detail::run_stratified(
      domain, detail::sampling_floor(tubes), n, seed, np * per_p, [&](const CylPoint& u, double w, auto&& add) {
        bool any = false;
        for (const auto& t : tubes) any |= !t.excludes(u);
        if (!any) return;
        const double jac = jacobian(u);
        if (!(jac > 0.0)) return;
        const double norm = spectral_norm(frame_differential_ae(u));
        const double log_k = 3.0 * std::log(norm) - std::log(jac);
        const int region = detail::region_index(u);
        for (Eigen::Index i = 0; i < np; ++i) {
          const double v = w * std::exp(ps[static_cast<std::size_t>(i)] * log_k);
          for (Eigen::Index t = 0; t < nt; ++t) {
            const bool kept = !tubes[static_cast<std::size_t>(t)].excludes(u);
            if (kept) add(i * per_p + 3 * t + region, v);
            if (t + 1 < nt && !kept && !tubes[static_cast<std::size_t>(t + 1)].excludes(u))
              add(i * per_p + 3 * nt + t, v);
          }
        }
      });
  KpSweep out;
  out.ps = ps;
  out.tubes = tubes;
  for (Eigen::Index i = 0; i < np; ++i) {
    std::vector<IntegralEstimate> row;
    for (Eigen::Index t = 0; t < nt; ++t) {
      IntegralEstimate e;
      double var = 0.0;
      for (int g = 0; g < 3; ++g) {
        e.regions[static_cast<std::size_t>(g)] = res.value(i * per_p + 3 * t + g);
        e.value += res.value(i * per_p + 3 * t + g);
        var += res.variance(i * per_p + 3 * t + g);
      }
      // Regions are disjoint, so per-sample contributions to the total are
      // the region contributions; cross terms vanish.
      e.std_error = std::sqrt(var);
      e.samples = n;
      e.seed = seed;
      e.p = ps[static_cast<std::size_t>(i)];
      e.tube = tubes[static_cast<std::size_t>(t)];
      e.domain = domain;
      row.push_back(e);
    }
    out.estimates.push_back(row);
    std::vector<McEstimate> inc;
    for (Eigen::Index t = 0; t + 1 < nt; ++t) {
      const Eigen::Index c = i * per_p + 3 * nt + t;
      inc.push_back({res.value(c), std::sqrt(res.variance(c))});
    }
    out.increments.push_back(inc);
  }
  return out;
}

inline IntegralEstimate integrate_Kp(double p, const CylBox& domain, const ExclusionTube& tube, std::size_t n,
                                     std::uint64_t seed) {
  return integrate_Kp_sweep({p}, domain, {tube}, n, seed).estimates[0][0];
}

/// The default box r in [0, 2], theta in (-pi, pi], z in [-1, 1].
inline CylBox default_domain() { return CylBox{}; }

inline std::vector<double> default_eps_schedule() { return {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}; }

// ---------------------------------------------------------------------------
// Trend fitting

enum class TrendModel { Constant, Log, Power };

inline const char* to_string(TrendModel m) {
  switch (m) {
    case TrendModel::Constant: return "CONSTANT";
    case TrendModel::Log: return "LOG";
    case TrendModel::Power: return "POWER";
  }
  return "UNKNOWN";
}

/// I(eps) ~ a + b g(1/eps) with g = 0 (CONSTANT), log (LOG) or x^alpha
/// (POWER). For CONSTANT, `a` is the extrapolated limit and, when a
/// decaying trend was resolved, b and alpha < 0 describe it.
struct TrendFit {
  TrendModel model = TrendModel::Constant;
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;
  double r2 = 0.0;
  double b_std_error = 0.0;
};

struct TrendOptions {
  double alpha_min = -1.0;
  double alpha_max = 2.0;
  double alpha_step = 0.005;
  /// |alpha| at or below this counts as logarithmic growth.
  double log_tolerance = 0.05;
  /// Trend coefficients within this many standard errors of 0 are noise.
  double significance = 3.0;
};

namespace detail {

struct LinearFit {
  double a = 0.0, b = 0.0, sse = 0.0, sst = 0.0, sxx = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& g, const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double mg = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mg += g[i] / n;
    my += y[i] / n;
  }
  LinearFit f;
  double sxy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    f.sxx += (g[i] - mg) * (g[i] - mg);
    sxy += (g[i] - mg) * (y[i] - my);
    f.sst += (y[i] - my) * (y[i] - my);
  }
  f.b = f.sxx > 0.0 ? sxy / f.sxx : 0.0;
  f.a = my - f.b * mg;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - f.a - f.b * g[i];
    f.sse += e * e;
  }
  return f;
}

// Box-Cox transform of x = 1/eps, continuous in alpha at 0.
inline double box_cox(double x, double alpha) {
  return std::abs(alpha) < 1e-12 ? std::log(x) : std::expm1(alpha * std::log(x)) / alpha;
}

}  // namespace detail

/// Fits the Box-Cox family I = a + b (x^alpha - 1)/alpha, x = 1/eps, over an
/// alpha grid. A trend that is not significant, or that decays
/// (alpha < -log_tolerance), is CONSTANT; |alpha| <= log_tolerance is LOG;
/// larger alpha is POWER.
inline TrendFit divergence_fit(const std::vector<std::pair<double, double>>& samples, const TrendOptions& opt = {}) {
  if (samples.size() < 4) throw Error(ErrorCode::InsufficientSamples, "divergence_fit needs at least 4 samples");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double eps = samples[i].first;
    if (!(eps > 0.0) || (i > 0 && !(eps < samples[i - 1].first)))
      throw Error(ErrorCode::OutOfRange, "divergence_fit needs positive, decreasing eps");
    x.push_back(1.0 / eps);
    y.push_back(samples[i].second);
  }
  const double n = static_cast<double>(y.size());
  auto fit_at = [&](double alpha) {
    std::vector<double> g;
    for (double xi : x) g.push_back(detail::box_cox(xi, alpha));
    return detail::linear_fit(g, y);
  };

  TrendFit out;
  const auto constant = fit_at(0.0);
  if (constant.sst == 0.0) {
    out.a = y.front();
    out.r2 = 1.0;
    return out;
  }
  double best_alpha = 0.0;
  detail::LinearFit best = constant;
  const int steps = static_cast<int>(std::lround((opt.alpha_max - opt.alpha_min) / opt.alpha_step));
  for (int i = 0; i <= steps; ++i) {
    const double alpha = opt.alpha_min + opt.alpha_step * i;
    const auto f = fit_at(alpha);
    if (f.sse < best.sse) {
      best = f;
      best_alpha = alpha;
    }
  }
  const double dof = std::max(1.0, n - 3.0);
  const double se_b = best.sxx > 0.0 ? std::sqrt(best.sse / dof / best.sxx) : 0.0;
  const double r2 = std::clamp(1.0 - best.sse / best.sst, 0.0, 1.0);

  if (!(std::abs(best.b) > opt.significance * se_b)) {
    out.model = TrendModel::Constant;
    double mean = 0.0;
    for (double v : y) mean += v / n;
    out.a = mean;
    out.r2 = 0.0;
    out.b_std_error = se_b;
    return out;
  }
  if (std::abs(best_alpha) <= opt.log_tolerance) {
    const auto f = fit_at(0.0);
    out.model = TrendModel::Log;
    out.a = f.a;
    out.b = f.b;
    out.alpha = 0.0;
    out.r2 = std::clamp(1.0 - f.sse / f.sst, 0.0, 1.0);
    out.b_std_error = f.sxx > 0.0 ? std::sqrt(f.sse / std::max(1.0, n - 2.0) / f.sxx) : 0.0;
    return out;
  }
  // a + b (x^alpha - 1)/alpha = (a - b/alpha) + (b/alpha) eps^-alpha
  out.model = best_alpha < 0.0 ? TrendModel::Constant : TrendModel::Power;
  out.alpha = best_alpha;
  out.a = best.a - best.b / best_alpha;
  out.b = best.b / best_alpha;
  out.r2 = r2;
  out.b_std_error = se_b / std::abs(best_alpha);
  return out;
}

// ---------------------------------------------------------------------------
// Energy

/// E = int |Df|^p + J^-q over domain \ tube.
inline IntegralEstimate energy_Epq(double p, double q, const CylBox& domain, const ExclusionTube& tube, std::size_t n,
                                   std::uint64_t seed) {
  if (!(p >= 3.0) || !(q > 0.0)) throw Error(ErrorCode::OutOfRange, "energy: need p >= 3 and q > 0");
  const auto res = detail::run_stratified(domain, detail::sampling_floor({tube}), n, seed, 3,
                                          [&](const CylPoint& u, double w, auto&& add) {
                                            if (tube.excludes(u)) return;
                                            const double jac = jacobian(u);
                                            if (!(jac > 0.0)) return;
                                            const double norm = spectral_norm(frame_differential_ae(u));
                                            add(detail::region_index(u), w * (std::pow(norm, p) + std::pow(jac, -q)));
                                          });
  IntegralEstimate e;
  for (int g = 0; g < 3; ++g) e.regions[static_cast<std::size_t>(g)] = res.value(g);
  e.value = res.value.sum();
  e.std_error = std::sqrt(res.variance.sum());
  e.samples = n;
  e.seed = seed;
  e.p = p;
  e.tube = tube;
  e.domain = domain;
  return e;
}

/// Energy of a map given by its Cartesian differential, uniform sampling
/// on a Cartesian box.
template <typename Map>
McEstimate energy_Epq(const Map& map, double p, double q, const Box& box, std::size_t n, std::uint64_t seed) {
  if (!(p >= 3.0) || !(q > 0.0)) throw Error(ErrorCode::OutOfRange, "energy: need p >= 3 and q > 0");
  const double vol = box.volume();
  if (!(vol > 0.0)) throw Error(ErrorCode::EmptyDomain, "energy: empty box");
  const auto bm = run_batches(n, seed, 1, [&](Rng& rng, Eigen::Ref<Eigen::VectorXd> x) {
    const CartPoint pt{uniform(rng, box.lo.x(), box.hi.x()), uniform(rng, box.lo.y(), box.hi.y()),
                       uniform(rng, box.lo.z(), box.hi.z())};
    const Mat3 d = map.differential(pt);
    const double jac = d.determinant();
    x(0) = jac > 0.0 ? vol * (std::pow(spectral_norm(d), p) + std::pow(jac, -q)) : 0.0;
  });
  return bm.component(0);
}

// ---------------------------------------------------------------------------
// Voxel preimages

struct VoxelGrid {
  int resolution = 0;
  Box box;
  std::vector<std::uint8_t> occupied;

  Vec3 voxel_size() const { return (box.hi - box.lo) / resolution; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * resolution + static_cast<std::size_t>(j)) * resolution + static_cast<std::size_t>(k);
  }
  Vec3 center(int i, int j, int k) const {
    return box.lo + voxel_size().cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5));
  }
  std::size_t count() const { return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), 1)); }
};

/// Marks voxels whose center x has |map(x) - y| < radius.
template <typename Map>
VoxelGrid voxelize(const Map& map, const CartPoint& y, double radius, const Box& box, int resolution) {
  VoxelGrid g;
  g.resolution = resolution;
  g.box = box;
  g.occupied.assign(static_cast<std::size_t>(resolution) * resolution * resolution, 0);
  const Vec3 target = y.vec();
  parallel_for(static_cast<std::size_t>(resolution), [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    for (int j = 0; j < resolution; ++j)
      for (int k = 0; k < resolution; ++k) {
        const Vec3 v = map.value(CartPoint::from(g.center(i, j, k))).vec();
        if ((v - target).norm() < radius) g.occupied[g.index(i, j, k)] = 1;
      }
  });
  return g;
}

struct ComponentCount {
  int components = 0;
  bool touches_boundary = false;
  std::size_t occupied = 0;
  std::vector<int> labels;  // per voxel, -1 when empty
};

/// 6-connected components of the occupied voxels.
inline ComponentCount count_components(const VoxelGrid& g) {
  ComponentCount out;
  const int n = g.resolution;
  out.labels.assign(g.occupied.size(), -1);
  std::vector<std::array<int, 3>> stack;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t id = g.index(i, j, k);
        if (!g.occupied[id]) continue;
        ++out.occupied;
        if (i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1) out.touches_boundary = true;
        if (out.labels[id] >= 0) continue;
        const int label = out.components++;
        out.labels[id] = label;
        stack.push_back({i, j, k});
        while (!stack.empty()) {
          const auto c = stack.back();
          stack.pop_back();
          static constexpr int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
          for (const auto& d : nb) {
            const int a = c[0] + d[0], b = c[1] + d[1], e = c[2] + d[2];
            if (a < 0 || b < 0 || e < 0 || a >= n || b >= n || e >= n) continue;
            const std::size_t nid = g.index(a, b, e);
            if (g.occupied[nid] && out.labels[nid] < 0) {
              out.labels[nid] = label;
              stack.push_back({a, b, e});
            }
          }
        }
      }
  return out;
}

/// Joins components whose voxel centers, at most `reach` voxels apart, are
/// linked by a segment lying in the preimage (checked at `steps` interior
/// points). Only components exhibiting such a path are merged. Returns the
/// number of merges; `count.components` is updated.
template <typename Map>
int merge_along_segments(const Map& map, const CartPoint& y, double radius, const VoxelGrid& g, ComponentCount& count,
                         int reach = 3, int steps = 32) {
  if (count.components <= 1) return 0;
  std::vector<int> parent(static_cast<std::size_t>(count.components));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    return a;
  };
  std::vector<std::size_t> sizes(parent.size(), 0);
  for (int l : count.labels)
    if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
  const int largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  const Vec3 target = y.vec();
  auto segment_inside = [&](const Vec3& a, const Vec3& b) {
    for (int s = 1; s < steps; ++s) {
      const Vec3 x = a + (b - a) * (static_cast<double>(s) / steps);
      if (!((map.value(CartPoint::from(x)).vec() - target).norm() < radius)) return false;
    }
    return true;
  };
  const int n = g.resolution;
  int merges = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const int l = count.labels[g.index(i, j, k)];
        if (l < 0 || l == largest) continue;
        for (int a = std::max(0, i - reach); a <= std::min(n - 1, i + reach); ++a)
          for (int b = std::max(0, j - reach); b <= std::min(n - 1, j + reach); ++b)
            for (int e = std::max(0, k - reach); e <= std::min(n - 1, k + reach); ++e) {
              const int m = count.labels[g.index(a, b, e)];
              if (m < 0 || find(m) == find(l)) continue;
              if (segment_inside(g.center(i, j, k), g.center(a, b, e))) {
                parent[static_cast<std::size_t>(find(m))] = find(l);
                ++merges;
              }
            }
      }
  count.components -= merges;
  return merges;
}

/// Search box for h^-1 B(y, radius) from |h(x)| >= c/4, c = |r - 1| + |z|.
inline Box properness_box(const CartPoint& y, double radius) {
  const double c = 4.0 * (y.norm() + radius);
  return Box{Vec3(-1.0 - c, -1.0 - c, -c), Vec3(1.0 + c, 1.0 + c, c)};
}

namespace detail {

// Coarse cover of h^-1 B(y, radius): a voxel is kept if its center maps
// within radius + L * half-diagonal of y, where L is twice the largest
// Frobenius norm of Df at the voxel's center and corners.
template <typename Map>
VoxelGrid coarse_cover(const Map& map, const CartPoint& y, double radius, const Box& box, int coarse) {
  VoxelGrid g;
  g.resolution = coarse;
  g.box = box;
  g.occupied.assign(static_cast<std::size_t>(coarse) * coarse * coarse, 0);
  const Vec3 h = g.voxel_size();
  const double half_diagonal = 0.5 * h.norm();
  const Vec3 target = y.vec();
  const int m = coarse + 1;
  parallel_for(static_cast<std::size_t>(coarse), [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    // Corner norms for the two x-layers bounding this slab.
    std::vector<double> corner(2 * static_cast<std::size_t>(m) * m);
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
          const Vec3 x = box.lo + h.cwiseProduct(Vec3(i + a, j, k));
          corner[(static_cast<std::size_t>(a) * m + j) * m + k] = map.differential(CartPoint::from(x)).norm();
        }
    for (int j = 0; j < coarse; ++j)
      for (int k = 0; k < coarse; ++k) {
        const CartPoint c = CartPoint::from(g.center(i, j, k));
        double lip = map.differential(c).norm();
        for (int a = 0; a < 2; ++a)
          for (int dj = 0; dj < 2; ++dj)
            for (int dk = 0; dk < 2; ++dk)
              lip = std::max(lip, corner[(static_cast<std::size_t>(a) * m + j + dj) * m + k + dk]);
        if ((map.value(c).vec() - target).norm() < radius + 2.0 * lip * half_diagonal)
          g.occupied[g.index(i, j, k)] = 1;
      }
  });
  return g;
}

inline Box occupied_bounds(const VoxelGrid& g) {
  const Vec3 h = g.voxel_size();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int i = 0; i < g.resolution; ++i)
    for (int j = 0; j < g.resolution; ++j)
      for (int k = 0; k < g.resolution; ++k)
        if (g.occupied[g.index(i, j, k)]) {
          const Vec3 c = g.center(i, j, k);
          lo = lo.cwiseMin(c - h);
          hi = hi.cwiseMax(c + h);
        }
  if (!(lo.x() <= hi.x())) return Box{};
  return Box{lo.cwiseMax(g.box.lo), hi.cwiseMin(g.box.hi)};
}

}  // namespace detail

/// Shrinks a search box around the preimage of B(y, radius) by repeated
/// coarse covers. Returns an empty box if the preimage is empty.
template <typename Map>
Box tighten_preimage_box(const Map& map, const CartPoint& y, double radius, Box box, int coarse = 48,
                         int max_passes = 16) {
  for (int pass = 0; pass < max_passes; ++pass) {
    const Box next = detail::occupied_bounds(detail::coarse_cover(map, y, radius, box, coarse));
    if (!(next.volume() > 0.0)) return Box{};
    const bool converged = next.volume() > 0.95 * box.volume();
    box = next;
    if (converged) break;
  }
  return box;
}

struct ComponentsReport {
  int components = 0;
  int resolution = 0;
  Box box;
  std::size_t occupied = 0;
  int refinements = 0;
  int path_merges = 0;  // components joined by a segment inside the preimage
};

/// Number of 6-connected components of the voxelised preimage of
/// B(y, radius) inside `search`, after joining components linked by a
/// segment inside the preimage. If the count exceeds one the grid is refined
/// up to `max_refinements` times. GRID_TOO_COARSE if the occupied set
/// reaches the grid boundary.
template <typename Map>
ComponentsReport preimage_components(const Map& map, const CartPoint& y, double radius, const Box& search,
                                     int resolution = 128, int max_refinements = 1) {
  if (!(radius > 0.0)) throw Error(ErrorCode::OutOfRange, "preimage_components: radius must be positive");
  if (resolution < 4) throw Error(ErrorCode::GridTooCoarse, "preimage_components: resolution below 4");
  ComponentsReport rep;
  Box box = tighten_preimage_box(map, y, radius, search);
  if (!(box.volume() > 0.0)) {
    rep.resolution = resolution;
    return rep;
  }
  // One fine voxel of padding keeps the occupied set off the boundary.
  const Vec3 pad = (box.hi - box.lo) / (resolution - 2);
  box = Box{(box.lo - pad).cwiseMax(search.lo), (box.hi + pad).cwiseMin(search.hi)};
  rep.box = box;
  for (int level = 0; level <= max_refinements; ++level) {
    const int res = resolution << level;
    const VoxelGrid grid = voxelize(map, y, radius, box, res);
    auto count = count_components(grid);
    if (count.touches_boundary)
      throw Error(ErrorCode::GridTooCoarse, "preimage_components: occupied voxels reach the bounding box");
    rep.path_merges = merge_along_segments(map, y, radius, grid, count);
    rep.components = count.components;
    rep.resolution = res;
    rep.occupied = count.occupied;
    rep.refinements = level;
    if (count.components <= 1) break;
  }
  return rep;
}

inline ComponentsReport preimage_components(const CartPoint& y, double radius, int resolution = 128) {
  return preimage_components(BingMap{}, y, radius, properness_box(y, radius), resolution);
}

// ---------------------------------------------------------------------------
// Box counting

struct BoxCount {
  double dimension = 0.0;
  std::vector<double> scales;
  std::vector<std::size_t> counts;
};

inline std::vector<double> default_scales(const std::vector<CartPoint>& points, int first = 2, int last = 9) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p.vec());
    hi = hi.cwiseMax(p.vec());
  }
  double diam = points.empty() ? 0.0 : (hi - lo).norm();
  if (!(diam > 0.0)) diam = 1.0;
  std::vector<double> out;
  for (int k = first; k <= last; ++k) out.push_back(diam * std::ldexp(1.0, -k));
  return out;
}

/// Least-squares slope of log N(delta) against log(1/delta).
inline BoxCount box_counting(const std::vector<CartPoint>& points, const std::vector<double>& scales) {
  if (points.size() < 1000) throw Error(ErrorCode::InsufficientSamples, "box_counting needs at least 1000 points");
  if (scales.size() < 4) throw Error(ErrorCode::InsufficientScales, "box_counting needs at least 4 scales");
  const auto [smin, smax] = std::minmax_element(scales.begin(), scales.end());
  if (!(*smin > 0.0) || *smax / *smin < 100.0)
    throw Error(ErrorCode::InsufficientScales, "box_counting scales must span two decades");

  struct Key {
    std::int64_t a, b, c;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(k.a) * 0x9E3779B97F4A7C15ull;
      h ^= static_cast<std::uint64_t>(k.b) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
      h ^= static_cast<std::uint64_t>(k.c) + 0x94D049BB133111EBull + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };
  BoxCount out;
  out.scales = scales;
  std::vector<double> gx, gy;
  for (double delta : scales) {
    std::unordered_set<Key, KeyHash> cells;
    cells.reserve(points.size());
    for (const auto& p : points)
      cells.insert({static_cast<std::int64_t>(std::floor(p.x / delta)), static_cast<std::int64_t>(std::floor(p.y / delta)),
                    static_cast<std::int64_t>(std::floor(p.z / delta))});
    out.counts.push_back(cells.size());
    gx.push_back(std::log(1.0 / delta));
    gy.push_back(std::log(static_cast<double>(cells.size())));
  }
  out.dimension = detail::linear_fit(gx, gy).b;
  return out;
}

/// n points per component of a fiber, in Cartesian domain coordinates.
inline std::vector<CartPoint> fiber_cloud(const Fiber& f, std::size_t n) {
  std::vector<CartPoint> out;
  for (const auto& c : f.components)
    for (std::size_t i = 0; i < n; ++i) out.push_back(cyl_to_cart(c.at(static_cast<double>(i) / static_cast<double>(n))));
  return out;
}

// ---------------------------------------------------------------------------
// Change of variables

struct ChangeOfVariablesReport {
  CartPoint center;
  double radius = 0.0;
  McEstimate integral;  // int_{h^-1 B} J
  double ball_volume = 0.0;
  double ratio = 0.0;
  Box box;
  bool pass = false;
};

/// Distance from y to the half-line {-t e_x : t >= 0}.
inline double distance_to_noninjective_image(const CartPoint& y) {
  return y.x <= 0.0 ? std::hypot(y.y, y.z) : y.norm();
}

template <typename Map>
ChangeOfVariablesReport change_of_variables_check(const Map& map, const CartPoint& y, double radius, const Box& search,
                                                  std::size_t n, std::uint64_t seed) {
  if (!(radius > 0.0)) throw Error(ErrorCode::OutOfRange, "change of variables: radius must be positive");
  ChangeOfVariablesReport rep;
  rep.center = y;
  rep.radius = radius;
  rep.ball_volume = 4.0 / 3.0 * pi * radius * radius * radius;
  rep.box = tighten_preimage_box(map, y, radius, search);
  if (!(rep.box.volume() > 0.0)) throw Error(ErrorCode::EmptyDomain, "change of variables: empty preimage");
  // Sample uniformly from the voxels of a coarse cover of the preimage.
  const VoxelGrid cover = detail::coarse_cover(map, y, radius, rep.box, 48);
  std::vector<Vec3> corners;
  for (int i = 0; i < cover.resolution; ++i)
    for (int j = 0; j < cover.resolution; ++j)
      for (int k = 0; k < cover.resolution; ++k)
        if (cover.occupied[cover.index(i, j, k)]) corners.push_back(cover.box.lo + cover.voxel_size().cwiseProduct(Vec3(i, j, k)));
  const Vec3 size = cover.voxel_size();
  const double vol = static_cast<double>(corners.size()) * size.prod();
  const Vec3 target = y.vec();
  const auto bm = run_batches(n, seed, 1, [&](Rng& rng, Eigen::Ref<Eigen::VectorXd> x) {
    const auto pick = std::min(corners.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(corners.size())));
    const Vec3 v = corners[pick] + size.cwiseProduct(Vec3(uniform01(rng), uniform01(rng), uniform01(rng)));
    const CartPoint pt = CartPoint::from(v);
    if ((map.value(pt).vec() - target).norm() < radius) x(0) = vol * map.jacobian(pt);
  });
  rep.integral = bm.component(0);
  rep.ratio = rep.integral.value / rep.ball_volume;
  rep.pass = std::abs(rep.integral.value - rep.ball_volume) <= 3.0 * rep.integral.std_error + 0.01 * rep.ball_volume;
  return rep;
}

inline ChangeOfVariablesReport change_of_variables_check(const CartPoint& y, double radius, std::size_t n,
                                                         std::uint64_t seed) {
  if (distance_to_noninjective_image(y) < 2.0 * radius)
    throw Error(ErrorCode::OutOfRange, "change of variables: ball within one radius of the half-line {-t e_x}");
  return change_of_variables_check(BingMap{}, y, radius, properness_box(y, radius), n, seed);
}

}  // namespace fdlab

#pragma once

// The fourteen acceptance checks, shared by `fdlab verify-all` and the
// acceptance test binary. Each check draws its random streams from
// (seed, check id) so a run is reproducible check by check.

#include "fdlab/bingmap.hpp"
#include "fdlab/exterior.hpp"
#include "fdlab/mesh.hpp"
#include "fdlab/quadrature.hpp"
#include "fdlab/thresholds.hpp"

#include <json.hpp>

#include <chrono>
#include <functional>
#include <string>
#include <vector>

namespace fdlab {

using Json = nlohmann::ordered_json;

struct CheckResult {
  int id = 0;
  std::string name;
  double value = 0.0;
  double std_error = 0.0;
  bool pass = false;
  Json details = Json::object();
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::uint64_t seed = 0;
};

struct AcceptanceCheck {
  int id = 0;
  std::string name;
  std::function<CheckResult(const AcceptanceOptions&)> run;
};

namespace acceptance {

inline Rng stream(const AcceptanceOptions& opt, int id, std::uint64_t sub = 0) {
  return make_stream(opt.seed, static_cast<std::uint64_t>(id) * 1000 + sub);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline CylPoint sample_domain(Rng& rng, double rmax = 2.0, double zmax = 1.0) {
  return CylPoint::make(uniform(rng, 0.0, rmax), uniform(rng, -pi, pi), uniform(rng, -zmax, zmax));
}

// 10^4 points at distance > 0.05 from every non-smooth stratum.
inline std::vector<CylPoint> smooth_points(Rng& rng, std::size_t n, double margin) {
  std::vector<CylPoint> out;
  while (out.size() < n) {
    const CylPoint u = sample_domain(rng);
    if (SingularLocus::smooth_margin(u) > margin) out.push_back(u);
  }
  return out;
}

inline CheckResult interface_continuity(const AcceptanceOptions& opt) {
  CheckResult res;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = stream(opt, 1);
  constexpr std::size_t n = 1000000;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = uniform01(rng);
    const double z = uniform01(rng) < 0.5 ? r : -r;
    const double theta = uniform(rng, -pi, pi);
    const Vec3 a = detail::eval_square_formula(r, theta, z).vec();
    const Vec3 b = detail::eval_cut_formula(r, theta, z).vec();
    worst = std::max(worst, (a - b).norm());
  }
  const double elapsed = seconds_since(t0);
  res.value = worst;
  res.pass = worst <= 1e-12 && elapsed < 10.0;
  res.details = {{"points", n}, {"max_difference", worst}, {"tolerance", 1e-12}, {"runtime_budget_s", 10.0}};
  return res;
}

inline CheckResult derivative_correctness(const AcceptanceOptions& opt) {
  CheckResult res;
  Rng rng = stream(opt, 2);
  const auto pts = smooth_points(rng, 10000, 0.05);
  double worst = 0.0;
  for (const auto& u : pts) {
    const Mat3 a = frame_differential(u);
    const Mat3 f = fd_differential(u, 1e-5);
    worst = std::max(worst, (a - f).norm() / a.norm());
  }
  res.value = worst;
  res.pass = worst < 1e-6;
  res.details = {{"points", pts.size()}, {"min_stratum_distance", 0.05}, {"step", 1e-5},
                 {"max_relative_error", worst}, {"tolerance", 1e-6}};
  return res;
}

inline CheckResult jacobian_consistency(const AcceptanceOptions& opt) {
  CheckResult res;
  Rng rng = stream(opt, 2);  // same points as the derivative check
  const auto pts = smooth_points(rng, 10000, 0.05);
  double worst = 0.0;
  for (const auto& u : pts) {
    const double det = frame_differential(u).determinant();
    worst = std::max(worst, std::abs(jacobian(u) - det) / std::abs(det));
  }
  Rng rng2 = stream(opt, 3);
  constexpr std::size_t n = 1000000;
  std::size_t tested = 0, nonpositive = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const CylPoint u = sample_domain(rng2, 3.0, 2.0);
    if (!(SingularLocus::degeneracy_margin(u) > 0.0)) continue;
    ++tested;
    if (!(jacobian(u) > 0.0)) ++nonpositive;
  }
  res.value = worst;
  res.pass = worst < 1e-10 && nonpositive == 0;
  res.details = {{"points", pts.size()}, {"max_relative_error", worst}, {"tolerance", 1e-10},
                 {"positivity_points", tested}, {"nonpositive", nonpositive}};
  return res;
}

inline CheckResult integrability_threshold(const AcceptanceOptions& opt) {
  CheckResult res;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> ps{0.30, 0.40, 0.45, 0.50};
  const auto schedule = default_eps_schedule();
  std::vector<ExclusionTube> tubes;
  for (double e : schedule) {
    tubes.push_back(ExclusionTube::uniform(e));
    tubes.push_back(ExclusionTube::uniform(e / 2.0));
  }
  constexpr std::size_t n = 10000000;
  const auto sweep = integrate_Kp_sweep(ps, default_domain(), tubes, n, opt.seed);

  bool pass = true;
  double worst_change = 0.0;
  Json rows = Json::array();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    Json eps_rows = Json::array();
    bool halvings_ok = true;
    for (std::size_t t = 0; t < tubes.size(); t += 2) {
      const auto& e = sweep.estimates[i][t];
      const auto& inc = sweep.increments[i][t];
      const double change = inc.value / e.value;
      pts.push_back({schedule[t / 2], e.value});
      const bool checked = schedule[t / 2] < 1e-4;
      if (checked && ps[i] < 0.5) {
        halvings_ok = halvings_ok && change < 0.02;
        worst_change = std::max(worst_change, change);
      }
      eps_rows.push_back({{"eps", schedule[t / 2]},
                          {"value", e.value},
                          {"std_error", e.std_error},
                          {"regions", {{"INNER", e.regions[0]}, {"CONE", e.regions[1]}, {"OUTER", e.regions[2]}}},
                          {"halving_change", change},
                          {"halving_change_std_error", inc.std_error / e.value},
                          {"halving_checked", checked && ps[i] < 0.5}});
    }
    const auto fit = divergence_fit(pts);
    bool ok = false;
    if (ps[i] < 0.5) ok = fit.model == TrendModel::Constant && halvings_ok;
    else ok = fit.model == TrendModel::Log && fit.b > 0.0 && fit.r2 > 0.99;
    pass = pass && ok;
    rows.push_back({{"p", ps[i]},
                    {"expected", ps[i] < 0.5 ? "CONSTANT" : "LOG"},
                    {"fit", {{"model", to_string(fit.model)}, {"a", fit.a}, {"b", fit.b}, {"alpha", fit.alpha}, {"r2", fit.r2}}},
                    {"eps", eps_rows},
                    {"pass", ok}});
  }
  const double elapsed = seconds_since(t0);
  res.value = worst_change;
  res.pass = pass && elapsed <= 600.0;
  res.details = {{"samples", n}, {"halving_tolerance", 0.02}, {"runtime_budget_s", 600.0}, {"p", rows}};
  return res;
}

inline CheckResult fiber_catalogue(const AcceptanceOptions&) {
  CheckResult res;
  const std::vector<std::pair<double, FiberKind>> cases{
      {0.0, FiberKind::Circle},      {0.25, FiberKind::FigureEight}, {0.5, FiberKind::FigureEight},
      {0.75, FiberKind::FigureEight}, {1.0, FiberKind::Circle},      {1.5, FiberKind::Arc},
      {2.0, FiberKind::Arc}};
  bool pass = true;
  double worst = 0.0;
  Json rows = Json::array();
  for (const auto& [t, kind] : cases) {
    const Fiber f = fiber({-t, 0.0, 0.0});
    double residual = 0.0;
    for (const auto& c : f.components)
      for (int i = 0; i < 1000; ++i) residual = std::max(residual, (eval(c.at(i / 999.0)).vec() + Vec3(t, 0.0, 0.0)).norm());
    bool ok = f.kind == kind && residual < 1e-9;
    if (kind == FiberKind::Arc) {
      const CartPoint a = cyl_to_cart(f.components[0].at(0.0));
      const CartPoint b = cyl_to_cart(f.components[0].at(1.0));
      ok = ok && a.x == 0.0 && a.y == 0.0 && a.z == t - 1.0 && b.x == 0.0 && b.y == 0.0 && b.z == -(t - 1.0);
    }
    worst = std::max(worst, residual);
    pass = pass && ok;
    rows.push_back({{"t", t}, {"kind", to_string(f.kind)}, {"expected", to_string(kind)}, {"components", f.components.size()},
                    {"max_residual", residual}, {"pass", ok}});
  }
  res.value = worst;
  res.pass = pass;
  res.details = {{"samples_per_component", 1000}, {"tolerance", 1e-9}, {"fibers", rows}};
  return res;
}

inline CheckResult inversion_round_trip(const AcceptanceOptions& opt) {
  CheckResult res;
  Rng rng = stream(opt, 6);
  constexpr std::size_t n = 10000;
  std::size_t failures = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const CylPoint u = sample_domain(rng);
    try {
      const CylPoint v = invert(eval(u));
      const double err = (cyl_to_cart(v).vec() - cyl_to_cart(u).vec()).norm();
      worst = std::max(worst, err);
      if (!(err < 1e-8)) ++failures;
    } catch (const Error&) {
      ++failures;
    }
  }
  res.value = worst;
  res.pass = failures == 0;
  res.details = {{"points", n}, {"max_error", worst}, {"tolerance", 1e-8}, {"failures", failures}};
  return res;
}

inline CheckResult monotonicity(const AcceptanceOptions& opt) {
  CheckResult res;
  Rng rng = stream(opt, 7);
  constexpr double radius = 0.1;
  std::vector<CartPoint> centers;
  for (int i = 0; i < 10; ++i) centers.push_back({-3.0 * i / 9.0, 0.0, 0.0});
  while (centers.size() < 100) centers.push_back(eval(sample_domain(rng)));
  int bad = 0;
  int merges = 0;
  std::size_t most_refined = 0;
  Json balls = Json::array();
  for (const auto& y : centers) {
    int comps = -1;
    std::string error;
    try {
      const auto rep = preimage_components(y, radius, 128);
      comps = rep.components;
      merges += rep.path_merges;
      most_refined = std::max(most_refined, static_cast<std::size_t>(rep.resolution));
    } catch (const Error& e) {
      error = e.what();
    }
    if (comps != 1) ++bad;
    Json ball = {{"center", {y.x, y.y, y.z}}, {"components", comps}};
    if (!error.empty()) ball["error"] = error;
    balls.push_back(ball);
  }
  const auto fold = preimage_components(FoldMap{}, {1.0, 0.0, 0.0}, radius, Box{Vec3::Constant(-3.0), Vec3::Constant(3.0)}, 128);
  res.value = bad;
  res.pass = bad == 0 && fold.components == 2;
  res.details = {{"radius", radius}, {"resolution", 128}, {"max_resolution_used", most_refined}, {"path_merges", merges}, {"balls_not_connected", bad},
                 {"fold_control_components", fold.components}, {"balls", balls}};
  return res;
}

inline CheckResult wedge_inequality_check(const AcceptanceOptions& opt) {
  CheckResult res;
  Rng rng = stream(opt, 8);
  std::normal_distribution<double> normal;
  std::size_t violations = 0;
  double worst = 0.0;  // largest lhs / rhs
  auto test = [&](const Mat3& m) {
    for (int k = 1; k <= 2; ++k) {
      const auto w = wedge_inequality(m, k);
      if (!w.holds) ++violations;
      if (w.rhs > 0.0) worst = std::max(worst, static_cast<double>(w.lhs / w.rhs));
    }
  };
  for (int i = 0; i < 100000; ++i) {
    Mat3 m;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) m(a, b) = normal(rng);
    if (m.determinant() < 0.0) m.row(0) *= -1.0;
    if (m.determinant() == 0.0) continue;
    test(m);
  }
  Rng rng2 = stream(opt, 8, 1);
  for (const auto& u : smooth_points(rng2, 10000, 1e-3)) test(frame_differential(u));
  res.value = worst;
  res.pass = violations == 0;
  res.details = {{"random_matrices", 100000}, {"map_points", 10000}, {"degrees", {1, 2}}, {"violations", violations},
                 {"max_ratio", worst}};
  return res;
}

inline CheckResult pullback_norm_estimate(const AcceptanceOptions& opt) {
  CheckResult res;
  const CylBox box{0.3, 1.8, 0.4, 2.8, 0.1, 0.9};
  const Box image = image_bounding_box(box);
  const Box support = Box::centered(image.center(), 0.6 * (image.hi - image.lo) + Vec3::Constant(0.05));
  struct Config {
    int k;
    double p, q;
  };
  bool pass = true;
  double worst = 0.0;
  Json rows = Json::array();
  int index = 0;
  for (const auto& c : {Config{1, 3.0, 1.0}, Config{2, 1.5, 2.0}, Config{3, 1.0, 1.0}}) {
    const int n = basis_size(c.k);
    const Coeffs alpha = Coeffs::Constant(n, 1.0);
    const Eigen::Matrix<double, Eigen::Dynamic, 3, 0, 3, 3> beta = Eigen::Matrix<double, Eigen::Dynamic, 3, 0, 3, 3>::Constant(n, 3, 0.5);
    const auto omega = bump_form_field(c.k, support, alpha, beta);
    const auto rep = verify_pullback_estimate(omega, c.p, c.q, c.k, box, 1000000, opt.seed + static_cast<std::uint64_t>(index++));
    pass = pass && rep.pass;
    worst = std::max(worst, rep.lhs.value / rep.rhs.value);
    rows.push_back({{"k", rep.k}, {"p", rep.p}, {"q", rep.q}, {"r", rep.r},
                    {"lhs", rep.lhs.value}, {"lhs_std_error", rep.lhs.std_error},
                    {"rhs", rep.rhs.value}, {"rhs_std_error", rep.rhs.std_error},
                    {"exponent", rep.exponent}, {"printed_exponent", rep.printed_exponent},
                    {"rhs_printed_exponent", rep.rhs_printed_exponent}, {"pass", rep.pass}});
  }
  res.value = worst;
  res.pass = pass;
  res.details = {{"samples", 1000000}, {"degeneracy_distance", degeneracy_distance(box)}, {"configurations", rows}};
  return res;
}

inline FormField random_bump(int k, const Box& support, Rng& rng) {
  const int n = basis_size(k);
  Coeffs alpha(n);
  Eigen::Matrix<double, Eigen::Dynamic, 3, 0, 3, 3> beta(n, 3);
  for (int i = 0; i < n; ++i) {
    alpha(i) = uniform(rng, -1.0, 1.0);
    for (int j = 0; j < 3; ++j) beta(i, j) = uniform(rng, -1.0, 1.0);
  }
  return bump_form_field(k, support, alpha, beta);
}

inline CheckResult weak_commutation(const AcceptanceOptions& opt) {
  CheckResult res;
  const Box domain = Box::centered(Vec3(0.3, 0.2, 0.1), Vec3(0.9, 0.8, 0.7));
  const Box hull = image_bounding_box(domain);
  const Box image = Box::centered(hull.center(), 0.55 * (hull.hi - hull.lo) + Vec3::Constant(0.05));
  bool pass = true;
  double worst = 0.0;  // |residual| / stderr
  Json rows = Json::array();
  for (int i = 0; i < 5; ++i) {
    const int k = i % 2 == 0 ? 1 : 2;
    Rng rng = stream(opt, 10, static_cast<std::uint64_t>(i));
    const auto omega = random_bump(k, domain, rng);
    const auto eta = random_bump(2 - k, image, rng);
    const auto rep = verify_commutation(BingMap{}, omega, eta, 1000000, opt.seed + 10 + static_cast<std::uint64_t>(i));
    pass = pass && rep.pass;
    worst = std::max(worst, std::abs(rep.residual.value) / rep.residual.std_error);
    rows.push_back({{"k", k}, {"lhs", rep.lhs.value}, {"lhs_std_error", rep.lhs.std_error},
                    {"rhs", rep.rhs.value}, {"rhs_std_error", rep.rhs.std_error},
                    {"residual", rep.residual.value}, {"residual_std_error", rep.residual.std_error}, {"pass", rep.pass}});
  }
  res.value = worst;
  res.pass = pass;
  res.details = {{"samples", 1000000}, {"pairs", rows}};
  return res;
}

inline CheckResult change_of_variables(const AcceptanceOptions& opt) {
  CheckResult res;
  Rng rng = stream(opt, 11);
  constexpr double radius = 0.05;
  constexpr std::size_t n = 500000;
  bool pass = true;
  double worst = 0.0;
  Json rows = Json::array();
  for (int i = 0; i < 10;) {
    const CartPoint y = eval(sample_domain(rng));
    if (distance_to_noninjective_image(y) < 2.0 * radius) continue;
    const auto rep = change_of_variables_check(y, radius, n, opt.seed + static_cast<std::uint64_t>(i));
    pass = pass && rep.pass;
    worst = std::max(worst, std::abs(rep.ratio - 1.0));
    rows.push_back({{"center", {y.x, y.y, y.z}}, {"integral", rep.integral.value}, {"std_error", rep.integral.std_error},
                    {"ball_volume", rep.ball_volume}, {"ratio", rep.ratio}, {"pass", rep.pass}});
    ++i;
  }
  res.value = worst;
  res.pass = pass;
  res.details = {{"radius", radius}, {"samples", n}, {"balls", rows}};
  return res;
}

/// Critical exponents for n = 3..8, k = 1..n-1, as printed in the reference
/// table (last entry of each row in parentheses there).
inline const std::vector<std::vector<ExponentValue>>& reference_exponent_table() {
  static const std::vector<std::vector<ExponentValue>> rows = {
      {{1, 2}, {1, 2}},
      {1, 1, 1},
      {{3, 2}, {2, 3}, {2, 3}, {3, 2}},
      {2, 1, 1, 1, 2},
      {{5, 2}, {4, 3}, {3, 4}, {3, 4}, {4, 3}, {5, 2}},
      {3, {5, 3}, 1, 1, 1, {5, 3}, 3},
  };
  return rows;
}

inline CheckResult exponent_tables(const AcceptanceOptions&) {
  CheckResult res;
  const auto t0 = std::chrono::steady_clock::now();
  const auto table = fig1_table(8);
  const auto& ref = reference_exponent_table();
  int mismatches = 0;
  bool shape = table.rows.size() == ref.size();
  for (std::size_t i = 0; shape && i < ref.size(); ++i) {
    shape = table.rows[i].entries.size() == ref[i].size();
    for (std::size_t j = 0; shape && j < ref[i].size(); ++j) {
      const auto& e = table.rows[i].entries[j];
      if (!(e.p == ref[i][j]) || e.parenthetical != (j + 1 == ref[i].size())) ++mismatches;
    }
  }
  const bool h1 = hausdorff_exponent(3, 2) == ExponentValue(1);
  const bool h2 = hausdorff_exponent(3, {1, 2}) == ExponentValue(2);
  const bool cell = cellularity_p(3) == ExponentValue(1, 2);
  const double elapsed = seconds_since(t0);
  res.value = mismatches;
  res.pass = shape && mismatches == 0 && h1 && h2 && cell && elapsed < 1.0;
  res.details = {{"table_mismatches", mismatches},
                 {"hausdorff_exponent(3,2)", hausdorff_exponent(3, 2).str()},
                 {"hausdorff_exponent(3,1/2)", hausdorff_exponent(3, {1, 2}).str()},
                 {"cellularity_p(3)", cellularity_p(3).str()}};
  return res;
}

inline CheckResult dimension_estimates(const AcceptanceOptions& opt) {
  CheckResult res;
  bool pass = true;
  double worst = 0.0;  // distance from 1 for curves, from 0 for points
  Json rows = Json::array();
  auto record = [&](const std::string& label, const Fiber& f, double lo, double hi) {
    const auto cloud = fiber_cloud(f, 5000);
    const auto bc = box_counting(cloud, default_scales(cloud));
    const bool ok = bc.dimension >= lo && bc.dimension <= hi;
    worst = std::max(worst, std::abs(bc.dimension - (f.kind == FiberKind::Point ? 0.0 : 1.0)));
    pass = pass && ok;
    rows.push_back({{"fiber", label}, {"kind", to_string(f.kind)}, {"points", cloud.size()}, {"dimension", bc.dimension}, {"pass", ok}});
  };
  record("-0*e_x", fiber({-0.0, 0.0, 0.0}), 0.9, 1.1);
  record("-1*e_x", fiber({-1.0, 0.0, 0.0}), 0.9, 1.1);
  record("-0.25*e_x", fiber({-0.25, 0.0, 0.0}), 0.9, 1.1);
  record("-0.5*e_x", fiber({-0.5, 0.0, 0.0}), 0.9, 1.1);
  Rng rng = stream(opt, 13);
  for (int i = 0; i < 3; ++i) {
    const CartPoint y = eval(sample_domain(rng));
    record("generic " + std::to_string(i), fiber(y), -1.0, 0.2);
  }
  res.value = worst;
  res.pass = pass;
  res.details = {{"curve_range", {0.9, 1.1}}, {"point_bound", 0.2}, {"fibers", rows}};
  return res;
}

inline CheckResult meshes(const AcceptanceOptions&) {
  CheckResult res;
  bool pass = true;
  Json rows = Json::array();
  for (double c : {0.25, 0.5, 0.75, 1.5, 2.0}) {
    const auto m = domain_mesh(c, 64);
    const long expected = c < 1.0 ? 0 : 2;
    const bool ok = m.euler_characteristic() == expected && m.closed_oriented() && m.signed_volume() > 0.0;
    pass = pass && ok;
    rows.push_back({{"c", c}, {"vertices", m.vertices.size()}, {"faces", m.faces.size()},
                    {"euler_characteristic", m.euler_characteristic()}, {"expected", expected}, {"pass", ok}});
  }
  double spread = 0.0;
  for (double c : {0.25, 0.5, 0.75}) spread = std::max(spread, ring_spread(image_mesh(c, 64)));
  pass = pass && spread <= 1e-12;
  res.value = spread;
  res.pass = pass;
  res.details = {{"resolution", 64}, {"domain", rows}, {"theta0_ring_spread", spread}, {"tolerance", 1e-12}};
  return res;
}

}  // namespace acceptance

inline const std::vector<AcceptanceCheck>& acceptance_checks() {
  static const std::vector<AcceptanceCheck> checks = {
      {1, "interface_continuity", acceptance::interface_continuity},
      {2, "derivative_correctness", acceptance::derivative_correctness},
      {3, "jacobian_consistency", acceptance::jacobian_consistency},
      {4, "integrability_threshold", acceptance::integrability_threshold},
      {5, "fiber_catalogue", acceptance::fiber_catalogue},
      {6, "inversion_round_trip", acceptance::inversion_round_trip},
      {7, "monotonicity_h0", acceptance::monotonicity},
      {8, "wedge_inequality", acceptance::wedge_inequality_check},
      {9, "pullback_norm_estimate", acceptance::pullback_norm_estimate},
      {10, "weak_commutation", acceptance::weak_commutation},
      {11, "change_of_variables", acceptance::change_of_variables},
      {12, "exponent_tables", acceptance::exponent_tables},
      {13, "dimension_estimates", acceptance::dimension_estimates},
      {14, "meshes", acceptance::meshes},
  };
  return checks;
}

/// Runs one check; an exception becomes a failed result carrying the message.
inline CheckResult run_check(const AcceptanceCheck& check, const AcceptanceOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult res;
  try {
    res = check.run(opt);
  } catch (const std::exception& e) {
    res = CheckResult{};
    res.details = {{"error", e.what()}};
  }
  res.id = check.id;
  res.name = check.name;
  res.seconds = acceptance::seconds_since(t0);
  return res;
}

}  // namespace fdlab

#include "fdlab/bingmap.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace fdlab;
using Catch::Approx;

namespace {

double max_abs_diff(const CartPoint& a, const CartPoint& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

CylPoint random_point(std::mt19937_64& rng, double rmax = 2.5, double zmax = 2.0) {
  std::uniform_real_distribution<double> ur(0.0, rmax), ut(-pi, pi), uz(-zmax, zmax);
  return CylPoint::make(ur(rng), ut(rng), uz(rng));
}

CylPoint random_smooth_point(std::mt19937_64& rng, double margin) {
  for (;;) {
    const auto p = random_point(rng);
    if (SingularLocus::smooth_margin(p) > margin) return p;
  }
}

}  // namespace

TEST_CASE("eval: unit circle collapses to the origin") {
  for (double theta : {-3.0, -1.0, 0.0, 0.5, 2.0, pi}) {
    const auto v = eval({1.0, theta, 0.0});
    CHECK(v.x == 0.0);
    CHECK(v.y == 0.0);
    CHECK(v.z == 0.0);
  }
}

TEST_CASE("eval: theta = 0 slice maps to the tip") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uc(0.0, 1.0), us(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double c = uc(rng);
    const auto v = eval(slice_param(c, 0.0, us(rng)));
    REQUIRE(max_abs_diff(v, {-c, 0.0, 0.0}) < 1e-12);
    // Inner ring {r = 1 - c, z = 0}.
    const auto w = eval(CylPoint::make(1.0 - c, -pi + 2.0 * pi * us(rng), 0.0));
    REQUIRE(max_abs_diff(w, {-c, 0.0, 0.0}) < 1e-12);
  }
}

TEST_CASE("eval: hand-substituted values") {
  // Square formula: a = 1/2, u = 0.5, c = 0.3.
  const auto a = eval({1.2, pi / 2, 0.1});
  CHECK(a.x == Approx(-0.05).margin(1e-15));
  CHECK(a.y == Approx(0.05).margin(1e-15));
  CHECK(a.z == Approx(0.125).margin(1e-15));
  // Cut formula: a = 1, s = 2.5.
  const auto b = eval({0.5, pi, 2.0});
  CHECK(b.x == Approx(-1.25));
  CHECK(b.y == Approx(1.25));
  CHECK(b.z == Approx(0.0).margin(1e-15));
}

TEST_CASE("eval: axis is well defined") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uz(-5.0, 5.0), ut(-pi, pi);
  for (int i = 0; i < 1000; ++i) {
    const double z = uz(rng);
    const auto expected = CartPoint{-(std::abs(z) + 1.0), 0.0, 0.0};
    // Both raw formulas at r = 0, for arbitrary theta.
    const double theta = ut(rng);
    REQUIRE(max_abs_diff(eval({0.0, theta, z}), expected) == 0.0);
  }
  CHECK(max_abs_diff(eval({0.0, 0.0, 0.0}), {-1.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("eval: reflection symmetries") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100000; ++i) {
    auto p = random_point(rng);
    if (p.theta == pi || p.theta == 0.0) continue;
    const auto v = eval(p);
    const auto vz = eval({p.r, p.theta, -p.z});
    REQUIRE(max_abs_diff(vz, {v.x, -v.y, v.z}) < 1e-12);
    const auto vt = eval({p.r, -p.theta, p.z});
    REQUIRE(max_abs_diff(vt, {v.x, v.y, -v.z}) < 1e-12);
  }
}

TEST_CASE("eval: continuity across the region interface and theta = pi") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0), ut(-pi, pi);
  for (int i = 0; i < 10000; ++i) {
    const double r = u(rng);
    const double theta = ut(rng);
    const double d = 1e-9;
    const auto in = eval({r, theta, r + d});
    const auto out = eval({r, theta, r - d});
    REQUIRE(max_abs_diff(in, out) < 1e-8);
  }
  const auto left = eval({1.3, pi, 0.4});
  const auto right = eval(CylPoint::make(1.3, pi + 1e-12, 0.4));
  CHECK(max_abs_diff(left, right) < 1e-10);
}

TEST_CASE("frame_differential at (0.9, pi, 0.4)") {
  const double a = 0.4 / (0.9 * pi);
  const Mat3 m = frame_differential({0.9, pi, 0.4});
  Mat3 expected;
  expected.col(0) = Vec3(1.0, 0.0, 0.0);
  expected.col(1) = a * Vec3(1.0, 1.0, -1.0);
  expected.col(2) = Vec3(0.0, 1.0, 0.0);
  CHECK((m - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(m.determinant() == Approx(a).epsilon(1e-14));
  CHECK(jacobian({0.9, pi, 0.4}) == Approx(a).epsilon(1e-14));
}

TEST_CASE("frame_differential rejects non-smooth points") {
  CHECK_THROWS_AS(frame_differential({1.0, 1.0, 0.5}), Error);
  CHECK_THROWS_AS(frame_differential({0.5, 1.0, 0.0}), Error);
  CHECK_THROWS_AS(frame_differential({0.5, 0.0, 0.3}), Error);
  CHECK_THROWS_AS(frame_differential({0.5, 1.0, 0.5}), Error);
  try {
    frame_differential({1.5, 1.0, 0.0});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularPoint);
  }
}

TEST_CASE("finite differences agree with the closed-form frame") {
  const CylPoint p{1.2, pi / 2, 0.1};
  const Mat3 exact = frame_differential(p);
  const Mat3 fd = fd_differential(p, 1e-5);
  CHECK((fd - exact).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("finite differences converge at second order") {
  std::mt19937_64 rng(6);
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    const auto p = random_smooth_point(rng, 0.2);
    const Mat3 exact = frame_differential(p);
    const double e1 = (fd_differential(p, 2e-2) - exact).norm();
    const double e2 = (fd_differential(p, 1e-2) - exact).norm();
    if (e1 < 1e-9) continue;  // locally polynomial of degree <= 2 in this chart
    ++checked;
    CHECK(e1 / e2 == Approx(4.0).epsilon(0.1));
  }
  CHECK(checked > 10);
}

TEST_CASE("fd_differential refuses stencils across strata") {
  CHECK_THROWS_AS(fd_differential({1.0 + 1e-6, 1.0, 0.5}, 1e-5), Error);
  // theta = pi is a kink of |theta|.
  CHECK_THROWS_AS(fd_differential({0.9, pi, 0.4}, 1e-5), Error);
}

TEST_CASE("jacobian closed forms") {
  CHECK(jacobian({0.8, pi / 2, 0.4}) == Approx(1.0 / (8.0 * pi)).epsilon(1e-14));
  CHECK(jacobian({0.5, pi / 2, 2.0}) == Approx(25.0 / (16.0 * pi)).epsilon(1e-14));
  CHECK(jacobian({2.0, pi / 2, 0.0}) == Approx(1.0 / (4.0 * pi)).epsilon(1e-14));
  // Degeneracy set.
  CHECK(jacobian({0.7, 0.0, 0.3}) == 0.0);
  CHECK(jacobian({1.7, 0.0, 0.3}) == 0.0);
  CHECK(jacobian({0.4, 1.0, 0.0}) == 0.0);
  CHECK(jacobian({1.0, 1.0, 0.0}) == 0.0);
  CHECK(jacobian({1.5, 1.0, 0.0}) > 0.0);
}

TEST_CASE("jacobian matches det of the frame and is positive") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20000; ++i) {
    const auto p = random_smooth_point(rng, 1e-3);
    const double j = jacobian(p);
    REQUIRE(j > 0.0);
    REQUIRE(std::abs(frame_differential(p).determinant() - j) / j < 1e-10);
  }
}

TEST_CASE("distortion") {
  SECTION("explicit matrix at (0.9, pi, 0.4)") {
    const double a = 0.4 / (0.9 * pi);
    Mat3 m;
    m.col(0) = Vec3(1.0, 0.0, 0.0);
    m.col(1) = a * Vec3(1.0, 1.0, -1.0);
    m.col(2) = Vec3(0.0, 1.0, 0.0);
    // Oracle: one-sided Jacobi SVD, independent of the eigen-solve path.
    const double smax = Eigen::JacobiSVD<Mat3>(m).singularValues()(0);
    CHECK(distortion({0.9, pi, 0.4}) == Approx(smax * smax * smax / a).epsilon(1e-12));
  }
  SECTION("bounded below by one") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 20000; ++i) {
      const auto p = random_smooth_point(rng, 1e-3);
      REQUIRE(distortion(p) >= 1.0);
    }
  }
  SECTION("K * theta^2 has a finite nonzero limit in the inner region") {
    std::vector<double> values;
    for (double theta : {1e-2, 1e-3, 1e-4, 1e-5}) {
      values.push_back(distortion({0.8, theta, 0.4}, 1e-7) * theta * theta);
    }
    CHECK(values.back() > 0.0);
    CHECK(std::isfinite(values.back()));
    CHECK(std::abs(values[3] - values[2]) / values[3] < 1e-3);
    CHECK(std::abs(values[2] - values[1]) / values[2] < 1e-2);
  }
  SECTION("degenerate Jacobian") {
    try {
      distortion({0.5, 1.0, 0.0}, 0.0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateJacobian);
    }
  }
}

TEST_CASE("singular locus distances") {
  CHECK(SingularLocus::to_half_plane_theta0({2.0, pi / 6, 0.0}) == Approx(1.0));
  CHECK(SingularLocus::to_half_plane_theta0({2.0, 3.0, 0.0}) == 2.0);
  CHECK(SingularLocus::to_half_plane_theta_pi({2.0, 3.0, 0.0}) == Approx(2.0 * std::sin(3.0)));
  CHECK(SingularLocus::to_cone({0.0, 0.0, 0.0}) == 0.0);
  CHECK(SingularLocus::to_cone({2.0, 0.0, 2.0}) == Approx(std::sqrt(2.0)));
  CHECK(SingularLocus::to_cone({1.0, 0.0, 0.0}) == Approx(std::sqrt(0.5)));
  CHECK(SingularLocus::degeneracy_margin({0.5, 1.0, 0.25}) == Approx(0.25));
  CHECK(SingularLocus::degeneracy_margin({1.5, 2.0, 0.0}) == Approx(0.5));
}

TEST_CASE("properness evidence on square tori") {
  for (double c = 0.25; c <= 4.0 + 1e-12; c += 0.25) {
    double min_norm = 1e300;
    double tip_distance = 1e300;
    for (int i = 0; i < 64; ++i) {
      const double theta = -pi + 2.0 * pi * (i + 0.5) / 64.0;
      for (int j = 0; j < 256; ++j) {
        const auto v = eval(slice_param(c, theta, j / 256.0));
        min_norm = std::min(min_norm, v.norm());
      }
    }
    for (int j = 0; j < 256; ++j) {
      const auto v = eval(slice_param(c, 0.0, j / 256.0));
      tip_distance = std::min(tip_distance, distance(v, {-c, 0.0, 0.0}));
    }
    CHECK(min_norm >= c / 4.0);
    CHECK(tip_distance < 1e-12);
  }
}

TEST_CASE("fiber catalogue") {
  SECTION("origin") {
    const auto f = fiber({0.0, 0.0, 0.0});
    CHECK(f.kind == FiberKind::Circle);
    REQUIRE(f.components.size() == 1);
    const auto p = f.components[0].at(0.3);
    CHECK(p.r == 1.0);
    CHECK(p.z == 0.0);
  }
  SECTION("figure-eight at t = 0.5") {
    const auto f = fiber({-0.5, 0.0, 0.0});
    CHECK(f.kind == FiberKind::FigureEight);
    REQUIRE(f.components.size() == 2);
    REQUIRE(f.wedge.has_value());
    CHECK(f.wedge->x == 0.5);
    CHECK(f.wedge->y == 0.0);
    CHECK(f.wedge->z == 0.0);
    // The components share exactly the wedge point.
    int shared = 0;
    for (int i = 0; i < 400; ++i) {
      const auto a = cyl_to_cart(f.components[0].at(i / 400.0));
      for (int j = 0; j < 400; ++j) {
        const auto b = cyl_to_cart(f.components[1].at(j / 400.0));
        if (distance(a, b) < 1e-9) {
          ++shared;
          CHECK(distance(a, *f.wedge) < 1e-9);
        }
      }
    }
    CHECK(shared >= 1);
  }
  SECTION("t = 1 is a single loop through the axis") {
    const auto f = fiber({-1.0, 0.0, 0.0});
    CHECK(f.kind == FiberKind::Circle);
    bool touches_axis = false;
    for (int i = 0; i < 400; ++i) touches_axis |= f.components[0].at(i / 400.0).r == 0.0;
    CHECK(touches_axis);
  }
  SECTION("arc at t = 2") {
    const auto f = fiber({-2.0, 0.0, 0.0});
    CHECK(f.kind == FiberKind::Arc);
    const auto a = cyl_to_cart(f.components[0].at(0.0));
    const auto b = cyl_to_cart(f.components[0].at(1.0));
    CHECK(a.x == 0.0);
    CHECK(a.y == 0.0);
    CHECK(a.z == 1.0);
    CHECK(b.z == -1.0);
  }
  SECTION("residuals") {
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.7}) {
      const auto f = fiber({-t, 0.0, 0.0});
      for (const auto& comp : f.components) {
        for (int i = 0; i <= 1000; ++i) {
          const auto v = eval(comp.at(i / 1000.0));
          REQUIRE(distance(v, {-t, 0.0, 0.0}) < 1e-9);
        }
      }
    }
  }
  SECTION("generic target is a point") {
    const auto f = fiber({-0.05, 0.05, 0.125});
    CHECK(f.kind == FiberKind::Point);
    const auto x = cyl_to_cart(f.components[0].at(0.0));
    CHECK(distance(x, cyl_to_cart({1.2, pi / 2, 0.1})) < 1e-9);
  }
}

TEST_CASE("invert") {
  SECTION("positive x-axis comes from theta = pi, z = 0") {
    const auto x = invert({0.5, 0.0, 0.0});
    CHECK(x.r == Approx(1.5).margin(1e-10));
    CHECK(std::abs(x.theta) == Approx(pi).margin(1e-10));
    CHECK(x.z == Approx(0.0).margin(1e-10));
  }
  SECTION("half-line is rejected") {
    try {
      invert({-0.5, 0.0, 0.0});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::OnNonInjectiveSet);
    }
  }
  SECTION("round trip") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 2000; ++i) {
      const auto p = random_point(rng);
      const auto y = eval(p);
      const auto q = invert(y);
      REQUIRE(distance(cyl_to_cart(q), cyl_to_cart(p)) < 1e-8);
    }
  }
}

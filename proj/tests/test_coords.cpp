#include "fdlab/bingmap.hpp"
#include "fdlab/coords.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace fdlab;
using Catch::Approx;

TEST_CASE("cyl_to_cart examples") {
  const auto a = cyl_to_cart({1.0, 0.0, 0.0});
  CHECK(a.x == 1.0);
  CHECK(a.y == 0.0);
  CHECK(a.z == 0.0);

  const auto b = cyl_to_cart({1.0, pi / 2, 2.0});
  CHECK(b.x == Approx(0.0).margin(1e-15));
  CHECK(b.y == Approx(1.0));
  CHECK(b.z == 2.0);

  for (double theta : {-2.0, 0.3, pi}) {
    const auto c = cyl_to_cart({0.0, theta, 5.0});
    CHECK(c.x == 0.0);
    CHECK(c.y == 0.0);
    CHECK(c.z == 5.0);
  }
}

TEST_CASE("cart_to_cyl branch and axis") {
  const auto a = cart_to_cyl({-1.0, 0.0, 0.0});
  CHECK(a.r == 1.0);
  CHECK(a.theta == pi);

  // Negative zero must not select -pi.
  const auto a2 = cart_to_cyl({-1.0, -0.0, 0.0});
  CHECK(a2.theta == pi);

  const auto b = cart_to_cyl({0.0, -1.0, 0.0});
  CHECK(b.r == 1.0);
  CHECK(b.theta == Approx(-pi / 2));

  const auto c = cart_to_cyl({0.0, 0.0, 3.0});
  CHECK(c.r == 0.0);
  CHECK(c.theta == 0.0);
  CHECK(c.z == 3.0);
}

TEST_CASE("CylPoint::make canonicalizes") {
  CHECK(CylPoint::make(1.0, -pi, 0.0).theta == pi);
  CHECK(CylPoint::make(1.0, 3.0 * pi, 0.0).theta == Approx(pi));
  const auto reflected = CylPoint::make(-0.5, 0.25, 1.0);
  CHECK(reflected.r == 0.5);
  CHECK(reflected.theta == Approx(0.25 + pi - 2.0 * pi));
  CHECK(CylPoint::make(0.0, 1.0, 2.0).theta == 0.0);
}

TEST_CASE("round trip on r > 0 keeps the branch") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ur(1e-3, 5.0), ut(-pi, pi), uz(-5.0, 5.0);
  for (int i = 0; i < 100000; ++i) {
    CylPoint p = CylPoint::make(ur(rng), ut(rng), uz(rng));
    const auto q = cart_to_cyl(cyl_to_cart(p));
    REQUIRE(q.theta > -pi);
    REQUIRE(q.theta <= pi);
    REQUIRE(std::abs(q.r - p.r) < 1e-12);
    REQUIRE(std::abs(q.z - p.z) < 1e-12);
    double dt = std::abs(q.theta - p.theta);
    dt = std::min(dt, 2.0 * pi - dt);
    REQUIRE(dt < 1e-12);
  }
}

TEST_CASE("torus_level examples") {
  for (double theta : {0.0, 1.0, pi}) {
    CHECK(torus_level({1.0, theta, 0.0}) == 0.0);
    CHECK(torus_level({0.5, theta, 0.5}) == 1.0);
    CHECK(torus_level({2.0, theta, 0.25}) == 1.25);
  }
}

TEST_CASE("classify_region examples") {
  CHECK(classify_region({0.5, 1.0, 2.0}) == Region::Cut);
  CHECK(classify_region({1.5, 1.0, 0.1}) == Region::Square);
  CHECK(classify_region({0.5, 1.0, 0.5}) == Region::Square);
  CHECK(classify_region({0.5, 1.0, -0.5}) == Region::Square);
  CHECK(classify_region({1.0, 1.0, 1.5}) == Region::Cut);
  CHECK(classify_region({0.0, 0.0, 0.0}) == Region::Square);
}

TEST_CASE("CUT implies the CONE Jacobian case") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ur(0.0, 2.0), ut(-pi, pi), uz(-2.0, 2.0);
  for (int i = 0; i < 100000; ++i) {
    const CylPoint p{ur(rng), ut(rng), uz(rng)};
    if (classify_region(p) == Region::Cut) REQUIRE(classify_jacobian_case(p) == JacobianCase::Cone);
  }
}

TEST_CASE("Jacobian case tie-break") {
  CHECK(classify_jacobian_case({0.5, 1.0, 0.5}) == JacobianCase::Inner);
  CHECK(classify_jacobian_case({1.0, 1.0, 0.3}) == JacobianCase::Inner);
  CHECK(classify_jacobian_case({1.0, 1.0, 2.0}) == JacobianCase::Cone);
  CHECK(classify_jacobian_case({1.2, 1.0, 2.0}) == JacobianCase::Outer);
  CHECK(classify_jacobian_case({0.2, 1.0, 0.7}) == JacobianCase::Cone);
}

TEST_CASE("slice_param examples") {
  const auto outer = slice_param(0.5, pi, 0.0);
  CHECK(outer.r == 1.5);
  CHECK(outer.theta == pi);
  CHECK(outer.z == 0.0);

  // Level 2 meets the axis at z = 1 (r = 0 in |r - 1| + |z| = 2).
  const auto [top, bottom] = slice_clip_params(2.0);
  const auto clip = slice_param(2.0, pi, top);
  CHECK(clip.r == 0.0);
  CHECK(clip.z == 1.0);
  const auto clip_low = slice_param(2.0, pi, bottom);
  CHECK(clip_low.r == Approx(0.0).margin(1e-15));
  CHECK(clip_low.z == Approx(-1.0));

  for (double s : {0.0, 0.1, 0.5, 0.99}) {
    const auto p = slice_param(0.0, 0.7, s);
    CHECK(p.r == 1.0);
    CHECK(p.z == 0.0);
  }
}

TEST_CASE("slice_param stays on its level set") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> us(0.0, 1.0), uc(0.0, 4.0), ut(-pi, pi);
  for (int i = 0; i < 100000; ++i) {
    const double c = uc(rng);
    const auto p = slice_param(c, ut(rng), us(rng));
    if (c <= 1.0 || p.r > 0.0) {
      REQUIRE(std::abs(torus_level(p) - c) < 1e-12);
    } else {
      // Clipped onto the axis segment.
      REQUIRE(p.r == 0.0);
      REQUIRE(std::abs(p.z) <= c - 1.0 + 1e-12);
    }
  }
}

TEST_CASE("slice_param goes counterclockwise from the outer corner") {
  const double c = 0.5;
  const auto a = slice_param(c, 0.0, 0.125);  // outer -> top
  CHECK(a.r > 1.0);
  CHECK(a.z > 0.0);
  const auto b = slice_param(c, 0.0, 0.375);  // top -> inner
  CHECK(b.r < 1.0);
  CHECK(b.z > 0.0);
  const auto top = slice_param(c, 0.0, 0.25);
  CHECK(top.r == 1.0);
  CHECK(top.z == c);
}

TEST_CASE("interface r = |z| <= 1: both formulas agree") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ur(0.0, 1.0), ut(-pi, pi), us(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double r = ur(rng);
    const double z = us(rng) < 0.5 ? r : -r;
    const double theta = ut(rng);
    const auto a = detail::eval_square_formula(r, theta, z);
    const auto b = detail::eval_cut_formula(r, theta, z);
    worst = std::max({worst, std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
  }
  CHECK(worst < 1e-12);
}

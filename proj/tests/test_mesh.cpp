#include "fdlab/mesh.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>

using namespace fdlab;

TEST_CASE("domain mesh topology") {
  for (double c : {0.25, 0.5, 0.75}) {
    const auto m = domain_mesh(c, 32);
    CHECK(m.euler_characteristic() == 0);
    CHECK(m.closed_oriented());
    CHECK(m.vertices.size() == 32u * 32u);
    CHECK(m.faces.size() == 2u * 32u * 32u);
    CHECK(m.signed_volume() > 0.0);
  }
  for (double c : {1.5, 2.0, 4.0}) {
    const auto m = domain_mesh(c, 18);  // M = 20
    CHECK(m.euler_characteristic() == 2);
    CHECK(m.closed_oriented());
    CHECK(m.vertices.size() == 18u * 19u + 2u);
    CHECK(m.faces.size() == 2u * 18u * 19u);
    CHECK(m.signed_volume() > 0.0);
  }
  const auto pinched = domain_mesh(1.0, 16);
  CHECK(pinched.vertices.size() == 16u * 15u + 1u);
  CHECK(pinched.euler_characteristic() == 1);
}

TEST_CASE("domain mesh vertices lie on T_c") {
  for (double c : {0.3, 1.0, 2.5}) {
    const auto m = domain_mesh(c, 24);
    for (const auto& u : m.params) CHECK(torus_level(u) == Catch::Approx(c).epsilon(1e-14));
  }
}

TEST_CASE("enclosed volume converges to the solid of revolution") {
  // Torus with square cross-section of half-diagonal c: area 2c^2, centroid at r = 1.
  const double c = 0.5;
  const double exact = 2.0 * pi * 1.0 * 2.0 * c * c;
  const auto m = domain_mesh(c, 256);
  CHECK(m.signed_volume() == Catch::Approx(exact).epsilon(1e-3));
}

TEST_CASE("image mesh collapses the theta = 0 ring") {
  for (double c : {0.25, 0.5, 0.75}) {
    const auto m = image_mesh(c, 32);
    CHECK(ring_spread(m) <= 1e-12);
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
      if (m.params[i].theta == 0.0) CHECK((m.vertices[i] - Vec3(-c, 0.0, 0.0)).norm() <= 1e-12);
  }
  CHECK(ring_spread(domain_mesh(0.5, 32)) > 0.5);
}

TEST_CASE("level zero") {
  CHECK_THROWS_AS(domain_mesh(0.0, 32), Error);
  try {
    domain_mesh(0.0, 32);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateLevel);
  }
  const auto circle = level_zero_polyline(32, false);
  REQUIRE(circle.polylines.size() == 1);
  CHECK(circle.polylines[0].size() == 33u);
  for (const auto& v : circle.vertices) CHECK(v.norm() == Catch::Approx(1.0));
  const auto image = level_zero_polyline(32, true);
  for (const auto& v : image.vertices) CHECK(v.norm() == 0.0);
}

TEST_CASE("preconditions") {
  CHECK_THROWS_AS(domain_mesh(-0.5, 32), Error);
  CHECK_THROWS_AS(domain_mesh(0.5, 15), Error);
}

TEST_CASE("OBJ round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "fdlab_test_mesh";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "t.obj").string();
  const auto m = domain_mesh(2.0, 16);
  write_obj(m, path);
  const auto back = read_obj(path);
  CHECK(back.vertices.size() == m.vertices.size());
  CHECK(back.faces == m.faces);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK(back.vertices[i] == m.vertices[i]);
  CHECK(back.euler_characteristic() == 2);

  write_obj(level_zero_polyline(16, false), path);
  CHECK(read_obj(path).polylines.size() == 1);
  CHECK_THROWS_AS(write_obj(m, (dir / "missing" / "t.obj").string()), Error);
  std::filesystem::remove_all(dir);
}

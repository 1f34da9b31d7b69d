#include <catch_amalgamated.hpp>

#include "fdlab/mesh.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Run {
  int rc = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path work_dir() {
  fs::path d = FDLAB_WORK_DIR;
  fs::create_directories(d);
  return d;
}

Run cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = work_dir();
  const fs::path out = dir / ("run" + std::to_string(counter) + ".out");
  const fs::path err = dir / ("run" + std::to_string(counter++) + ".err");
  const std::string cmd = std::string("'") + FDLAB_CLI_PATH + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

Json golden(const std::string& name) { return Json::parse(slurp(fs::path(FDLAB_GOLDEN_DIR) / name)); }

// Every key of `expected` must be in `actual`; numbers within tol.
void require_subset(const Json& expected, const Json& actual, double tol, const std::string& path = "$") {
  INFO(path);
  if (expected.is_object()) {
    REQUIRE(actual.is_object());
    for (const auto& [k, v] : expected.items()) {
      REQUIRE(actual.contains(k));
      require_subset(v, actual[k], tol, path + "." + k);
    }
  } else if (expected.is_array()) {
    REQUIRE(actual.is_array());
    REQUIRE(actual.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) require_subset(expected[i], actual[i], tol, path + "[" + std::to_string(i) + "]");
  } else if (expected.is_number()) {
    REQUIRE(actual.is_number());
    REQUIRE(std::abs(actual.get<double>() - expected.get<double>()) <= tol);
  } else {
    REQUIRE(actual == expected);
  }
}

}  // namespace

TEST_CASE("table csv matches the figure byte for byte") {
  const auto r = cli("table --nmax 8");
  REQUIRE(r.rc == 0);
  REQUIRE(r.out == slurp(fs::path(FDLAB_GOLDEN_DIR) / "table_nmax8.csv"));

  const auto text = cli("table --nmax 3 --format text");
  REQUIRE(text.rc == 0);
  REQUIRE(text.out == "n = 3: 1/2 (1/2)\n");
}

TEST_CASE("eval report") {
  const auto r = cli("eval --point 1.2,1.5708,0.1");
  REQUIRE(r.rc == 0);
  const Json report = Json::parse(r.out);
  require_subset(golden("eval_point.json"), report, 1e-4);

  std::vector<std::string> keys;
  for (const auto& [k, v] : report.items()) keys.push_back(k);
  REQUIRE(keys == std::vector<std::string>{"schema", "version", "command", "config", "result", "checks", "pass"});

  // Cartesian input of the same point.
  const auto c = cli("eval --cart 0,1.2,0.1");
  REQUIRE(c.rc == 0);
  const Json rc = Json::parse(c.out);
  for (int i = 0; i < 3; ++i)
    REQUIRE(rc["result"]["h"][i].get<double>() == Catch::Approx(report["result"]["h"][i].get<double>()).margin(1e-4));
}

TEST_CASE("fiber report") {
  const auto r = cli("fiber --target=-0.5,0,0");
  REQUIRE(r.rc == 0);
  const Json report = Json::parse(r.out);
  require_subset(golden("fiber_figure_eight.json"), report, 1e-12);
  REQUIRE(report["result"]["max_residual"].get<double>() < 1e-9);

  const auto csv = cli("fiber --target 0.5,0,0 --samples 5 --format csv");
  REQUIRE(csv.rc == 0);
  REQUIRE(csv.out.rfind("component,s,x,y,z\n", 0) == 0);
  REQUIRE(std::count(csv.out.begin(), csv.out.end(), '\n') == 6);
}

TEST_CASE("exit codes") {
  SECTION("usage errors") {
    CHECK(cli("").rc == 2);
    CHECK(cli("bogus").rc == 2);
    CHECK(cli("eval").rc == 2);
    CHECK(cli("eval --point 1,2").rc == 2);
    CHECK(cli("eval --point 1,2,3 --cart 1,2,3").rc == 2);
    CHECK(cli("eval --point 1,2,3 --format csv").rc == 2);
    CHECK(cli("eval --point 1,2,3 --format xml").rc == 2);
    CHECK(cli("table --nmax 2").rc == 2);
    CHECK(cli("verify-all --only 99").rc == 2);
    CHECK(cli("export-mesh --c 0.5").rc == 2);
  }
  SECTION("precondition errors") {
    const auto r = cli("invert --target=-0.5,0,0");
    CHECK(r.rc == 2);
    CHECK(r.out.empty());
    CHECK(r.err.find("ON_NONINJECTIVE_SET") != std::string::npos);
  }
  SECTION("failed checks") {
    const std::string data = "fit --eps 1e-2,1e-3,1e-4,1e-5,1e-6 --values 1,2,3,4,5";
    const auto ok = cli(data + " --expect LOG");
    CHECK(ok.rc == 0);
    const auto bad = cli(data + " --expect CONSTANT");
    CHECK(bad.rc == 1);
    const Json report = Json::parse(bad.out);
    CHECK_FALSE(report["pass"].get<bool>());
    CHECK_FALSE(report["checks"][0]["pass"].get<bool>());
  }
  SECTION("io errors") {
    const auto r = cli("export-mesh --c 0.5 --mesh '" + (work_dir() / "missing" / "m.obj").string() + "'");
    CHECK(r.rc == 1);
    CHECK(r.err.find("IO_ERROR") != std::string::npos);
  }
  SECTION("version") {
    const auto r = cli("--version");
    CHECK(r.rc == 0);
    CHECK(r.out.find("0.") != std::string::npos);
  }
}

TEST_CASE("defaults are echoed in the config") {
  const auto r = cli("integrate --p 0.3 --eps 1e-2 --samples 1000");
  REQUIRE(r.rc == 0);
  const Json cfg = Json::parse(r.out)["config"];
  CHECK(cfg["seed"] == 0);
  CHECK(cfg["margin"] == 0.05);
  CHECK(cfg["domain"].size() == 6);
  CHECK(cfg["format"] == "json");
}

TEST_CASE("integrate csv is seed deterministic") {
  const std::string args = "integrate --p 0.3,0.5 --eps 1e-2,1e-3 --samples 4000 --format csv";
  const auto a = cli(args + " --seed 7");
  const auto b = cli(args + " --seed 7");
  const auto c = cli(args + " --seed 8");
  REQUIRE(a.rc == 0);
  REQUIRE(a.out.rfind("p,eps,value,stderr,inner,cone,outer\n0.3,0.01,", 0) == 0);
  REQUIRE(std::count(a.out.begin(), a.out.end(), '\n') == 5);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
}

TEST_CASE("components and fold control") {
  const auto r = cli("components --target 0.5,0.5,0.5 --radius 0.1 --resolution 48 --expect 1");
  REQUIRE(r.rc == 0);
  CHECK(Json::parse(r.out)["result"]["components"] == 1);

  const auto fold = cli("components --map fold --target 1,0,0 --radius 0.1 --resolution 96 --expect 2");
  CHECK(fold.rc == 0);
}

TEST_CASE("export-mesh objs") {
  const fs::path dir = work_dir();
  const int n = 32;
  const int m = fdlab::mesh_profile_segments(n);

  SECTION("torus") {
    const fs::path p = dir / "torus.obj";
    const auto r = cli("export-mesh --c 0.5 --resolution 32 --mesh '" + p.string() + "'");
    REQUIRE(r.rc == 0);
    const auto mesh = fdlab::read_obj(p.string());
    CHECK(mesh.vertices.size() == static_cast<std::size_t>(n * m));
    CHECK(mesh.faces.size() == static_cast<std::size_t>(2 * n * m));
    CHECK(mesh.euler_characteristic() == 0);
    CHECK(mesh.closed_oriented());
    CHECK(mesh.signed_volume() > 0.0);
  }
  SECTION("sphere") {
    const fs::path p = dir / "sphere.obj";
    REQUIRE(cli("export-mesh --c 2 --resolution 32 --mesh '" + p.string() + "'").rc == 0);
    const auto mesh = fdlab::read_obj(p.string());
    CHECK(mesh.vertices.size() == static_cast<std::size_t>(n * (m - 1) + 2));
    CHECK(mesh.euler_characteristic() == 2);
    CHECK(mesh.closed_oriented());
  }
  SECTION("image ring collapses") {
    const fs::path p = dir / "image.obj";
    REQUIRE(cli("export-mesh --c 0.5 --resolution 32 --which image --mesh '" + p.string() + "'").rc == 0);
    const auto mesh = fdlab::read_obj(p.string());
    // Ring 0 is the half-plane theta = 0: the first m vertices.
    for (int i = 0; i < m; ++i) {
      CHECK(mesh.vertices[i].x() == Catch::Approx(-0.5).margin(1e-12));
      CHECK(std::abs(mesh.vertices[i].y()) <= 1e-12);
      CHECK(std::abs(mesh.vertices[i].z()) <= 1e-12);
    }
  }
  SECTION("level zero polyline") {
    const fs::path p = dir / "level0.obj";
    const auto r = cli("export-mesh --c 0 --resolution 32 --mesh '" + p.string() + "'");
    REQUIRE(r.rc == 0);
    CHECK(Json::parse(r.out)["result"]["status"] == "DEGENERATE_LEVEL");
    const auto mesh = fdlab::read_obj(p.string());
    CHECK(mesh.faces.empty());
    REQUIRE(mesh.polylines.size() == 1);
    CHECK(mesh.polylines[0].size() == static_cast<std::size_t>(n + 1));
    CHECK(mesh.polylines[0].front() == mesh.polylines[0].back());
    for (const auto& v : mesh.vertices) CHECK(std::hypot(v.x(), v.y()) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("verify-all is byte deterministic") {
  const auto a = cli("verify-all --only 12,14 --seed 0");
  const auto b = cli("verify-all --only 12,14 --seed 0");
  REQUIRE(a.rc == 0);
  CHECK(a.out == b.out);
  const Json report = Json::parse(a.out);
  CHECK(report["checks"].size() == 2);
  CHECK(report["result"]["passed"] == 2);
  CHECK_FALSE(report.contains("timings"));
  CHECK(a.err.find("PASS 12") != std::string::npos);

  const auto t = cli("verify-all --only 12 --timings");
  REQUIRE(t.rc == 0);
  CHECK(Json::parse(t.out)["timings"].contains("total_s"));

  const auto csv = cli("verify-all --only 12 --format csv");
  CHECK(csv.out == "id,name,value,stderr,pass\n12,exponent_tables,0,0,1\n");
}

TEST_CASE("report to a file") {
  const fs::path p = work_dir() / "report.json";
  const auto r = cli("-o '" + p.string() + "' table --nmax 3 --format json");
  REQUIRE(r.rc == 0);
  CHECK(r.out.empty());
  const Json report = Json::parse(slurp(p));
  CHECK(report["result"]["rows"][0]["entries"][0]["p"] == "1/2");
}

// fdlab command-line front end. See docs/report-schema.md for the output
// formats and exit codes.

#include "fdlab/acceptance.hpp"
#include "fdlab/fdlab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace fdlab;

namespace {

constexpr const char* schema_id = "fdlab-report/1";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, const std::string& what, std::size_t expected = 0) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const char* b = item.data();
    const char* e = item.data() + item.size();
    while (b < e && *b == ' ') ++b;
    if (b < e && *b == '+') ++b;
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || !std::isfinite(v)) throw UsageError(what + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(what + ": empty list");
  if (expected && out.size() != expected)
    throw UsageError(what + ": expected " + std::to_string(expected) + " comma-separated numbers");
  return out;
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json cart_json(const CartPoint& p) { return Json::array({p.x, p.y, p.z}); }
Json cyl_json(const CylPoint& p) { return Json::array({p.r, p.theta, p.z}); }

Json mat_json(const Mat3& m) {
  Json out = Json::array();
  for (int i = 0; i < 3; ++i) out.push_back(Json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return out;
}

Json regions_json(const IntegralEstimate& e) {
  return {{"INNER", e.regions[0]}, {"CONE", e.regions[1]}, {"OUTER", e.regions[2]}};
}

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Outcome {
  Json config = Json::object();
  Json result = Json::object();
  Json checks = Json::array();
  std::string csv;  // filled when the command supports CSV
  bool pass = true;

  void add_check(const std::string& name, double value, double std_error, bool ok) {
    checks.push_back({{"name", name}, {"value", value}, {"stderr", std_error}, {"pass", ok}});
    pass = pass && ok;
  }
};

// Options shared by several subcommands.
struct Options {
  std::uint64_t seed = 0;
  std::string output = "-";
  std::string format;
  bool timings = false;

  std::string point, cart, target;
  std::string ps = "0.3,0.4,0.45,0.5";
  std::string eps = "1e-2,1e-3,1e-4,1e-5,1e-6";
  std::string values;
  std::string domain = "0,2,-3.141592653589793,3.141592653589793,-1,1";
  std::size_t samples = 1000000;
  double margin = 0.05;
  double p_energy = 3.0, q_energy = 1.0, eps_energy = 1e-3;
  double radius = 0.1;
  int resolution = 128;
  std::string map = "bing";
  int expect_components = -1;
  std::string expect_model;
  std::size_t points = 5000;
  int scale_first = 2, scale_last = 9;
  int nmax = 8;
  int fiber_samples = 0;
  std::vector<int> only;
  double level = 0.5;
  int mesh_resolution = 64;
  std::string which = "domain";
  std::string mesh_path;
};

CylPoint input_point(const Options& o) {
  if (!o.point.empty()) {
    const auto v = parse_list(o.point, "--point", 3);
    return CylPoint::make(v[0], v[1], v[2]);
  }
  if (!o.cart.empty()) {
    const auto v = parse_list(o.cart, "--cart", 3);
    return cart_to_cyl({v[0], v[1], v[2]});
  }
  throw UsageError("one of --point r,theta,z or --cart x,y,z is required");
}

CartPoint input_target(const Options& o) {
  if (o.target.empty()) throw UsageError("--target x,y,z is required");
  const auto v = parse_list(o.target, "--target", 3);
  return {v[0], v[1], v[2]};
}

CylBox input_domain(const Options& o) {
  const auto v = parse_list(o.domain, "--domain", 6);
  CylBox b{v[0], v[1], v[2], v[3], v[4], v[5]};
  if (b.empty()) throw UsageError("--domain: empty box");
  return b;
}

std::vector<double> input_eps(const Options& o) {
  auto e = parse_list(o.eps, "--eps");
  for (double x : e)
    if (!(x > 0.0)) throw UsageError("--eps: values must be positive");
  std::sort(e.begin(), e.end(), std::greater<>());
  return e;
}

Json point_config(const Options& o) {
  Json c = Json::object();
  if (!o.point.empty()) c["point"] = o.point;
  if (!o.cart.empty()) c["cart"] = o.cart;
  return c;
}

Json input_json(const CylPoint& u) { return {{"cyl", cyl_json(u)}, {"cart", cart_json(cyl_to_cart(u))}}; }

// --- subcommands -----------------------------------------------------------

Outcome cmd_eval(const Options& o) {
  Outcome out;
  out.config = point_config(o);
  const CylPoint u = input_point(o);
  out.result = {{"input", input_json(u)},
                {"h", cart_json(eval(u))},
                {"region", to_string(classify_region(u))},
                {"jacobian_case", to_string(classify_jacobian_case(u))},
                {"torus_level", torus_level(u)}};
  return out;
}

Outcome cmd_jac(const Options& o) {
  Outcome out;
  out.config = point_config(o);
  const CylPoint u = input_point(o);
  const Mat3 frame = frame_differential_ae(u);
  out.result = {{"input", input_json(u)},
                {"jacobian", jacobian(u)},
                {"jacobian_case", to_string(classify_jacobian_case(u))},
                {"frame_differential", mat_json(frame)},
                {"det_frame_differential", frame.determinant()},
                {"smooth_margin", SingularLocus::smooth_margin(u)},
                {"degeneracy_margin", SingularLocus::degeneracy_margin(u)}};
  return out;
}

Outcome cmd_distortion(const Options& o) {
  Outcome out;
  out.config = point_config(o);
  const CylPoint u = input_point(o);
  const Mat3 frame = frame_differential_ae(u);
  const double norm = spectral_norm(frame);
  const double jac = jacobian(u);
  out.result = {{"input", input_json(u)}, {"operator_norm", norm}, {"jacobian", jac}};
  if (jac > 0.0) out.result["distortion"] = norm * norm * norm / jac;
  else out.result["distortion"] = nullptr;
  out.result["smooth_margin"] = SingularLocus::smooth_margin(u);
  return out;
}

Outcome cmd_fiber(const Options& o) {
  Outcome out;
  const CartPoint y = input_target(o);
  out.config = {{"target", o.target}, {"samples", o.fiber_samples}};
  const Fiber f = fiber(y);
  double residual = 0.0;
  Json comps = Json::array();
  out.csv = "component,s,x,y,z\n";
  for (std::size_t c = 0; c < f.components.size(); ++c) {
    const auto& comp = f.components[c];
    for (int i = 0; i <= 64; ++i) residual = std::max(residual, (eval(comp.at(i / 64.0)).vec() - y.vec()).norm());
    Json entry = {{"description", comp.description}};
    if (o.fiber_samples > 0) {
      Json pts = Json::array();
      for (int i = 0; i < o.fiber_samples; ++i) {
        const double s = o.fiber_samples == 1 ? 0.0 : static_cast<double>(i) / (o.fiber_samples - 1);
        const CartPoint x = cyl_to_cart(comp.at(s));
        pts.push_back(cart_json(x));
        out.csv += std::to_string(c) + "," + num(s) + "," + num(x.x) + "," + num(x.y) + "," + num(x.z) + "\n";
      }
      entry["samples"] = pts;
    }
    comps.push_back(entry);
  }
  out.result = {{"target", cart_json(y)}, {"kind", to_string(f.kind)}};
  out.result["wedge"] = f.wedge ? cart_json(*f.wedge) : Json(nullptr);
  out.result["components"] = comps;
  out.result["max_residual"] = residual;
  return out;
}

Outcome cmd_invert(const Options& o) {
  Outcome out;
  const CartPoint y = input_target(o);
  out.config = {{"target", o.target}, {"seed", o.seed}};
  InvertOptions opt;
  opt.seed = o.seed;
  const CylPoint u = invert(y, opt);
  out.result = {{"target", cart_json(y)}, {"point", input_json(u)}, {"residual", (eval(u).vec() - y.vec()).norm()}};
  return out;
}

Outcome cmd_integrate(const Options& o) {
  Outcome out;
  const auto ps = parse_list(o.ps, "--p");
  const auto eps = input_eps(o);
  const CylBox domain = input_domain(o);
  out.config = {{"p", ps}, {"eps", eps}, {"domain", parse_list(o.domain, "--domain")}, {"margin", o.margin},
                {"samples", o.samples}, {"seed", o.seed}};
  std::vector<ExclusionTube> tubes;
  for (double e : eps) tubes.push_back({e, e, o.margin});
  const auto sweep = integrate_Kp_sweep(ps, domain, tubes, o.samples, o.seed);
  Json rows = Json::array();
  out.csv = "p,eps,value,stderr,inner,cone,outer\n";
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t t = 0; t < eps.size(); ++t) {
      const auto& e = sweep.estimates[i][t];
      rows.push_back({{"p", ps[i]}, {"eps", eps[t]}, {"value", e.value}, {"stderr", e.std_error}, {"regions", regions_json(e)}});
      out.csv += num(ps[i]) + "," + num(eps[t]) + "," + num(e.value) + "," + num(e.std_error) + "," + num(e.regions[0]) +
                 "," + num(e.regions[1]) + "," + num(e.regions[2]) + "\n";
    }
  out.result = {{"estimates", rows}};
  return out;
}

Outcome cmd_fit(const Options& o) {
  Outcome out;
  const auto eps = input_eps(o);
  std::vector<std::pair<double, double>> data;
  out.config = {{"eps", eps}};
  if (!o.values.empty()) {
    // Values are given in the order of --eps as typed.
    const auto typed = parse_list(o.eps, "--eps");
    const auto vals = parse_list(o.values, "--values", typed.size());
    for (std::size_t i = 0; i < typed.size(); ++i) data.push_back({typed[i], vals[i]});
    std::sort(data.begin(), data.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    out.config["values"] = vals;
  } else {
    const auto ps = parse_list(o.ps, "--p", 1);
    const CylBox domain = input_domain(o);
    out.config["p"] = ps[0];
    out.config["domain"] = parse_list(o.domain, "--domain");
    out.config["margin"] = o.margin;
    out.config["samples"] = o.samples;
    out.config["seed"] = o.seed;
    std::vector<ExclusionTube> tubes;
    for (double e : eps) tubes.push_back({e, e, o.margin});
    const auto sweep = integrate_Kp_sweep(ps, domain, tubes, o.samples, o.seed);
    for (std::size_t t = 0; t < eps.size(); ++t) data.push_back({eps[t], sweep.estimates[0][t].value});
  }
  const auto fit = divergence_fit(data);
  Json pts = Json::array();
  out.csv = "eps,value\n";
  for (const auto& [e, v] : data) {
    pts.push_back(Json::array({e, v}));
    out.csv += num(e) + "," + num(v) + "\n";
  }
  out.result = {{"data", pts},
                {"model", to_string(fit.model)},
                {"a", fit.a},
                {"b", fit.b},
                {"alpha", fit.alpha},
                {"r2", fit.r2},
                {"b_stderr", fit.b_std_error}};
  if (!o.expect_model.empty()) {
    out.config["expect"] = o.expect_model;
    out.add_check("model == " + o.expect_model, fit.b, fit.b_std_error, o.expect_model == to_string(fit.model));
  }
  return out;
}

Outcome cmd_components(const Options& o) {
  Outcome out;
  const CartPoint y = input_target(o);
  out.config = {{"target", o.target}, {"radius", o.radius}, {"resolution", o.resolution}, {"map", o.map}};
  ComponentsReport rep;
  const Box wide{Vec3::Constant(-4.0 * (y.norm() + o.radius) - 2.0), Vec3::Constant(4.0 * (y.norm() + o.radius) + 2.0)};
  if (o.map == "bing") rep = preimage_components(y, o.radius, o.resolution);
  else if (o.map == "fold") rep = preimage_components(FoldMap{}, y, o.radius, wide, o.resolution);
  else rep = preimage_components(IdentityMap{}, y, o.radius, wide, o.resolution);
  out.result = {{"components", rep.components},
                {"resolution", rep.resolution},
                {"occupied_voxels", rep.occupied},
                {"path_merges", rep.path_merges},
                {"box", {{"lo", vec_json(rep.box.lo)}, {"hi", vec_json(rep.box.hi)}}}};
  if (o.expect_components >= 0) {
    out.config["expect"] = o.expect_components;
    out.add_check("components == " + std::to_string(o.expect_components), rep.components, 0.0,
                  rep.components == o.expect_components);
  }
  return out;
}

Outcome cmd_dimension(const Options& o) {
  Outcome out;
  const CartPoint y = input_target(o);
  out.config = {{"target", o.target}, {"points", o.points}, {"scales", {o.scale_first, o.scale_last}}};
  const Fiber f = fiber(y);
  const auto cloud = fiber_cloud(f, o.points);
  const auto bc = box_counting(cloud, default_scales(cloud, o.scale_first, o.scale_last));
  out.result = {{"kind", to_string(f.kind)}, {"points", cloud.size()}, {"dimension", bc.dimension},
                {"scales", bc.scales}, {"counts", bc.counts}};
  return out;
}

Outcome cmd_energy(const Options& o) {
  Outcome out;
  const CylBox domain = input_domain(o);
  out.config = {{"p", o.p_energy}, {"q", o.q_energy}, {"eps", o.eps_energy}, {"domain", parse_list(o.domain, "--domain")},
                {"margin", o.margin}, {"samples", o.samples}, {"seed", o.seed}};
  const auto e = energy_Epq(o.p_energy, o.q_energy, domain, {o.eps_energy, o.eps_energy, o.margin}, o.samples, o.seed);
  out.result = {{"value", e.value}, {"stderr", e.std_error}, {"regions", regions_json(e)}};
  return out;
}

Outcome cmd_table(const Options& o) {
  Outcome out;
  out.config = {{"nmax", o.nmax}};
  const auto table = fig1_table(o.nmax);
  out.csv = to_csv(table);
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    Json entries = Json::array();
    for (const auto& e : row.entries)
      entries.push_back({{"k", e.k}, {"p", e.p.str()}, {"num", e.p.num()}, {"den", e.p.den()}, {"parenthetical", e.parenthetical}});
    rows.push_back({{"n", row.n},
                    {"entries", entries},
                    {"top_degree_alternative", row.top_degree_alternative.str()},
                    {"top_degree_discrepancy", row.top_degree_discrepancy()}});
  }
  out.result = {{"rows", rows}, {"text", to_text(table)}};
  return out;
}

Outcome run_checks(const Options& o, const std::set<int>& ids, Json& timings) {
  Outcome out;
  out.config = {{"seed", o.seed}, {"checks", Json(std::vector<int>(ids.begin(), ids.end()))}};
  out.csv = "id,name,value,stderr,pass\n";
  Json per = Json::object();
  for (const auto& check : acceptance_checks()) {
    if (!ids.count(check.id)) continue;
    const auto res = run_check(check, AcceptanceOptions{o.seed});
    out.checks.push_back({{"id", res.id},
                          {"name", res.name},
                          {"value", res.value},
                          {"stderr", res.std_error},
                          {"pass", res.pass},
                          {"details", res.details}});
    out.pass = out.pass && res.pass;
    out.csv += std::to_string(res.id) + "," + res.name + "," + num(res.value) + "," + num(res.std_error) + "," +
               (res.pass ? "1" : "0") + "\n";
    per[res.name] = res.seconds;
    std::fprintf(stderr, "%s %2d %s\n", res.pass ? "PASS" : "FAIL", res.id, res.name.c_str());
  }
  timings["checks"] = per;
  int passed = 0;
  for (const auto& c : out.checks) passed += c["pass"].get<bool>() ? 1 : 0;
  out.result = {{"passed", passed}, {"total", out.checks.size()}};
  return out;
}

Outcome cmd_export_mesh(const Options& o) {
  Outcome out;
  out.config = {{"c", o.level}, {"resolution", o.mesh_resolution}, {"which", o.which}, {"mesh", o.mesh_path}};
  if (o.mesh_path.empty()) throw UsageError("--mesh PATH is required");
  const bool image = o.which == "image";
  if (o.level == 0.0) {
    const Mesh m = level_zero_polyline(o.mesh_resolution, image);
    write_obj(m, o.mesh_path, image ? "image_c0" : "domain_c0");
    out.result = {{"path", o.mesh_path}, {"status", to_string(ErrorCode::DegenerateLevel)}, {"polyline_vertices", m.vertices.size()}};
    return out;
  }
  const Mesh m = image ? image_mesh(o.level, o.mesh_resolution) : domain_mesh(o.level, o.mesh_resolution);
  write_obj(m, o.mesh_path, std::string(image ? "image_c" : "domain_c") + num(o.level));
  out.result = {{"path", o.mesh_path},
                {"status", "OK"},
                {"vertices", m.vertices.size()},
                {"faces", m.faces.size()},
                {"euler_characteristic", m.euler_characteristic()},
                {"closed_oriented", m.closed_oriented()},
                {"signed_volume", m.signed_volume()},
                {"theta0_ring_spread", ring_spread(m)}};
  return out;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InversionFailed:
    case ErrorCode::GridTooCoarse:
    case ErrorCode::SingularMatrix:
    case ErrorCode::DegenerateJacobian:
    case ErrorCode::IoError: return 1;
    default: return 2;
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!(f << text)) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fdlab: evaluate and verify the monotone finite-distortion map h"};
  app.set_version_flag("--version", std::string(fdlab::version));
  app.require_subcommand(1, 1);
  app.fallthrough();
  Options o;
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("-o,--output", o.output, "Report path, - for stdout")->capture_default_str();
  app.add_option("--format", o.format, "json or csv (table also accepts text)");
  app.add_flag("--timings", o.timings, "Include wall-clock times in the report");

  auto add_point = [&](CLI::App* sub) {
    auto* p = sub->add_option("--point", o.point, "Cylindrical point r,theta,z");
    auto* c = sub->add_option("--cart", o.cart, "Cartesian point x,y,z");
    p->excludes(c);
  };
  auto add_domain = [&](CLI::App* sub) {
    sub->add_option("--domain", o.domain, "r0,r1,theta0,theta1,z0,z1")->capture_default_str();
    sub->add_option("--margin", o.margin, "Radial margin of the z band of the tube")->capture_default_str();
    sub->add_option("--samples", o.samples, "Monte Carlo samples")->capture_default_str()->check(CLI::PositiveNumber);
  };

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate h");
  add_point(eval_cmd);
  auto* jac_cmd = app.add_subcommand("jac", "Jacobian and frame differential");
  add_point(jac_cmd);
  auto* dist_cmd = app.add_subcommand("distortion", "Outer distortion K = |Dh|^3 / J");
  add_point(dist_cmd);

  auto* fiber_cmd = app.add_subcommand("fiber", "Classify the fiber over a target");
  fiber_cmd->add_option("--target", o.target, "Target x,y,z")->required();
  fiber_cmd->add_option("--samples", o.fiber_samples, "Sample points per component")->capture_default_str();
  auto* invert_cmd = app.add_subcommand("invert", "Preimage of a target off the half-line");
  invert_cmd->add_option("--target", o.target, "Target x,y,z")->required();

  auto* integrate_cmd = app.add_subcommand("integrate", "Integrate K^p outside exclusion tubes");
  integrate_cmd->add_option("--p", o.ps, "Comma-separated exponents")->capture_default_str();
  integrate_cmd->add_option("--eps", o.eps, "Comma-separated tube widths")->capture_default_str();
  add_domain(integrate_cmd);

  auto* fit_cmd = app.add_subcommand("fit", "Classify the trend of integrals as eps -> 0");
  fit_cmd->add_option("--eps", o.eps, "Comma-separated tube widths")->capture_default_str();
  fit_cmd->add_option("--values", o.values, "Integral values matching --eps; omitted: integrate K^p");
  fit_cmd->add_option("--p", o.ps, "Exponent when integrating")->default_str("0.5");
  fit_cmd->add_option("--expect", o.expect_model, "Expected model")->check(CLI::IsMember({"CONSTANT", "LOG", "POWER"}));
  add_domain(fit_cmd);

  auto* comp_cmd = app.add_subcommand("components", "Connected components of a ball preimage");
  comp_cmd->add_option("--target", o.target, "Ball center x,y,z")->required();
  comp_cmd->add_option("--radius", o.radius, "Ball radius")->capture_default_str();
  comp_cmd->add_option("--resolution", o.resolution, "Voxel grid resolution")->capture_default_str();
  comp_cmd->add_option("--map", o.map, "bing, fold or identity")->capture_default_str()->check(CLI::IsMember({"bing", "fold", "identity"}));
  comp_cmd->add_option("--expect", o.expect_components, "Expected component count");

  auto* dim_cmd = app.add_subcommand("dimension", "Box-counting dimension of a fiber");
  dim_cmd->add_option("--target", o.target, "Target x,y,z")->required();
  dim_cmd->add_option("--points", o.points, "Points per component")->capture_default_str();
  dim_cmd->add_option("--scale-first", o.scale_first, "Coarsest scale diam * 2^-first")->capture_default_str();
  dim_cmd->add_option("--scale-last", o.scale_last, "Finest scale diam * 2^-last")->capture_default_str();

  auto* energy_cmd = app.add_subcommand("energy", "Energy int |Dh|^p + J^-q outside a tube");
  energy_cmd->add_option("--p", o.p_energy, "Exponent p >= 3")->capture_default_str();
  energy_cmd->add_option("--q", o.q_energy, "Exponent q > 0")->capture_default_str();
  energy_cmd->add_option("--eps", o.eps_energy, "Tube width")->capture_default_str();
  add_domain(energy_cmd);

  auto* table_cmd = app.add_subcommand("table", "Critical exponent table");
  table_cmd->add_option("--nmax", o.nmax, "Largest dimension")->capture_default_str();

  auto* forms_cmd = app.add_subcommand("verify-forms", "Differential-form checks (criteria 8-10)");
  auto* all_cmd = app.add_subcommand("verify-all", "All acceptance checks");
  all_cmd->add_option("--only", o.only, "Restrict to these check ids")->delimiter(',');

  auto* mesh_cmd = app.add_subcommand("export-mesh", "Write T_c or its image as OBJ");
  mesh_cmd->add_option("--c", o.level, "Level c")->capture_default_str();
  mesh_cmd->add_option("--resolution", o.mesh_resolution, "Angular resolution, >= 16")->capture_default_str();
  mesh_cmd->add_option("--which", o.which, "domain or image")->capture_default_str()->check(CLI::IsMember({"domain", "image"}));
  mesh_cmd->add_option("--mesh", o.mesh_path, "OBJ output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const auto t0 = std::chrono::steady_clock::now();
  Json timings = Json::object();
  try {
    const std::string default_format = name == "table" ? "csv" : "json";
    const std::string format = o.format.empty() ? default_format : o.format;
    if (format != "json" && format != "csv" && !(format == "text" && name == "table"))
      throw UsageError("--format must be json or csv");

    Outcome out;
    if (sub == eval_cmd) out = cmd_eval(o);
    else if (sub == jac_cmd) out = cmd_jac(o);
    else if (sub == dist_cmd) out = cmd_distortion(o);
    else if (sub == fiber_cmd) out = cmd_fiber(o);
    else if (sub == invert_cmd) out = cmd_invert(o);
    else if (sub == integrate_cmd) out = cmd_integrate(o);
    else if (sub == fit_cmd) out = cmd_fit(o);
    else if (sub == comp_cmd) out = cmd_components(o);
    else if (sub == dim_cmd) out = cmd_dimension(o);
    else if (sub == energy_cmd) out = cmd_energy(o);
    else if (sub == table_cmd) out = cmd_table(o);
    else if (sub == forms_cmd) out = run_checks(o, {8, 9, 10}, timings);
    else if (sub == all_cmd) {
      std::set<int> ids;
      for (const auto& c : acceptance_checks()) ids.insert(c.id);
      if (!o.only.empty()) {
        for (int id : o.only)
          if (!ids.count(id)) throw UsageError("--only: no check with id " + std::to_string(id));
        ids = std::set<int>(o.only.begin(), o.only.end());
      }
      out = run_checks(o, ids, timings);
    } else out = cmd_export_mesh(o);

    timings["total_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::string text;
    if (format == "text") {
      text = out.result["text"].get<std::string>();
    } else if (format == "csv") {
      if (out.csv.empty()) throw UsageError("--format csv is not available for " + name);
      text = out.csv;
    } else {
      Json report = {{"schema", schema_id}, {"version", fdlab::version}, {"command", name}};
      out.config["seed"] = o.seed;
      out.config["format"] = format;
      report["config"] = out.config;
      report["result"] = out.result;
      report["checks"] = out.checks;
      report["pass"] = out.pass;
      if (o.timings) report["timings"] = timings;
      text = report.dump(2) + "\n";
    }
    write_output(o.output, text);
    return out.pass ? 0 : 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "fdlab %s: %s\n", name.c_str(), e.what());
    return 2;
  } catch (const fdlab::Error& e) {
    std::fprintf(stderr, "fdlab %s: %s\n", name.c_str(), e.what());
    return exit_code_for(e.code());
  }
}

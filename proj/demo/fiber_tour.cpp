// Walks the target along the half-line {-t e_x}, printing the fiber over
// each point, then shows how the distortion grows towards theta = 0.
//
//   fiber_tour [obj-dir]
//
// With a directory argument the domain and image of T_c for c = 0.5 and 2
// are written there as OBJ files.

#include "fdlab/fdlab.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

using namespace fdlab;

int main(int argc, char** argv) {
  std::printf("%-6s %-13s %5s %12s %8s\n", "t", "kind", "parts", "residual", "dim");
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.5}) {
    const CartPoint y{-t, 0.0, 0.0};
    const Fiber f = fiber(y);
    double residual = 0.0;
    for (const auto& c : f.components)
      for (int i = 0; i <= 256; ++i) residual = std::max(residual, (eval(c.at(i / 256.0)).vec() - y.vec()).norm());
    const auto cloud = fiber_cloud(f, 4000);
    const double dim = box_counting(cloud, default_scales(cloud)).dimension;
    std::printf("%-6.2f %-13s %5zu %12.3g %8.3f\n", t, to_string(f.kind), f.components.size(), residual, dim);
    for (const auto& c : f.components) std::printf("         %s\n", c.description.c_str());
  }

  // Off the half-line the fiber is a single point.
  const CartPoint y{0.3, -0.2, 0.4};
  const CylPoint x = invert(y);
  std::printf("\nh^-1(%.2f, %.2f, %.2f) = (r %.6f, theta %.6f, z %.6f)\n", y.x, y.y, y.z, x.r, x.theta, x.z);

  std::printf("\n%-10s %14s %14s\n", "theta", "J", "K");
  for (double theta : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
    const CylPoint u = CylPoint::make(0.5, theta, 0.3);
    std::printf("%-10.0e %14.6g %14.6g\n", theta, jacobian(u), distortion(u, std::min(0.25 * theta, 0.05)));
  }

  if (argc > 1) {
    const std::string dir = argv[1];
    for (double c : {0.5, 2.0}) {
      const std::string tag = c < 1.0 ? "c0.5" : "c2";
      write_obj(domain_mesh(c, 64), dir + "/domain_" + tag + ".obj", "domain_" + tag);
      write_obj(image_mesh(c, 64), dir + "/image_" + tag + ".obj", "image_" + tag);
    }
    std::printf("\nmeshes written to %s\n", dir.c_str());
  }
  return 0;
}

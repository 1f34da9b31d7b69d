#pragma once

#include "fdlab/bingmap.hpp"
#include "fdlab/coords.hpp"
#include "fdlab/core.hpp"
#include "fdlab/exterior.hpp"
#include "fdlab/mesh.hpp"
#include "fdlab/montecarlo.hpp"
#include "fdlab/quadrature.hpp"
#include "fdlab/thresholds.hpp"

#ifndef FDLAB_VERSION
#define FDLAB_VERSION "0.1.0"
#endif

namespace fdlab {

inline constexpr const char* version = FDLAB_VERSION;

}  // namespace fdlab

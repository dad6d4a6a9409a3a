#pragma once

#include "cpm/detect.hpp"
#include "cpm/errors.hpp"
#include "cpm/grid.hpp"
#include "cpm/image.hpp"
#include "cpm/io.hpp"
#include "cpm/planner.hpp"
#include "cpm/rng.hpp"
#include "cpm/sensing.hpp"
#include "cpm/solver.hpp"
#include "cpm/spectralize.hpp"
#include "cpm/synthetic.hpp"

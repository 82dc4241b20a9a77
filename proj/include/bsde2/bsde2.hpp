#pragma once

// Umbrella header for the 2BSDE solver suite.

#include "bsde2/config.hpp"
#include "bsde2/core.hpp"
#include "bsde2/fd_solver.hpp"
#include "bsde2/harness.hpp"
#include "bsde2/increments.hpp"
#include "bsde2/models.hpp"
#include "bsde2/parallel.hpp"
#include "bsde2/pde_benchmark.hpp"
#include "bsde2/proba_solver.hpp"
#include "bsde2/random.hpp"
#include "bsde2/regression.hpp"
#include "bsde2/tree_dp.hpp"
#include "bsde2/value_grid.hpp"

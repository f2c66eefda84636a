#pragma once

#include "nonlocal/assembly.hpp"
#include "nonlocal/coeff.hpp"
#include "nonlocal/diagnostics.hpp"
#include "nonlocal/errors.hpp"
#include "nonlocal/experiment.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/grid_io.hpp"
#include "nonlocal/kernel.hpp"
#include "nonlocal/linsolve.hpp"
#include "nonlocal/problems.hpp"
#include "nonlocal/quadrature.hpp"
#include "nonlocal/sparse.hpp"

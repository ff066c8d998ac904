#pragma once

#include "rcm/config.hpp"
#include "rcm/errors.hpp"
#include "rcm/experiments.hpp"
#include "rcm/field.hpp"
#include "rcm/fit.hpp"
#include "rcm/functionals.hpp"
#include "rcm/lattice.hpp"
#include "rcm/law.hpp"
#include "rcm/operators.hpp"
#include "rcm/parallel.hpp"
#include "rcm/percolation.hpp"
#include "rcm/report.hpp"
#include "rcm/rng.hpp"
#include "rcm/spectral.hpp"
#include "rcm/walker.hpp"

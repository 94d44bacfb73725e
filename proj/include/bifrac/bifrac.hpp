#pragma once

#include "bifrac/compactness.hpp"
#include "bifrac/error.hpp"
#include "bifrac/exponents.hpp"
#include "bifrac/fit.hpp"
#include "bifrac/fixtures.hpp"
#include "bifrac/grid.hpp"
#include "bifrac/kernel.hpp"
#include "bifrac/operator.hpp"
#include "bifrac/oscillation.hpp"
#include "bifrac/parallel.hpp"
#include "bifrac/weights.hpp"

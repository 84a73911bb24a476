#pragma once

// Change-point analysis of annual temperature trends: constrained
// two-segment least squares, change-year scan, AIC/BIC model selection,
// Monte Carlo significance testing, long-memory trend uncertainty, and
// gridded batch processing.

#include "trendbreak/gridio.hpp"
#include "trendbreak/raster.hpp"
#include "trendbreak/memory.hpp"
#include "trendbreak/parallel.hpp"
#include "trendbreak/rng.hpp"
#include "trendbreak/scan.hpp"
#include "trendbreak/segfit.hpp"
#include "trendbreak/selection.hpp"
#include "trendbreak/series.hpp"
#include "trendbreak/sigtest.hpp"
#include "trendbreak/stochastic.hpp"
#include "trendbreak/textio.hpp"

namespace trendbreak {
inline constexpr const char* kVersion = "0.1.0";
}

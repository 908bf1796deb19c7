#pragma once

// Umbrella header.

#include "relucheck/common.hpp"
#include "relucheck/io.hpp"
#include "relucheck/linear_system.hpp"
#include "relucheck/network.hpp"
#include "relucheck/parallel.hpp"
#include "relucheck/properties.hpp"
#include "relucheck/report.hpp"
#include "relucheck/simplex.hpp"
#include "relucheck/solver.hpp"

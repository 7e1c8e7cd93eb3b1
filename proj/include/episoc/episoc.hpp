#pragma once

#include "episoc/baselines.hpp"
#include "episoc/dynamics.hpp"
#include "episoc/errors.hpp"
#include "episoc/graph.hpp"
#include "episoc/harness.hpp"
#include "episoc/lp.hpp"
#include "episoc/metrics.hpp"
#include "episoc/simulator.hpp"
#include "episoc/soc_policy.hpp"

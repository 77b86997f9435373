#pragma once

#include "ccl/dataset.hpp"
#include "ccl/dataset_io.hpp"
#include "ccl/difficulty.hpp"
#include "ccl/errors.hpp"
#include "ccl/experiment.hpp"
#include "ccl/learner.hpp"
#include "ccl/metrics.hpp"
#include "ccl/report_emit.hpp"
#include "ccl/rng.hpp"
#include "ccl/schedule.hpp"
#include "ccl/scoring.hpp"
#include "ccl/synthgen.hpp"

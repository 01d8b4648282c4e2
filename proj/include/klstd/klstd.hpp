#pragma once

// Umbrella header: regularized kernel LSTD value-function estimation on
// synthetic dyadic MRPs, with the critical-radius regularization rule,
// scaling-law experiment harness, and lower-bound family certification.

#include "klstd/errors.hpp"
#include "klstd/estimator.hpp"
#include "klstd/experiments.hpp"
#include "klstd/format.hpp"
#include "klstd/kernel.hpp"
#include "klstd/lowerbound.hpp"
#include "klstd/mrp.hpp"
#include "klstd/rng.hpp"
#include "klstd/theory.hpp"
#include "klstd/walsh.hpp"

#pragma once

// Umbrella header for the whole library.

#include "ibcd/bridge.hpp"
#include "ibcd/classifier.hpp"
#include "ibcd/config.hpp"
#include "ibcd/errors.hpp"
#include "ibcd/estimator.hpp"
#include "ibcd/geometry.hpp"
#include "ibcd/masking.hpp"
#include "ibcd/oracles.hpp"
#include "ibcd/parallel.hpp"
#include "ibcd/pipeline.hpp"
#include "ibcd/scenes.hpp"
#include "ibcd/smoothing.hpp"

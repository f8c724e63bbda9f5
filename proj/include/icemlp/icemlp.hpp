#pragma once

// Umbrella header for the icemlp library: multilayer-perceptron
// classification with either plain cross-entropy training or the
// bias-corrected (inverse-curvature penalized) objective, trained by L-BFGS.

#include "icemlp/backprop.hpp"
#include "icemlp/csv.hpp"
#include "icemlp/dataset.hpp"
#include "icemlp/experiment.hpp"
#include "icemlp/ice.hpp"
#include "icemlp/lbfgs.hpp"
#include "icemlp/loss.hpp"
#include "icemlp/network.hpp"
#include "icemlp/oracle.hpp"
#include "icemlp/problem.hpp"
#include "icemlp/rng.hpp"
#include "icemlp/topology.hpp"
#include "icemlp/validation.hpp"

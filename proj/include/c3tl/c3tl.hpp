#pragma once

// Umbrella header for the context-transfer perturbation-effect library.

#include "baselines.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "gradcheck.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "mlp.hpp"
#include "model.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "runners.hpp"
#include "split.hpp"
#include "synthetic.hpp"
#include "view.hpp"

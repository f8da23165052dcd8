#pragma once

// Umbrella header for the whole library.

#include "gatenet/common.hpp"
#include "gatenet/rng.hpp"
#include "gatenet/tensor.hpp"
#include "gatenet/kernels.hpp"
#include "gatenet/tape.hpp"
#include "gatenet/ops.hpp"
#include "gatenet/model.hpp"
#include "gatenet/netpbm.hpp"
#include "gatenet/metrics.hpp"
#include "gatenet/data.hpp"
#include "gatenet/synth.hpp"
#include "gatenet/optim.hpp"
#include "gatenet/config.hpp"
#include "gatenet/checkpoint.hpp"
#include "gatenet/trainer.hpp"
#include "gatenet/gradcheck.hpp"

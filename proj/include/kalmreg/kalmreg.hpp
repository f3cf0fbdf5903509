#pragma once

// Umbrella header.

#include "kalmreg/baselines.hpp"
#include "kalmreg/csv.hpp"
#include "kalmreg/curve.hpp"
#include "kalmreg/dataset.hpp"
#include "kalmreg/errors.hpp"
#include "kalmreg/experiment.hpp"
#include "kalmreg/kalman.hpp"
#include "kalmreg/metrics.hpp"
#include "kalmreg/selection.hpp"
#include "kalmreg/sgd.hpp"

// Umbrella header.
#pragma once

#include "nnsens/activation.hpp"
#include "nnsens/bounds.hpp"
#include "nnsens/common.hpp"
#include "nnsens/data.hpp"
#include "nnsens/loss.hpp"
#include "nnsens/mlp.hpp"
#include "nnsens/sensitivity.hpp"
#include "nnsens/train.hpp"
#include "nnsens/trajectory.hpp"

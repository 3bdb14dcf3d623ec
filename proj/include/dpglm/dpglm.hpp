#pragma once

#include "dpglm/accountant.hpp"
#include "dpglm/clipping.hpp"
#include "dpglm/core.hpp"
#include "dpglm/data_io.hpp"
#include "dpglm/diagnostics.hpp"
#include "dpglm/errors.hpp"
#include "dpglm/experiments.hpp"
#include "dpglm/losses.hpp"
#include "dpglm/optimizer.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/subspace.hpp"

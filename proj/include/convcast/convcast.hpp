#pragma once

#include "convcast/allocation.hpp"
#include "convcast/analysis.hpp"
#include "convcast/block_sim.hpp"
#include "convcast/error.hpp"
#include "convcast/model_core.hpp"
#include "convcast/model_io.hpp"
#include "convcast/regression.hpp"
#include "convcast/synth_data.hpp"

#pragma once

#include "tempspy/bitmap_io.hpp"
#include "tempspy/config.hpp"
#include "tempspy/countermeasures.hpp"
#include "tempspy/defense.hpp"
#include "tempspy/dram_sim.hpp"
#include "tempspy/enrollment.hpp"
#include "tempspy/error.hpp"
#include "tempspy/experiment.hpp"
#include "tempspy/harness.hpp"
#include "tempspy/inference.hpp"
#include "tempspy/random.hpp"
#include "tempspy/scenario.hpp"
#include "tempspy/serialize.hpp"
#include "tempspy/transport.hpp"
#include "tempspy/wire.hpp"

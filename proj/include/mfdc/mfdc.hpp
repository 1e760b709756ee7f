#pragma once

#include "mfdc/core.hpp"
#include "mfdc/quadrature.hpp"
#include "mfdc/sensing.hpp"
#include "mfdc/contention.hpp"
#include "mfdc/throughput.hpp"
#include "mfdc/optimizer.hpp"
#include "mfdc/random.hpp"
#include "mfdc/stats.hpp"
#include "mfdc/simulator.hpp"
#include "mfdc/config.hpp"
#include "mfdc/cli.hpp"

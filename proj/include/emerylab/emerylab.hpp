#pragma once

#include "emerylab/error.hpp"
#include "emerylab/tree.hpp"
#include "emerylab/calculus.hpp"
#include "emerylab/lp.hpp"
#include "emerylab/metrics.hpp"
#include "emerylab/wealthset.hpp"
#include "emerylab/duality.hpp"
#include "emerylab/convergence.hpp"
#include "emerylab/market_io.hpp"

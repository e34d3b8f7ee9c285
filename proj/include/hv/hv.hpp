#pragma once

#include "hv/analysis.hpp"
#include "hv/bvp.hpp"
#include "hv/core.hpp"
#include "hv/flow.hpp"
#include "hv/io.hpp"
#include "hv/optimizer.hpp"

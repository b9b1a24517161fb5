#pragma once

#include "drbatch/batch.hpp"
#include "drbatch/bench.hpp"
#include "drbatch/dofmap.hpp"
#include "drbatch/errors.hpp"
#include "drbatch/execution.hpp"
#include "drbatch/microsolver.hpp"
#include "drbatch/network.hpp"
#include "drbatch/packed.hpp"
#include "drbatch/plot.hpp"
#include "drbatch/result_json.hpp"

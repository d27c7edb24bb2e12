#pragma once

#include "rdgd/bounds.hpp"
#include "rdgd/box.hpp"
#include "rdgd/config.hpp"
#include "rdgd/costs.hpp"
#include "rdgd/engine.hpp"
#include "rdgd/errors.hpp"
#include "rdgd/faults.hpp"
#include "rdgd/filters.hpp"
#include "rdgd/harness.hpp"
#include "rdgd/linalg.hpp"
#include "rdgd/redundancy.hpp"
#include "rdgd/rng.hpp"
#include "rdgd/simnet.hpp"
#include "rdgd/trace_io.hpp"

#pragma once

// Convenience include for the whole library.

#include "pmpo/aggregation.hpp"
#include "pmpo/checks.hpp"
#include "pmpo/clipping.hpp"
#include "pmpo/config.hpp"
#include "pmpo/diagnostics.hpp"
#include "pmpo/errors.hpp"
#include "pmpo/grouping.hpp"
#include "pmpo/oracle.hpp"
#include "pmpo/p_selection.hpp"
#include "pmpo/policy.hpp"
#include "pmpo/rng.hpp"
#include "pmpo/rollout.hpp"
#include "pmpo/surrogate.hpp"
#include "pmpo/task.hpp"
#include "pmpo/train.hpp"
#include "pmpo/trajectory.hpp"

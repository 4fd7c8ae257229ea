#pragma once

#include "r3l/analysis.hpp"
#include "r3l/bc.hpp"
#include "r3l/common.hpp"
#include "r3l/env.hpp"
#include "r3l/harness.hpp"
#include "r3l/planner.hpp"
#include "r3l/policy.hpp"
#include "r3l/rl.hpp"
#include "r3l/steering.hpp"
#include "r3l/trajectory.hpp"

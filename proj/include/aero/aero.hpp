// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "aero/advantage.hpp"
#include "aero/allocator.hpp"
#include "aero/core.hpp"
#include "aero/cost.hpp"
#include "aero/experiment.hpp"
#include "aero/gradproxy.hpp"
#include "aero/metrics.hpp"
#include "aero/oracle.hpp"
#include "aero/rng.hpp"
#include "aero/verify.hpp"

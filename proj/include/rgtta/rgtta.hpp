#pragma once

// Umbrella header for the streaming test-time-adaptation toolkit.

#include "rgtta/core.hpp"
#include "rgtta/datagen.hpp"
#include "rgtta/forecast.hpp"
#include "rgtta/harness.hpp"
#include "rgtta/memory.hpp"
#include "rgtta/policies.hpp"
#include "rgtta/similarity.hpp"
#include "rgtta/stats.hpp"

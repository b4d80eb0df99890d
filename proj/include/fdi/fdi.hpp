#pragma once

#include "fdi/core.hpp"
#include "fdi/disagreement.hpp"
#include "fdi/grouping.hpp"
#include "fdi/io.hpp"
#include "fdi/metrics.hpp"
#include "fdi/rng.hpp"
#include "fdi/synth.hpp"
#include "fdi/verification.hpp"

#pragma once

#include "defcast/bounds.hpp"
#include "defcast/env.hpp"
#include "defcast/game.hpp"
#include "defcast/learners.hpp"
#include "defcast/logsumexp.hpp"
#include "defcast/potential.hpp"
#include "defcast/rng.hpp"
#include "defcast/sim.hpp"
#include "defcast/solver.hpp"

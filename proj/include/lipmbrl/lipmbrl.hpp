#pragma once

// Umbrella header.

#include "lipmbrl/backup.hpp"
#include "lipmbrl/core_mdp.hpp"
#include "lipmbrl/decomposition.hpp"
#include "lipmbrl/em_learner.hpp"
#include "lipmbrl/experiments.hpp"
#include "lipmbrl/fixtures.hpp"
#include "lipmbrl/gvi.hpp"
#include "lipmbrl/io.hpp"
#include "lipmbrl/layered_net.hpp"
#include "lipmbrl/lipschitz.hpp"
#include "lipmbrl/metrics.hpp"

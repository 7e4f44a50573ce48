#pragma once

#include "riskpg/contextual_policy.hpp"
#include "riskpg/envs/badminton.hpp"
#include "riskpg/envs/config.hpp"
#include "riskpg/envs/contextual_badminton.hpp"
#include "riskpg/envs/lin_toy.hpp"
#include "riskpg/envs/portfolio.hpp"
#include "riskpg/gradients.hpp"
#include "riskpg/harness/csv.hpp"
#include "riskpg/harness/experiment.hpp"
#include "riskpg/harness/repro.hpp"
#include "riskpg/harness/stats.hpp"
#include "riskpg/policy.hpp"
#include "riskpg/record.hpp"
#include "riskpg/reps.hpp"
#include "riskpg/risk.hpp"
#include "riskpg/rng.hpp"
#include "riskpg/serialize.hpp"

#pragma once

#include "fbopt/baselines.hpp"
#include "fbopt/checks.hpp"
#include "fbopt/fbe.hpp"
#include "fbopt/harness.hpp"
#include "fbopt/ntra.hpp"
#include "fbopt/oracles.hpp"
#include "fbopt/pgcl.hpp"
#include "fbopt/problems.hpp"
#include "fbopt/prox.hpp"
#include "fbopt/report.hpp"
#include "fbopt/subsolvers.hpp"

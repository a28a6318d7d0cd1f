#pragma once

#include "summclust/analytic_oracles.hpp"
#include "summclust/cli.hpp"
#include "summclust/dataset.hpp"
#include "summclust/design.hpp"
#include "summclust/diagnostics.hpp"
#include "summclust/filter.hpp"
#include "summclust/jackknife.hpp"
#include "summclust/linalg.hpp"
#include "summclust/model_spec.hpp"
#include "summclust/ols.hpp"
#include "summclust/output.hpp"
#include "summclust/rng.hpp"
#include "summclust/sim_harness.hpp"
#include "summclust/student_t.hpp"
#include "summclust/wcr_bootstrap.hpp"

#pragma once

// Bayesian sparse polynomial chaos expansion: data-driven orthonormal bases,
// deterministic and fully Bayesian coefficient estimation with the R2D2
// shrinkage prior, gradient-based MCMC, Sobol-index analytics, variable
// selection, and benchmark orchestration.

#include "bpce/basis.hpp"
#include "bpce/bench.hpp"
#include "bpce/detsolve.hpp"
#include "bpce/diagnostics.hpp"
#include "bpce/distributions.hpp"
#include "bpce/errors.hpp"
#include "bpce/fit.hpp"
#include "bpce/io.hpp"
#include "bpce/model.hpp"
#include "bpce/moments.hpp"
#include "bpce/posterior.hpp"
#include "bpce/rng.hpp"
#include "bpce/sampler.hpp"
#include "bpce/select.hpp"
#include "bpce/stats.hpp"
#include "bpce/univariate.hpp"

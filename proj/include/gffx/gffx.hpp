#pragma once

#include "gffx/dirichlet.hpp"
#include "gffx/experiments.hpp"
#include "gffx/extremes.hpp"
#include "gffx/green.hpp"
#include "gffx/hitting.hpp"
#include "gffx/lattice.hpp"
#include "gffx/parallel.hpp"
#include "gffx/quadrature.hpp"
#include "gffx/report.hpp"
#include "gffx/rng.hpp"
#include "gffx/sampler.hpp"
#include "gffx/stats.hpp"
#include "gffx/stein_chen.hpp"

#pragma once

#include "ipp/errors.hpp"
#include "ipp/rng.hpp"
#include "ipp/randfield.hpp"
#include "ipp/estimator.hpp"
#include "ipp/graphs.hpp"
#include "ipp/model.hpp"
#include "ipp/admm.hpp"
#include "ipp/solver.hpp"
#include "ipp/baselines.hpp"
#include "ipp/bench.hpp"

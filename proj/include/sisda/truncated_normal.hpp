#pragma once

#include "sisda/interval_set.hpp"

namespace sisda {

/// log P(N(0,1) >= x), accurate far into the upper tail.
double log_normal_sf(double x);

/// log P(lo <= N(0,1) <= hi); -inf for an empty interval.
double log_normal_interval_mass(double lo, double hi);

/// log of the N(0, sigma^2) mass of a union of intervals.
double log_normal_mass(const IntervalSet& set, double sigma);

/// log(exp(x) + exp(y)) without overflow.
double log_add_exp(double x, double y);

}  // namespace sisda

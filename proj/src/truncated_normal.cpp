#include "sisda/truncated_normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sisda {

namespace {

constexpr double kLogTailSwitch = 8.0;

// Mills ratio sf(x) / pdf(x) by the Laplace continued fraction, evaluated
// bottom-up; converges quickly for x >= 8.
double mills_ratio(double x) {
  double tail = x;
  for (int k = 80; k >= 1; --k) tail = x + k / tail;
  return 1.0 / tail;
}

}  // namespace

double log_normal_sf(double x) {
  if (x == kInf) return -kInf;
  if (x == -kInf) return 0.0;
  if (x < kLogTailSwitch) return std::log(0.5 * std::erfc(x / std::numbers::sqrt2));
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills_ratio(x));
}

double log_normal_interval_mass(double lo, double hi) {
  if (!(hi > lo)) return -kInf;
  if (lo >= 0.0) {
    const double la = log_normal_sf(lo);
    const double lb = log_normal_sf(hi);
    if (la == -kInf) return -kInf;
    return la + std::log1p(-std::exp(lb - la));
  }
  if (hi <= 0.0) return log_normal_interval_mass(-hi, -lo);
  const double mass =
      0.5 * (std::erf(hi / std::numbers::sqrt2) - std::erf(lo / std::numbers::sqrt2));
  return std::log(mass);
}

double log_add_exp(double x, double y) {
  if (x == -kInf) return y;
  if (y == -kInf) return x;
  const double m = std::max(x, y);
  return m + std::log1p(std::exp(-std::abs(x - y)));
}

double log_normal_mass(const IntervalSet& set, double sigma) {
  double acc = -kInf;
  for (const auto& iv : set)
    acc = log_add_exp(acc, log_normal_interval_mass(iv.lo / sigma, iv.hi / sigma));
  return acc;
}

}  // namespace sisda

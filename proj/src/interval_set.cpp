#include "sisda/interval_set.hpp"

#include <algorithm>
#include <sstream>

namespace sisda {

IntervalSet::IntervalSet(std::vector<Interval> intervals) {
  std::erase_if(intervals, [](const Interval& iv) { return !(iv.lo <= iv.hi); });
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& x, const Interval& y) {
              return x.lo < y.lo || (x.lo == y.lo && x.hi < y.hi);
            });
  for (const auto& iv : intervals) {
    if (!intervals_.empty() && iv.lo <= intervals_.back().hi + kMergeTolerance) {
      intervals_.back().hi = std::max(intervals_.back().hi, iv.hi);
    } else {
      intervals_.push_back(iv);
    }
  }
}

bool IntervalSet::contains(double z) const {
  return component_containing(z).has_value();
}

std::optional<Interval> IntervalSet::component_containing(double z) const {
  auto it = std::upper_bound(
      intervals_.begin(), intervals_.end(), z,
      [](double v, const Interval& iv) { return v < iv.lo; });
  if (it == intervals_.begin()) return std::nullopt;
  --it;
  if (it->contains(z)) return *it;
  return std::nullopt;
}

double IntervalSet::measure() const {
  double total = 0.0;
  for (const auto& iv : intervals_) total += iv.width();
  return total;
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  const auto& A = intervals_;
  const auto& B = other.intervals_;
  while (i < A.size() && j < B.size()) {
    const double lo = std::max(A[i].lo, B[j].lo);
    const double hi = std::min(A[i].hi, B[j].hi);
    if (lo <= hi) out.push_back({lo, hi});
    if (A[i].hi < B[j].hi) {
      ++i;
    } else {
      ++j;
    }
  }
  return IntervalSet(std::move(out));
}

IntervalSet IntervalSet::unite(const IntervalSet& other) const {
  std::vector<Interval> all(intervals_);
  all.insert(all.end(), other.intervals_.begin(), other.intervals_.end());
  return IntervalSet(std::move(all));
}

std::string IntervalSet::to_string() const {
  if (intervals_.empty()) return "{}";
  std::ostringstream os;
  os.precision(12);
  for (std::size_t k = 0; k < intervals_.size(); ++k) {
    if (k) os << " u ";
    os << '[' << intervals_[k].lo << ", " << intervals_[k].hi << ']';
  }
  return os.str();
}

}  // namespace sisda

#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sisda {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
/// Intervals separated by less than this are merged.
inline constexpr double kMergeTolerance = 1e-10;

struct Interval {
  double lo = -kInf;
  double hi = kInf;

  double width() const { return hi - lo; }
  bool contains(double z) const { return lo <= z && z <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Sorted union of disjoint closed intervals on the extended real line.
class IntervalSet {
 public:
  IntervalSet() = default;
  /// Sorts and merges; drops intervals with lo > hi.
  explicit IntervalSet(std::vector<Interval> intervals);

  static IntervalSet whole() { return IntervalSet({Interval{}}); }
  static IntervalSet empty() { return IntervalSet(); }
  static IntervalSet single(double lo, double hi) {
    return IntervalSet({Interval{lo, hi}});
  }

  bool is_empty() const { return intervals_.empty(); }
  std::size_t size() const { return intervals_.size(); }
  std::span<const Interval> intervals() const { return intervals_; }
  const Interval& operator[](std::size_t i) const { return intervals_[i]; }
  auto begin() const { return intervals_.begin(); }
  auto end() const { return intervals_.end(); }

  bool contains(double z) const;
  /// The maximal interval containing z, if any.
  std::optional<Interval> component_containing(double z) const;
  /// Total length; infinite when unbounded.
  double measure() const;

  IntervalSet intersect(const IntervalSet& other) const;
  IntervalSet unite(const IntervalSet& other) const;
  IntervalSet clip(double lo, double hi) const {
    return intersect(single(lo, hi));
  }

  bool operator==(const IntervalSet&) const = default;

  std::string to_string() const;

 private:
  std::vector<Interval> intervals_;
};

}  // namespace sisda

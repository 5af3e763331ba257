#pragma once

#include <cstddef>
#include <deque>

#include "emo/core/affect.hpp"

namespace emo {

struct HomeostasisConfig {
  std::size_t window = 1000;
  AffectVector midpoint = kAffectMidpoint;
  double reward_constant = 40.0;
};

/// Mood: half-way between the scale midpoint and the mean of the last N
/// interoception vectors, refreshed only when update() is called.
class MoodTracker {
 public:
  explicit MoodTracker(const HomeostasisConfig& config = {});

  void push(const AffectVector& interoception);
  // m = (midpoint + window mean) / 2; midpoint when nothing is buffered.
  AffectVector compute() const;
  void update() { current_ = compute(); }
  const AffectVector& current() const { return current_; }
  void set_current(const AffectVector& m) { current_ = m; }

  const std::deque<AffectVector>& buffer() const { return buffer_; }
  const HomeostasisConfig& config() const { return config_; }

 private:
  HomeostasisConfig config_;
  std::deque<AffectVector> buffer_;
  AffectVector current_;
};

// R = C - ||m - a||^2.
inline double homeostatic_reward(const AffectVector& interoception, const AffectVector& mood, double constant) {
  return constant - squared_distance(mood, interoception);
}

}  // namespace emo

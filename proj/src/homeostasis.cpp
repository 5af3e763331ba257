#include "emo/core/homeostasis.hpp"

#include "emo/core/errors.hpp"

namespace emo {

MoodTracker::MoodTracker(const HomeostasisConfig& config) : config_(config), current_(config.midpoint) {
  if (config_.window == 0) throw ConfigError("homeostasis.window must be positive");
}

void MoodTracker::push(const AffectVector& interoception) {
  if (buffer_.size() == config_.window) buffer_.pop_front();
  buffer_.push_back(interoception);
}

AffectVector MoodTracker::compute() const {
  if (buffer_.empty()) return config_.midpoint;
  AffectVector sum;
  for (const auto& a : buffer_) sum += a;
  const AffectVector mean = (1.0 / static_cast<double>(buffer_.size())) * sum;
  return 0.5 * (config_.midpoint + mean);
}

}  // namespace emo

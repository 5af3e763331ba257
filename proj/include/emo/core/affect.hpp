#pragma once

#include <cmath>

namespace emo {

// (valence, arousal) on the 1-9 rating scale.
struct AffectVector {
  double valence = 0.0;
  double arousal = 0.0;

  AffectVector& operator+=(const AffectVector& o) {
    valence += o.valence;
    arousal += o.arousal;
    return *this;
  }
  AffectVector& operator-=(const AffectVector& o) {
    valence -= o.valence;
    arousal -= o.arousal;
    return *this;
  }
  friend AffectVector operator+(AffectVector a, const AffectVector& b) { return a += b; }
  friend AffectVector operator-(AffectVector a, const AffectVector& b) { return a -= b; }
  friend AffectVector operator*(double s, const AffectVector& a) { return {s * a.valence, s * a.arousal}; }
  friend bool operator==(const AffectVector&, const AffectVector&) = default;

  bool finite() const { return std::isfinite(valence) && std::isfinite(arousal); }
};

inline double squared_distance(const AffectVector& a, const AffectVector& b) {
  const double dv = a.valence - b.valence, da = a.arousal - b.arousal;
  return dv * dv + da * da;
}

inline constexpr double kAffectMin = 1.0;
inline constexpr double kAffectMax = 9.0;
inline constexpr AffectVector kAffectMidpoint{5.0, 5.0};

}  // namespace emo

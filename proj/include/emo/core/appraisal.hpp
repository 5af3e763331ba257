#pragma once

#include <array>

#include "emo/core/environment.hpp"

namespace emo {

struct FatigueConfig {
  double tau = 50.0;
  double eta = 0.01;
  double d_eyelid = 50.0;
  double d_sad = 75.0;
  double eyelid_threshold = 0.25;

  // Rejects d_eyelid == d_sad.
  void validate() const;
};

enum class ActionClass { closing_eyelids, showing_sadness, otherwise };
const char* action_class_name(ActionClass c);

/// Per-facial-part physical-strength accumulators A_n.
struct FatigueState {
  std::array<double, FaceControls::kParts> accumulators{};
  friend bool operator==(const FatigueState&, const FatigueState&) = default;
};

// IA = sum_n (1 - exp(-A_n / tau)), in [0, 4).
double ia_value(const FatigueState& state, const FatigueConfig& config);

// closing_eyelids: A <- |A - d_eyelid|; showing_sadness: A <- |A - d_sad|;
// otherwise: A <- A + cost + eta. The branch is shared by all four parts.
FatigueState ia_update(const FatigueState& state, ActionClass action, double action_cost, const FatigueConfig& config);

ActionClass classify_action(const FaceControls& previous, const FaceControls& controls, ExpressionLabel mother_label,
                            const FatigueConfig& config = {});

}  // namespace emo

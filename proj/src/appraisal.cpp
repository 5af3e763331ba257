#include "emo/core/appraisal.hpp"

#include <cmath>

#include "emo/core/errors.hpp"

namespace emo {

void FatigueConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("appraisal.tau must be positive");
  if (!(eta >= 0.0)) throw ConfigError("appraisal.eta must be nonnegative");
  if (!(d_eyelid >= 0.0) || !(d_sad >= 0.0)) throw ConfigError("appraisal.d_eyelid/d_sad must be nonnegative");
  if (d_eyelid == d_sad) throw ConfigError("appraisal.d_eyelid and appraisal.d_sad must differ");
  if (!(eyelid_threshold >= 0.0 && eyelid_threshold <= 1.0))
    throw ConfigError("appraisal.eyelid_threshold must lie in [0,1]");
}

const char* action_class_name(ActionClass c) {
  switch (c) {
    case ActionClass::closing_eyelids: return "closing_eyelids";
    case ActionClass::showing_sadness: return "showing_sadness";
    case ActionClass::otherwise: return "otherwise";
  }
  return "otherwise";
}

double ia_value(const FatigueState& state, const FatigueConfig& config) {
  double ia = 0.0;
  for (double a : state.accumulators) ia += -std::expm1(-a / config.tau);
  return ia;
}

FatigueState ia_update(const FatigueState& state, ActionClass action, double action_cost, const FatigueConfig& config) {
  if (!std::isfinite(action_cost) || action_cost < 0.0)
    throw InvalidArgument("action cost must be finite and nonnegative");
  FatigueState next = state;
  for (double& a : next.accumulators) {
    switch (action) {
      case ActionClass::closing_eyelids: a = std::abs(a - config.d_eyelid); break;
      case ActionClass::showing_sadness: a = std::abs(a - config.d_sad); break;
      case ActionClass::otherwise: a = a + action_cost + config.eta; break;
    }
  }
  return next;
}

ActionClass classify_action(const FaceControls&, const FaceControls& controls, ExpressionLabel mother_label,
                            const FatigueConfig& config) {
  if (controls.eyelid_open < config.eyelid_threshold) return ActionClass::closing_eyelids;
  if (mother_label == ExpressionLabel::sadness) return ActionClass::showing_sadness;
  return ActionClass::otherwise;
}

}  // namespace emo

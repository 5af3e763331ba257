#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emo/core/affect.hpp"
#include "emo/core/environment.hpp"
#include "emo/core/nn.hpp"
#include "emo/core/rng.hpp"

namespace emo {

class Container;

struct GlimpseConfig {
  std::size_t scales = 3;
  std::size_t patch = 8;
  std::size_t scale_factor = 2;
  std::size_t glimpses = 6;

  std::size_t features() const { return scales * patch * patch; }
  void validate(std::size_t image_side) const;
};

// Image-normalized location; x is the column axis, both in [-1, 1].
struct Location {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Location&, const Location&) = default;
};

inline Location clamp_location(Location l) {
  return {l.x < -1.0 ? -1.0 : (l.x > 1.0 ? 1.0 : l.x), l.y < -1.0 ? -1.0 : (l.y > 1.0 ? 1.0 : l.y)};
}

// scales patches centred on the location; patch i covers patch*factor^i
// pixels, average-pooled down to patch x patch. Outside the image reads 0.
std::vector<double> extract_glimpse(std::span<const double> image, std::size_t side, Location location,
                                    const GlimpseConfig& config);

// Isotropic 2-D Gaussian log density.
double gaussian_log_prob(Location sample, Location mean, double sigma);

struct RamConfig {
  GlimpseConfig glimpse;
  std::size_t image_side = 32;
  std::size_t glimpse_hidden = 128;
  std::size_t location_hidden = 32;
  std::size_t core_hidden = 128;
  double location_sigma = 0.15;
  double reward_tolerance = 0.5;
  double reinforce_weight = 1.0;
  // When off, the REINFORCE term trains only the location head.
  bool policy_gradient_to_core = false;
  std::size_t batch = 20;
  nn::AdamConfig adam{5e-4};

  void validate() const;
};

struct RamState {
  std::vector<double> hidden;
  Location location;
  std::size_t step = 0;
};

struct RamStepResult {
  Location mean;
  Location raw_sample;   // before clamping; the log density refers to this value
  Location next_location;
  double log_prob = 0.0;
};

struct RamEpisode {
  AffectVector estimate;
  std::vector<Location> locations;  // clamped sample of every step
  std::vector<double> log_probs;
};

struct RamLossWeights {
  double regression = 1.0;
  double reinforce = 1.0;
  double baseline = 1.0;
};

struct RamBatchResult {
  std::vector<AffectVector> estimates;
  std::vector<std::vector<Location>> raw_samples;
  std::vector<double> rewards;
  double regression_loss = 0.0;  // mean squared error of the normalized head output
  double affect_mse = 0.0;       // same error in rating-scale units
  double objective = 0.0;        // weighted hybrid loss whose gradient is applied
};

/// Recurrent attention regressor: glimpse network, recurrent core, location
/// policy and a linear affect head read from the final hidden state.
class RamModel {
 public:
  RamModel(const RamConfig& config, RngStream& init_rng);

  const RamConfig& config() const { return config_; }

  RamState initial_state() const;
  // Glimpse at the state's location, update the core and sample where to look
  // next. Throws StateError once all glimpses have been taken.
  RamStepResult step(RamState& state, std::span<const double> image, RngStream& rng, double sigma) const;
  AffectVector read_out(const RamState& state) const;

  RamEpisode episode(std::span<const double> image, RngStream& rng, double sigma) const;
  RamEpisode episode(std::span<const double> image, RngStream& rng) const {
    return episode(image, rng, config_.location_sigma);
  }
  // Deterministic estimate: every location is the policy mean.
  AffectVector estimate(std::span<const double> image) const;

  // Hybrid loss over a batch: regression of the head onto the targets,
  // REINFORCE on the location policy with per-episode reward (R - b), and a
  // squared-error fit of the scalar baseline b to R. Gradients overwrite the
  // parameter grads. forced_samples replays given raw locations instead of
  // sampling; rewards overrides the tolerance-band reward.
  RamBatchResult hybrid_gradients(std::span<const Image* const> images, std::span<const AffectVector> targets,
                                  RngStream& rng, double sigma,
                                  const std::vector<std::vector<Location>>* forced_samples = nullptr,
                                  const std::vector<double>* rewards = nullptr, RamLossWeights weights = {});
  // Forward-only evaluation of the same objective (rng unused when samples are forced).
  double hybrid_objective(std::span<const Image* const> images, std::span<const AffectVector> targets,
                          const std::vector<std::vector<Location>>& forced_samples,
                          const std::vector<double>& rewards, double sigma, RamLossWeights weights = {}) const;

  // One Adam step on a batch; returns the batch statistics.
  RamBatchResult train_batch(std::span<const Image* const> images, std::span<const AffectVector> targets,
                             RngStream& rng);

  double tolerance_reward(const AffectVector& estimate, const AffectVector& target) const;

  std::vector<nn::Parameter*> parameters();
  nn::Parameter& parameter(const std::string& name);
  nn::AdamState& optimizer() { return adam_; }

  void save(Container& out, const std::string& prefix) const;
  static RamModel load(const Container& in, const std::string& prefix);

 private:
  struct Rollout;
  Rollout forward_batch(std::span<const Image* const> images, RngStream* rng, double sigma,
                        const std::vector<std::vector<Location>>* forced) const;
  double objective_from(const Rollout& r, std::span<const AffectVector> targets, const std::vector<double>& rewards,
                        double sigma, RamLossWeights weights, double* regression, double* affect_mse) const;

  RamConfig config_;
  std::vector<nn::Parameter> params_;
  nn::AdamState adam_;
};

struct RamCurvePoint {
  std::size_t epoch = 0;
  double regression_mse = 0.0;  // rating-scale units
  double mean_reward = 0.0;
};

struct RamMae {
  double valence = 0.0;
  double arousal = 0.0;
};

RamMae evaluate_mae(const RamModel& model, const std::vector<Stimulus>& items);

struct RamTrainResult {
  RamModel model;
  std::vector<RamCurvePoint> curve;
  RamMae held_out;
};

RamTrainResult train_ram(const std::vector<Stimulus>& train, const std::vector<Stimulus>& test, std::size_t epochs,
                         const RamConfig& config, std::uint64_t seed);

}  // namespace emo

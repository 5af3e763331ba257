#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "emo/core/environment.hpp"
#include "emo/core/nn.hpp"
#include "emo/core/rng.hpp"
#include "emo/core/tensor.hpp"

namespace emo {

class Container;

inline constexpr std::size_t kActionDim = 4;

struct Transition {
  std::vector<double> state;
  std::array<double, kActionDim> action{};
  double reward = 0.0;
  std::vector<double> next_state;
};

struct TransitionBatch {
  Tensor state;       // [N, S]
  Tensor action;      // [N, 4]
  Tensor reward;      // [N]
  Tensor next_state;  // [N, S]
  std::size_t size() const { return reward.size(); }
};

/// Fixed-capacity FIFO of transitions sampled uniformly with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }
  // Indices drawn with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, RngStream& rng) const;
  TransitionBatch sample(std::size_t n, RngStream& rng) const;
  TransitionBatch gather(std::span<const std::size_t> indices) const;

  void save(Container& out, const std::string& prefix) const;
  void load_into(const Container& in, const std::string& prefix);

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct OuConfig {
  double theta = 0.15;
  double sigma = 0.2;
  double dt = 1.0;
};

/// Ornstein-Uhlenbeck noise with zero mean: x += theta (0 - x) dt + sigma sqrt(dt) N(0,1).
class OuNoise {
 public:
  explicit OuNoise(OuConfig config, std::size_t dim = kActionDim);
  const std::vector<double>& advance(RngStream& rng);
  const std::vector<double>& value() const { return x_; }
  void set_value(std::vector<double> x);
  void reset() { std::fill(x_.begin(), x_.end(), 0.0); }
  const OuConfig& config() const { return config_; }

 private:
  OuConfig config_;
  std::vector<double> x_;
};

struct DdpgConfig {
  std::size_t state_dim = 516;
  std::vector<std::size_t> actor_hidden{64, 32};
  std::vector<std::size_t> critic_hidden{64, 32};
  bool batchnorm = true;
  double gamma = 0.99;
  double soft_update = 0.001;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double reward_scale = 0.01;
  std::size_t buffer = 500;
  std::size_t batch = 200;
  std::size_t warmup = 200;
  OuConfig ou{};

  void validate() const;
};

// theta' <- zeta theta + (1 - zeta) theta' for every pair; shapes must match.
void soft_update(std::span<nn::Parameter* const> online, std::span<nn::Parameter* const> target, double zeta);
void soft_update(std::span<Tensor* const> online, std::span<Tensor* const> target, double zeta);

/// Actor mu(s) -> [0,1]^4 and critic Q(s, a) with the action joined after the
/// first critic layer, plus target copies of both.
class ActorCritic {
 public:
  ActorCritic(const DdpgConfig& config, RngStream& init_rng);

  const DdpgConfig& config() const { return config_; }

  // Evaluation-mode policy output for a batch [N, S].
  Tensor act(const Tensor& states);
  std::array<double, kActionDim> act(std::span<const double> state);
  // Output of the middle hidden layer from the last act call.
  std::vector<double> middle_activation() const;
  std::size_t middle_layer_index() const { return middle_; }

  FaceControls select_action(std::span<const double> state, OuNoise& noise, RngStream& rng);

  Tensor q_value(const Tensor& states, const Tensor& actions, nn::Mode mode);
  Tensor target_q(const Tensor& states, const Tensor& actions);
  // y_i = reward_scale R_i + gamma Q'(s'_i, mu'(s'_i)).
  Tensor critic_targets(const TransitionBatch& batch);
  double critic_update(const TransitionBatch& batch);
  void actor_update(const TransitionBatch& batch);
  void update_targets();

  // Gradient of Q(s, a) summed over the batch wrt a, critic in eval mode.
  Tensor action_gradient(const Tensor& states, const Tensor& actions);

  nn::Sequential& actor() { return actor_; }
  nn::Sequential& critic_trunk() { return critic_trunk_; }
  nn::Sequential& critic_head() { return critic_head_; }
  nn::Sequential& target_actor() { return target_actor_; }
  std::vector<nn::Parameter*> critic_parameters();
  std::vector<nn::Parameter*> target_critic_parameters();
  nn::AdamState& actor_optimizer() { return actor_adam_; }
  nn::AdamState& critic_optimizer() { return critic_adam_; }

  void save(Container& out, const std::string& prefix);
  void load_into(const Container& in, const std::string& prefix);

 private:
  Tensor critic_forward(nn::Sequential& trunk, nn::Sequential& head, const Tensor& s, const Tensor& a,
                        nn::Mode mode);
  // Backprop through head and trunk; returns the gradient wrt the action input.
  Tensor critic_backward(nn::Sequential& trunk, nn::Sequential& head, const Tensor& dq, bool through_trunk);

  DdpgConfig config_;
  nn::Sequential actor_, critic_trunk_, critic_head_;
  nn::Sequential target_actor_, target_trunk_, target_head_;
  nn::AdamState actor_adam_, critic_adam_;
  std::size_t middle_ = 0;
  std::size_t trunk_width_ = 0;
};

}  // namespace emo

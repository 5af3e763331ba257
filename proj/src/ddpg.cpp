#include "emo/core/ddpg.hpp"

#include <algorithm>
#include <cmath>

#include "emo/core/checkpoint.hpp"
#include "emo/core/errors.hpp"

namespace emo {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidArgument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (!items_.empty() &&
      (t.state.size() != items_.front().state.size() || t.next_state.size() != items_.front().state.size()))
    throw ShapeError("transition state size differs from the buffer's");
  if (t.state.size() != t.next_state.size()) throw ShapeError("transition next state size differs from state");
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, RngStream& rng) const {
  if (items_.empty()) throw StateError("cannot sample an empty replay buffer");
  if (n == 0) throw InvalidArgument("sample size must be positive");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.uniform_index(items_.size());
  return idx;
}

TransitionBatch ReplayBuffer::sample(std::size_t n, RngStream& rng) const {
  const auto idx = sample_indices(n, rng);
  return gather(idx);
}

TransitionBatch ReplayBuffer::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InvalidArgument("transition batch is empty");
  const std::size_t n = indices.size();
  const std::size_t s = items_.at(indices[0]).state.size();
  TransitionBatch b{Tensor({n, s}), Tensor({n, kActionDim}), Tensor({n}), Tensor({n, s})};
  for (std::size_t r = 0; r < n; ++r) {
    const Transition& t = items_.at(indices[r]);
    std::copy(t.state.begin(), t.state.end(), b.state.data() + r * s);
    std::copy(t.next_state.begin(), t.next_state.end(), b.next_state.data() + r * s);
    std::copy(t.action.begin(), t.action.end(), b.action.data() + r * kActionDim);
    b.reward[r] = t.reward;
  }
  return b;
}

void ReplayBuffer::save(Container& out, const std::string& prefix) const {
  out.put_u64(prefix + "/meta", {capacity_, items_.size()});
  if (items_.empty()) return;
  std::vector<std::size_t> all(items_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto b = gather(all);
  out.put(prefix + "/state", b.state);
  out.put(prefix + "/action", b.action);
  out.put(prefix + "/reward", b.reward);
  out.put(prefix + "/next", b.next_state);
}

void ReplayBuffer::load_into(const Container& in, const std::string& prefix) {
  const auto& meta = in.u64(prefix + "/meta");
  if (meta.size() != 2) throw IoError("replay buffer header is malformed");
  capacity_ = meta[0];
  items_.clear();
  const std::size_t n = meta[1];
  if (n == 0) return;
  const Tensor& s = in.tensor(prefix + "/state");
  const Tensor& a = in.tensor(prefix + "/action");
  const Tensor& r = in.tensor(prefix + "/reward");
  const Tensor& s2 = in.tensor(prefix + "/next");
  const std::size_t dim = s.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.state.assign(s.data() + i * dim, s.data() + (i + 1) * dim);
    t.next_state.assign(s2.data() + i * dim, s2.data() + (i + 1) * dim);
    std::copy_n(a.data() + i * kActionDim, kActionDim, t.action.begin());
    t.reward = r[i];
    items_.push_back(std::move(t));
  }
}

OuNoise::OuNoise(OuConfig config, std::size_t dim) : config_(config), x_(dim, 0.0) {
  if (dim == 0) throw InvalidArgument("noise dimension must be positive");
  if (config.theta < 0.0 || config.sigma < 0.0 || !(config.dt > 0.0))
    throw ConfigError("ou parameters must be non-negative with positive dt");
}

const std::vector<double>& OuNoise::advance(RngStream& rng) {
  const double sd = config_.sigma * std::sqrt(config_.dt);
  for (auto& x : x_) x += -config_.theta * x * config_.dt + sd * rng.normal();
  return x_;
}

void OuNoise::set_value(std::vector<double> x) {
  if (x.size() != x_.size()) throw ShapeError("ou noise dimension mismatch");
  x_ = std::move(x);
}

void DdpgConfig::validate() const {
  if (state_dim == 0) throw ConfigError("ddpg state dimension must be positive");
  if (actor_hidden.empty() || critic_hidden.empty()) throw ConfigError("ddpg hidden layer lists must be non-empty");
  for (auto h : actor_hidden)
    if (h == 0) throw ConfigError("ddpg.actor_hidden entries must be positive");
  for (auto h : critic_hidden)
    if (h == 0) throw ConfigError("ddpg.critic_hidden entries must be positive");
  if (!(soft_update > 0.0 && soft_update <= 1.0)) throw ConfigError("ddpg.soft_update must lie in (0, 1]");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("ddpg.gamma must lie in [0, 1]");
  if (buffer == 0 || batch == 0) throw ConfigError("ddpg buffer and batch must be positive");
}

void soft_update(std::span<nn::Parameter* const> online, std::span<nn::Parameter* const> target, double zeta) {
  if (online.size() != target.size()) throw ShapeError("soft update parameter counts differ");
  if (zeta < 0.0 || zeta > 1.0) throw InvalidArgument("soft update rate must lie in [0, 1]");
  for (std::size_t i = 0; i < online.size(); ++i) require_same_shape(online[i]->value, target[i]->value, "soft update");
  for (std::size_t i = 0; i < online.size(); ++i) {
    auto& t = target[i]->value;
    const auto& o = online[i]->value;
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = zeta * o[j] + (1.0 - zeta) * t[j];
  }
}

void soft_update(std::span<Tensor* const> online, std::span<Tensor* const> target, double zeta) {
  if (online.size() != target.size()) throw ShapeError("soft update buffer counts differ");
  if (zeta < 0.0 || zeta > 1.0) throw InvalidArgument("soft update rate must lie in [0, 1]");
  for (std::size_t i = 0; i < online.size(); ++i) require_same_shape(*online[i], *target[i], "soft update");
  for (std::size_t i = 0; i < online.size(); ++i)
    for (std::size_t j = 0; j < target[i]->size(); ++j)
      (*target[i])[j] = zeta * (*online[i])[j] + (1.0 - zeta) * (*target[i])[j];
}

ActorCritic::ActorCritic(const DdpgConfig& config, RngStream& init_rng) : config_(config) {
  config_.validate();
  using nn::LayerKind;
  using nn::LayerSpec;
  std::size_t prev = config_.state_dim;
  const std::size_t dense_count = config_.actor_hidden.size() + 1;
  const std::size_t middle_hidden = std::min((dense_count + 1) / 2, config_.actor_hidden.size()) - 1;
  for (std::size_t i = 0; i < config_.actor_hidden.size(); ++i) {
    const std::size_t h = config_.actor_hidden[i];
    actor_.add(nn::make_layer(LayerSpec::dense(prev, h), init_rng));
    if (i == 0 && config_.batchnorm) actor_.add(nn::make_layer(LayerSpec::batchnorm(h), init_rng));
    actor_.add(nn::make_layer(LayerSpec::activation(LayerKind::relu, {h}), init_rng));
    if (i == middle_hidden) middle_ = actor_.size() - 1;
    prev = h;
  }
  actor_.add(nn::make_layer(LayerSpec::dense(prev, kActionDim), init_rng));
  actor_.add(nn::make_layer(LayerSpec::activation(LayerKind::sigmoid, {kActionDim}), init_rng));

  trunk_width_ = config_.critic_hidden[0];
  critic_trunk_.add(nn::make_layer(LayerSpec::dense(config_.state_dim, trunk_width_), init_rng));
  if (config_.batchnorm) critic_trunk_.add(nn::make_layer(LayerSpec::batchnorm(trunk_width_), init_rng));
  critic_trunk_.add(nn::make_layer(LayerSpec::activation(LayerKind::relu, {trunk_width_}), init_rng));
  prev = trunk_width_ + kActionDim;
  for (std::size_t i = 1; i < config_.critic_hidden.size(); ++i) {
    const std::size_t h = config_.critic_hidden[i];
    critic_head_.add(nn::make_layer(LayerSpec::dense(prev, h), init_rng));
    critic_head_.add(nn::make_layer(LayerSpec::activation(LayerKind::relu, {h}), init_rng));
    prev = h;
  }
  critic_head_.add(nn::make_layer(LayerSpec::dense(prev, 1), init_rng));

  target_actor_ = actor_;
  target_trunk_ = critic_trunk_;
  target_head_ = critic_head_;
  actor_adam_.config.lr = config_.actor_lr;
  critic_adam_.config.lr = config_.critic_lr;
}

Tensor ActorCritic::act(const Tensor& states) { return actor_.forward(states, nn::Mode::eval); }

std::array<double, kActionDim> ActorCritic::act(std::span<const double> state) {
  if (state.size() != config_.state_dim) throw ShapeError("agent state has the wrong dimension");
  const Tensor out = act(Tensor({1, state.size()}, std::vector<double>(state.begin(), state.end())));
  std::array<double, kActionDim> a{};
  std::copy_n(out.data(), kActionDim, a.begin());
  return a;
}

std::vector<double> ActorCritic::middle_activation() const {
  const Tensor& t = actor_.output(middle_);
  return {t.data(), t.data() + t.dim(1)};
}

FaceControls ActorCritic::select_action(std::span<const double> state, OuNoise& noise, RngStream& rng) {
  const auto mu = act(state);
  const auto& n = noise.advance(rng);
  std::array<double, kActionDim> a{};
  for (std::size_t i = 0; i < kActionDim; ++i) a[i] = std::clamp(mu[i] + n[i], 0.0, 1.0);
  return FaceControls::from_array(a);
}

Tensor ActorCritic::critic_forward(nn::Sequential& trunk, nn::Sequential& head, const Tensor& s, const Tensor& a,
                                   nn::Mode mode) {
  if (s.rank() != 2 || a.rank() != 2 || s.dim(0) != a.dim(0) || a.dim(1) != kActionDim)
    throw ShapeError("critic inputs " + shape_string(s.shape()) + " and " + shape_string(a.shape()) + " do not pair");
  const Tensor f = trunk.forward(s, mode);
  const std::size_t n = s.dim(0);
  const std::size_t w = f.dim(1);
  Tensor joined({n, w + kActionDim});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(f.data() + r * w, w, joined.data() + r * (w + kActionDim));
    std::copy_n(a.data() + r * kActionDim, kActionDim, joined.data() + r * (w + kActionDim) + w);
  }
  return head.forward(joined, mode);
}

Tensor ActorCritic::critic_backward(nn::Sequential& trunk, nn::Sequential& head, const Tensor& dq,
                                    bool through_trunk) {
  const Tensor dj = head.backward(dq);
  const std::size_t n = dj.dim(0);
  const std::size_t w = trunk_width_;
  Tensor da({n, kActionDim});
  Tensor df({n, w});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(dj.data() + r * (w + kActionDim), w, df.data() + r * w);
    std::copy_n(dj.data() + r * (w + kActionDim) + w, kActionDim, da.data() + r * kActionDim);
  }
  if (through_trunk) trunk.backward(df);
  return da;
}

Tensor ActorCritic::q_value(const Tensor& states, const Tensor& actions, nn::Mode mode) {
  return critic_forward(critic_trunk_, critic_head_, states, actions, mode);
}

Tensor ActorCritic::target_q(const Tensor& states, const Tensor& actions) {
  return critic_forward(target_trunk_, target_head_, states, actions, nn::Mode::eval);
}

Tensor ActorCritic::critic_targets(const TransitionBatch& batch) {
  if (batch.size() == 0) throw InvalidArgument("transition batch is empty");
  const Tensor mu = target_actor_.forward(batch.next_state, nn::Mode::eval);
  const Tensor q = target_q(batch.next_state, mu);
  Tensor y({batch.size(), 1});
  for (std::size_t i = 0; i < batch.size(); ++i) y[i] = config_.reward_scale * batch.reward[i] + config_.gamma * q[i];
  return y;
}

double ActorCritic::critic_update(const TransitionBatch& batch) {
  const Tensor y = critic_targets(batch);
  const Tensor q = q_value(batch.state, batch.action, nn::Mode::train);
  Tensor dq;
  const double loss = nn::mse(q, y, &dq);
  auto params = critic_parameters();
  for (auto* p : params) p->zero_grad();
  critic_backward(critic_trunk_, critic_head_, dq, true);
  nn::adam_step(params, critic_adam_);
  return loss;
}

Tensor ActorCritic::action_gradient(const Tensor& states, const Tensor& actions) {
  const Tensor q = q_value(states, actions, nn::Mode::eval);
  Tensor ones(q.shape(), 1.0);
  const Tensor da = critic_backward(critic_trunk_, critic_head_, ones, false);
  for (auto* p : critic_parameters()) p->zero_grad();
  return da;
}

void ActorCritic::actor_update(const TransitionBatch& batch) {
  if (batch.size() == 0) throw InvalidArgument("transition batch is empty");
  const Tensor mu = actor_.forward(batch.state, nn::Mode::train);
  Tensor da = action_gradient(batch.state, mu);
  // Ascend Q: minimize -mean Q.
  da *= -1.0 / static_cast<double>(batch.size());
  actor_.zero_grad();
  actor_.backward(da);
  const auto params = actor_.parameters();
  nn::adam_step(params, actor_adam_);
}

std::vector<nn::Parameter*> ActorCritic::critic_parameters() {
  auto p = critic_trunk_.parameters();
  for (auto* q : critic_head_.parameters()) p.push_back(q);
  return p;
}

std::vector<nn::Parameter*> ActorCritic::target_critic_parameters() {
  auto p = target_trunk_.parameters();
  for (auto* q : target_head_.parameters()) p.push_back(q);
  return p;
}

void ActorCritic::update_targets() {
  const double z = config_.soft_update;
  soft_update(actor_.parameters(), target_actor_.parameters(), z);
  soft_update(critic_parameters(), target_critic_parameters(), z);
  soft_update(actor_.buffers(), target_actor_.buffers(), z);
  soft_update(critic_trunk_.buffers(), target_trunk_.buffers(), z);
}

void ActorCritic::save(Container& out, const std::string& prefix) {
  out.put_params(prefix + "/actor", actor_.parameters());
  out.put_buffers(prefix + "/actor_buf", actor_.buffers());
  out.put_params(prefix + "/critic", critic_parameters());
  out.put_buffers(prefix + "/critic_buf", critic_trunk_.buffers());
  out.put_params(prefix + "/target_actor", target_actor_.parameters());
  out.put_buffers(prefix + "/target_actor_buf", target_actor_.buffers());
  out.put_params(prefix + "/target_critic", target_critic_parameters());
  out.put_buffers(prefix + "/target_critic_buf", target_trunk_.buffers());
  out.put_adam(prefix + "/actor_adam", actor_adam_);
  out.put_adam(prefix + "/critic_adam", critic_adam_);
}

void ActorCritic::load_into(const Container& in, const std::string& prefix) {
  in.get_params(prefix + "/actor", actor_.parameters());
  in.get_buffers(prefix + "/actor_buf", actor_.buffers());
  in.get_params(prefix + "/critic", critic_parameters());
  in.get_buffers(prefix + "/critic_buf", critic_trunk_.buffers());
  in.get_params(prefix + "/target_actor", target_actor_.parameters());
  in.get_buffers(prefix + "/target_actor_buf", target_actor_.buffers());
  in.get_params(prefix + "/target_critic", target_critic_parameters());
  in.get_buffers(prefix + "/target_critic_buf", target_trunk_.buffers());
  in.get_adam(prefix + "/actor_adam", actor_adam_);
  in.get_adam(prefix + "/critic_adam", critic_adam_);
}

}  // namespace emo

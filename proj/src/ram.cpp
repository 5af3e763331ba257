#include "emo/core/ram.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "emo/core/checkpoint.hpp"
#include "emo/core/errors.hpp"

namespace emo {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::RowVectorXd;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;

void GlimpseConfig::validate(std::size_t image_side) const {
  if (scales < 1) throw ConfigError("ram.scales must be at least 1");
  if (patch == 0 || patch % 2 != 0) throw ConfigError("ram.patch must be even and positive");
  if (patch > image_side) throw ConfigError("ram.patch exceeds the image side");
  if (scale_factor < 1) throw ConfigError("ram.scale_factor must be at least 1");
  if (glimpses < 1) throw ConfigError("ram.glimpses must be at least 1");
}

std::vector<double> extract_glimpse(std::span<const double> image, std::size_t side, Location location,
                                    const GlimpseConfig& config) {
  if (image.size() != side * side) throw ShapeError("glimpse image size does not match side");
  location = clamp_location(location);
  const auto si = static_cast<long>(side);
  const long cx = std::lround((location.x + 1.0) * 0.5 * static_cast<double>(side));
  const long cy = std::lround((location.y + 1.0) * 0.5 * static_cast<double>(side));
  const std::size_t p = config.patch;
  std::vector<double> out(config.features(), 0.0);
  long pool = 1;
  for (std::size_t s = 0; s < config.scales; ++s) {
    const long span = static_cast<long>(p) * pool;
    const long r0 = cy - span / 2;
    const long c0 = cx - span / 2;
    const double inv = 1.0 / static_cast<double>(pool * pool);
    double* dst = out.data() + s * p * p;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        double acc = 0.0;
        for (long a = 0; a < pool; ++a) {
          const long r = r0 + static_cast<long>(i) * pool + a;
          if (r < 0 || r >= si) continue;
          for (long b = 0; b < pool; ++b) {
            const long c = c0 + static_cast<long>(j) * pool + b;
            if (c < 0 || c >= si) continue;
            acc += image[static_cast<std::size_t>(r * si + c)];
          }
        }
        dst[i * p + j] = acc * inv;
      }
    }
    pool *= static_cast<long>(config.scale_factor);
  }
  return out;
}

double gaussian_log_prob(Location sample, Location mean, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian sigma must be positive");
  const double dx = sample.x - mean.x;
  const double dy = sample.y - mean.y;
  return -std::log(2.0 * std::numbers::pi * sigma * sigma) - (dx * dx + dy * dy) / (2.0 * sigma * sigma);
}

void RamConfig::validate() const {
  glimpse.validate(image_side);
  if (glimpse_hidden == 0 || location_hidden == 0 || core_hidden == 0) throw ConfigError("ram hidden sizes must be positive");
  if (!(location_sigma > 0.0)) throw ConfigError("ram.sigma must be positive");
  if (!(reward_tolerance > 0.0)) throw ConfigError("ram.reward_tolerance must be positive");
  if (batch == 0) throw ConfigError("ram.batch must be positive");
}

namespace {

enum P : std::size_t { wg1, bg1, wl1, bl1, wg2, wg3, bg2, whh, whg, bh, wloc, bloc, wa, ba, baseline, kParamCount };

const char* const kNames[kParamCount] = {"wg1", "bg1", "wl1", "bl1", "wg2", "wg3", "bg2", "whh",
                                         "whg", "bh",  "wloc", "bloc", "wa", "ba", "baseline"};

CMapMat cm(const nn::Parameter& p) {
  const auto& s = p.value.shape();
  const Eigen::Index rows = static_cast<Eigen::Index>(s[0]);
  const Eigen::Index cols = s.size() > 1 ? static_cast<Eigen::Index>(s[1]) : 1;
  return CMapMat(p.value.data(), rows, cols);
}
MapMat gm(nn::Parameter& p) {
  const auto& s = p.grad.shape();
  const Eigen::Index rows = static_cast<Eigen::Index>(s[0]);
  const Eigen::Index cols = s.size() > 1 ? static_cast<Eigen::Index>(s[1]) : 1;
  return MapMat(p.grad.data(), rows, cols);
}
Eigen::Map<const Vec> cv(const nn::Parameter& p) {
  return Eigen::Map<const Vec>(p.value.data(), static_cast<Eigen::Index>(p.value.size()));
}
Eigen::Map<Vec> gv(nn::Parameter& p) { return Eigen::Map<Vec>(p.grad.data(), static_cast<Eigen::Index>(p.grad.size())); }

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }
Mat relu_mask(const Mat& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

constexpr double kAffectCentre = 5.0;
constexpr double kAffectHalfRange = 4.0;

}  // namespace

struct RamModel::Rollout {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<Mat> glimpse, loc, pre_g, pre_l, pre_gg, gvec, h, mu;
  std::vector<std::vector<Location>> raw;  // [batch][steps]
  Mat head;                                // normalized head output [batch, 2]
};

RamModel::RamModel(const RamConfig& config, RngStream& init_rng) : config_(config) {
  config_.validate();
  adam_.config = config_.adam;
  const std::size_t F = config_.glimpse.features();
  const std::size_t G = config_.glimpse_hidden, L = config_.location_hidden, H = config_.core_hidden;
  auto mk = [&](P id, Shape shape, std::size_t fan_in) {
    Tensor t(shape);
    if (fan_in > 0) nn::init_uniform_fan_in(t, fan_in, init_rng);
    params_[id] = nn::Parameter(kNames[id], std::move(t));
  };
  params_.resize(kParamCount);
  mk(wg1, {G, F}, F);
  mk(bg1, {G}, F);
  mk(wl1, {L, 2}, 2);
  mk(bl1, {L}, 2);
  mk(wg2, {H, G}, G + L);
  mk(wg3, {H, L}, G + L);
  mk(bg2, {H}, G + L);
  mk(whh, {H, H}, 2 * H);
  mk(whg, {H, H}, 2 * H);
  mk(bh, {H}, 2 * H);
  mk(wloc, {2, H}, H);
  mk(bloc, {2}, H);
  mk(wa, {2, H}, H);
  mk(ba, {2}, 0);
  mk(baseline, {1}, 0);
}

std::vector<nn::Parameter*> RamModel::parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

nn::Parameter& RamModel::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw InvalidArgument("unknown ram parameter '" + name + "'");
}

RamState RamModel::initial_state() const {
  return RamState{std::vector<double>(config_.core_hidden, 0.0), Location{}, 0};
}

RamStepResult RamModel::step(RamState& state, std::span<const double> image, RngStream& rng, double sigma) const {
  if (state.step >= config_.glimpse.glimpses) throw StateError("ram episode already took every glimpse");
  if (state.hidden.size() != config_.core_hidden) throw ShapeError("ram hidden state has the wrong size");
  if (sigma < 0.0) throw InvalidArgument("ram sigma must be non-negative");
  const auto x = extract_glimpse(image, config_.image_side, state.location, config_.glimpse);
  const Vec xg = Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
  Vec l(2);
  l << state.location.x, state.location.y;
  const Vec hg = (xg * cm(params_[wg1]).transpose() + cv(params_[bg1])).cwiseMax(0.0);
  const Vec hl = (l * cm(params_[wl1]).transpose() + cv(params_[bl1])).cwiseMax(0.0);
  const Vec g =
      (hg * cm(params_[wg2]).transpose() + hl * cm(params_[wg3]).transpose() + cv(params_[bg2])).cwiseMax(0.0);
  const Vec hprev = Eigen::Map<const Vec>(state.hidden.data(), static_cast<Eigen::Index>(state.hidden.size()));
  const Vec h = (hprev * cm(params_[whh]).transpose() + g * cm(params_[whg]).transpose() + cv(params_[bh]))
                    .array()
                    .tanh()
                    .matrix();
  const Vec mu = (h * cm(params_[wloc]).transpose() + cv(params_[bloc])).array().tanh().matrix();
  RamStepResult r;
  r.mean = {mu[0], mu[1]};
  if (sigma > 0.0) {
    r.raw_sample = {rng.normal(mu[0], sigma), rng.normal(mu[1], sigma)};
    r.log_prob = gaussian_log_prob(r.raw_sample, r.mean, sigma);
  } else {
    r.raw_sample = r.mean;
    r.log_prob = 0.0;
  }
  r.next_location = clamp_location(r.raw_sample);
  std::copy(h.data(), h.data() + h.size(), state.hidden.begin());
  state.location = r.next_location;
  ++state.step;
  return r;
}

AffectVector RamModel::read_out(const RamState& state) const {
  const Vec h = Eigen::Map<const Vec>(state.hidden.data(), static_cast<Eigen::Index>(state.hidden.size()));
  const Vec y = h * cm(params_[wa]).transpose() + cv(params_[ba]);
  return {kAffectCentre + kAffectHalfRange * y[0], kAffectCentre + kAffectHalfRange * y[1]};
}

RamEpisode RamModel::episode(std::span<const double> image, RngStream& rng, double sigma) const {
  RamState s = initial_state();
  RamEpisode ep;
  for (std::size_t t = 0; t < config_.glimpse.glimpses; ++t) {
    const auto r = step(s, image, rng, sigma);
    ep.locations.push_back(r.next_location);
    ep.log_probs.push_back(r.log_prob);
  }
  ep.estimate = read_out(s);
  return ep;
}

AffectVector RamModel::estimate(std::span<const double> image) const {
  RngStream unused;
  return episode(image, unused, 0.0).estimate;
}

double RamModel::tolerance_reward(const AffectVector& estimate, const AffectVector& target) const {
  const double tol = config_.reward_tolerance;
  return (std::abs(estimate.valence - target.valence) < tol && std::abs(estimate.arousal - target.arousal) < tol)
             ? 1.0
             : 0.0;
}

RamModel::Rollout RamModel::forward_batch(std::span<const Image* const> images, RngStream* rng, double sigma,
                                          const std::vector<std::vector<Location>>* forced) const {
  const std::size_t M = images.size();
  const std::size_t T = config_.glimpse.glimpses;
  const std::size_t F = config_.glimpse.features();
  const std::size_t side = config_.image_side;
  if (M == 0) throw InvalidArgument("ram batch is empty");
  if (forced && forced->size() != M) throw ShapeError("forced samples do not match the batch");
  Rollout r;
  r.batch = M;
  r.steps = T;
  r.raw.assign(M, std::vector<Location>(T));
  std::vector<Location> current(M);
  Mat hprev = Mat::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(config_.core_hidden));
  r.h.push_back(hprev);
  for (std::size_t t = 0; t < T; ++t) {
    Mat X(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(F));
    Mat Lm(static_cast<Eigen::Index>(M), 2);
    for (std::size_t i = 0; i < M; ++i) {
      if (images[i]->size() != side * side) throw ShapeError("ram image has the wrong size");
      const auto x = extract_glimpse(*images[i], side, current[i], config_.glimpse);
      X.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(F));
      Lm(static_cast<Eigen::Index>(i), 0) = current[i].x;
      Lm(static_cast<Eigen::Index>(i), 1) = current[i].y;
    }
    Mat pg = (X * cm(params_[wg1]).transpose()).rowwise() + cv(params_[bg1]);
    Mat pl = (Lm * cm(params_[wl1]).transpose()).rowwise() + cv(params_[bl1]);
    Mat pgg = (relu(pg) * cm(params_[wg2]).transpose() + relu(pl) * cm(params_[wg3]).transpose()).rowwise() +
              cv(params_[bg2]);
    Mat g = relu(pgg);
    Mat h = ((hprev * cm(params_[whh]).transpose() + g * cm(params_[whg]).transpose()).rowwise() + cv(params_[bh]))
                .array()
                .tanh()
                .matrix();
    Mat mu = ((h * cm(params_[wloc]).transpose()).rowwise() + cv(params_[bloc])).array().tanh().matrix();
    for (std::size_t i = 0; i < M; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      Location raw;
      if (forced) {
        if ((*forced)[i].size() != T) throw ShapeError("forced samples do not match the glimpse count");
        raw = (*forced)[i][t];
      } else if (sigma > 0.0) {
        raw = {rng->normal(mu(ii, 0), sigma), rng->normal(mu(ii, 1), sigma)};
      } else {
        raw = {mu(ii, 0), mu(ii, 1)};
      }
      r.raw[i][t] = raw;
      current[i] = clamp_location(raw);
    }
    r.glimpse.push_back(std::move(X));
    r.loc.push_back(std::move(Lm));
    r.pre_g.push_back(std::move(pg));
    r.pre_l.push_back(std::move(pl));
    r.pre_gg.push_back(std::move(pgg));
    r.gvec.push_back(std::move(g));
    r.h.push_back(h);
    r.mu.push_back(std::move(mu));
    hprev = std::move(h);
  }
  r.head = (hprev * cm(params_[wa]).transpose()).rowwise() + cv(params_[ba]);
  return r;
}

namespace {

Mat scaled_targets(std::span<const AffectVector> targets) {
  Mat z(static_cast<Eigen::Index>(targets.size()), 2);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    z(static_cast<Eigen::Index>(i), 0) = (targets[i].valence - kAffectCentre) / kAffectHalfRange;
    z(static_cast<Eigen::Index>(i), 1) = (targets[i].arousal - kAffectCentre) / kAffectHalfRange;
  }
  return z;
}

// REINFORCE covers the samples that feed a later glimpse; the last one never does.
std::size_t policy_steps(std::size_t T) { return T > 0 ? T - 1 : 0; }

}  // namespace

double RamModel::objective_from(const Rollout& r, std::span<const AffectVector> targets,
                                const std::vector<double>& rewards, double sigma, RamLossWeights weights,
                                double* regression, double* affect_mse) const {
  const auto M = static_cast<double>(r.batch);
  const Mat z = scaled_targets(targets);
  const double reg = (r.head - z).squaredNorm() / (2.0 * M);
  const double b = params_[baseline].value[0];
  double rf = 0.0, base = 0.0;
  for (std::size_t i = 0; i < r.batch; ++i) {
    const double adv = rewards[i] - b;
    base += adv * adv;
    if (weights.reinforce != 0.0) {
      for (std::size_t t = 0; t < policy_steps(r.steps); ++t) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Location mean{r.mu[t](ii, 0), r.mu[t](ii, 1)};
        rf -= adv * gaussian_log_prob(r.raw[i][t], mean, sigma);
      }
    }
  }
  rf /= M;
  base /= M;
  if (regression) *regression = reg;
  if (affect_mse) *affect_mse = reg * kAffectHalfRange * kAffectHalfRange;
  return weights.regression * reg + weights.reinforce * config_.reinforce_weight * rf + weights.baseline * base;
}

RamBatchResult RamModel::hybrid_gradients(std::span<const Image* const> images,
                                          std::span<const AffectVector> targets, RngStream& rng, double sigma,
                                          const std::vector<std::vector<Location>>* forced_samples,
                                          const std::vector<double>* rewards, RamLossWeights weights) {
  if (images.empty()) throw InvalidArgument("ram batch is empty");
  if (targets.size() != images.size()) throw ShapeError("ram targets do not match the batch");
  if (!(sigma > 0.0)) throw InvalidArgument("ram training needs a positive sigma");
  const Rollout r = forward_batch(images, &rng, sigma, forced_samples);
  const std::size_t M = r.batch;
  const std::size_t T = r.steps;

  RamBatchResult out;
  out.raw_samples = r.raw;
  for (std::size_t i = 0; i < M; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.estimates.push_back({kAffectCentre + kAffectHalfRange * r.head(ii, 0),
                             kAffectCentre + kAffectHalfRange * r.head(ii, 1)});
  }
  if (rewards) {
    if (rewards->size() != M) throw ShapeError("ram rewards do not match the batch");
    out.rewards = *rewards;
  } else {
    for (std::size_t i = 0; i < M; ++i) out.rewards.push_back(tolerance_reward(out.estimates[i], targets[i]));
  }
  out.objective = objective_from(r, targets, out.rewards, sigma, weights, &out.regression_loss, &out.affect_mse);

  for (auto& p : params_) p.zero_grad();
  const double Md = static_cast<double>(M);
  const double b = params_[baseline].value[0];
  const double rf_scale = weights.reinforce * config_.reinforce_weight;

  Mat dy = (r.head - scaled_targets(targets)) * (weights.regression / Md);
  gm(params_[wa]) += dy.transpose() * r.h[T];
  gv(params_[ba]) += dy.colwise().sum();
  Mat dh = dy * cm(params_[wa]);
  double db = 0.0;
  for (std::size_t i = 0; i < M; ++i) db += -2.0 * (out.rewards[i] - b);
  params_[baseline].grad[0] = weights.baseline * db / Md;

  for (std::size_t t = T; t-- > 0;) {
    const Mat& h = r.h[t + 1];
    const Mat& mu = r.mu[t];
    if (t < policy_steps(T) && rf_scale != 0.0) {
      Mat dmu(static_cast<Eigen::Index>(M), 2);
      for (std::size_t i = 0; i < M; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double c = -rf_scale * (out.rewards[i] - b) / (Md * sigma * sigma);
        dmu(ii, 0) = c * (r.raw[i][t].x - mu(ii, 0));
        dmu(ii, 1) = c * (r.raw[i][t].y - mu(ii, 1));
      }
      const Mat dpre = dmu.cwiseProduct((1.0 - mu.array().square()).matrix());
      gm(params_[wloc]) += dpre.transpose() * h;
      gv(params_[bloc]) += dpre.colwise().sum();
      if (config_.policy_gradient_to_core) dh += dpre * cm(params_[wloc]);
    }
    const Mat dz = dh.cwiseProduct((1.0 - h.array().square()).matrix());
    gm(params_[whh]) += dz.transpose() * r.h[t];
    gm(params_[whg]) += dz.transpose() * r.gvec[t];
    gv(params_[bh]) += dz.colwise().sum();
    const Mat dgg = (dz * cm(params_[whg])).cwiseProduct(relu_mask(r.pre_gg[t]));
    gm(params_[wg2]) += dgg.transpose() * relu(r.pre_g[t]);
    gm(params_[wg3]) += dgg.transpose() * relu(r.pre_l[t]);
    gv(params_[bg2]) += dgg.colwise().sum();
    const Mat dpg = (dgg * cm(params_[wg2])).cwiseProduct(relu_mask(r.pre_g[t]));
    const Mat dpl = (dgg * cm(params_[wg3])).cwiseProduct(relu_mask(r.pre_l[t]));
    gm(params_[wg1]) += dpg.transpose() * r.glimpse[t];
    gv(params_[bg1]) += dpg.colwise().sum();
    gm(params_[wl1]) += dpl.transpose() * r.loc[t];
    gv(params_[bl1]) += dpl.colwise().sum();
    dh = dz * cm(params_[whh]);
  }
  return out;
}

double RamModel::hybrid_objective(std::span<const Image* const> images, std::span<const AffectVector> targets,
                                  const std::vector<std::vector<Location>>& forced_samples,
                                  const std::vector<double>& rewards, double sigma, RamLossWeights weights) const {
  if (targets.size() != images.size() || rewards.size() != images.size())
    throw ShapeError("ram objective inputs do not match the batch");
  const Rollout r = forward_batch(images, nullptr, sigma, &forced_samples);
  return objective_from(r, targets, rewards, sigma, weights, nullptr, nullptr);
}

RamBatchResult RamModel::train_batch(std::span<const Image* const> images, std::span<const AffectVector> targets,
                                     RngStream& rng) {
  auto result = hybrid_gradients(images, targets, rng, config_.location_sigma);
  const auto params = parameters();
  nn::adam_step(params, adam_);
  return result;
}

void RamModel::save(Container& out, const std::string& prefix) const {
  const GlimpseConfig& g = config_.glimpse;
  out.put_u64(prefix + "/shape", {g.scales, g.patch, g.scale_factor, g.glimpses, config_.image_side,
                                  config_.glimpse_hidden, config_.location_hidden, config_.core_hidden,
                                  config_.policy_gradient_to_core ? 1u : 0u});
  out.put(prefix + "/hyper", Tensor({8}, {config_.location_sigma, config_.reward_tolerance, config_.reinforce_weight,
                                          static_cast<double>(config_.batch), config_.adam.lr, config_.adam.beta1,
                                          config_.adam.beta2, config_.adam.eps}));
  std::vector<nn::Parameter*> ptrs;
  for (auto& p : const_cast<std::vector<nn::Parameter>&>(params_)) ptrs.push_back(&p);
  out.put_params(prefix + "/params", ptrs);
  out.put_adam(prefix + "/adam", adam_);
}

RamModel RamModel::load(const Container& in, const std::string& prefix) {
  const auto& s = in.u64(prefix + "/shape");
  const Tensor& hy = in.tensor(prefix + "/hyper");
  if (s.size() != 9 || hy.size() != 8) throw IoError("ram checkpoint header is malformed");
  RamConfig c;
  c.glimpse = {s[0], s[1], s[2], s[3]};
  c.image_side = s[4];
  c.glimpse_hidden = s[5];
  c.location_hidden = s[6];
  c.core_hidden = s[7];
  c.policy_gradient_to_core = s[8] != 0;
  c.location_sigma = hy[0];
  c.reward_tolerance = hy[1];
  c.reinforce_weight = hy[2];
  c.batch = static_cast<std::size_t>(hy[3]);
  c.adam = {hy[4], hy[5], hy[6], hy[7]};
  RngStream init(0, "ram/load");
  RamModel m(c, init);
  const auto ptrs = m.parameters();
  in.get_params(prefix + "/params", ptrs);
  in.get_adam(prefix + "/adam", m.adam_);
  return m;
}

RamMae evaluate_mae(const RamModel& model, const std::vector<Stimulus>& items) {
  if (items.empty()) throw InvalidArgument("cannot evaluate on an empty set");
  RamMae mae;
  for (const auto& s : items) {
    const auto e = model.estimate(s.image);
    mae.valence += std::abs(e.valence - s.label.valence);
    mae.arousal += std::abs(e.arousal - s.label.arousal);
  }
  mae.valence /= static_cast<double>(items.size());
  mae.arousal /= static_cast<double>(items.size());
  return mae;
}

RamTrainResult train_ram(const std::vector<Stimulus>& train, const std::vector<Stimulus>& test, std::size_t epochs,
                         const RamConfig& config, std::uint64_t seed) {
  if (train.empty()) throw InvalidArgument("ram training corpus is empty");
  RngStream init(seed, "ram/init");
  RngStream shuffle(seed, "ram/shuffle");
  RngStream policy(seed, "ram/policy");
  RamTrainResult result{RamModel(config, init), {}, {}};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t B = config.batch;
  std::vector<const Image*> images;
  std::vector<AffectVector> targets;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
    double sq = 0.0, reward = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::size_t end = std::min(order.size(), start + B);
      images.clear();
      targets.clear();
      for (std::size_t k = start; k < end; ++k) {
        images.push_back(&train[order[k]].image);
        targets.push_back(train[order[k]].label);
      }
      const auto r = result.model.train_batch(images, targets, policy);
      const auto n = static_cast<double>(end - start);
      sq += r.affect_mse * n;
      reward += std::accumulate(r.rewards.begin(), r.rewards.end(), 0.0);
      seen += end - start;
    }
    result.curve.push_back({epoch, sq / static_cast<double>(seen), reward / static_cast<double>(seen)});
  }
  if (!test.empty()) result.held_out = evaluate_mae(result.model, test);
  return result;
}

}  // namespace emo

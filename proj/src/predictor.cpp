#include "emo/core/predictor.hpp"

#include <algorithm>
#include <cmath>

#include "emo/core/checkpoint.hpp"
#include "emo/core/errors.hpp"

namespace emo {

bool PredictorState::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const LstmLayerState& l) { return l.h.all_finite() && l.c.all_finite(); });
}

ConvLstmCell::ConvLstmCell(std::size_t in_channels, std::size_t hidden, std::size_t side, std::size_t kernel,
                           RngStream& rng)
    : in_channels_(in_channels), hidden_(hidden), side_(side), kernel_(kernel) {
  if (in_channels == 0 || hidden == 0 || side == 0) throw ShapeError("conv lstm dimensions must be positive");
  if (kernel % 2 == 0) throw ShapeError("conv lstm kernel must be odd");
  const std::size_t cin = in_channels + hidden;
  Tensor w({4 * hidden, cin, kernel, kernel});
  nn::init_uniform_fan_in(w, cin * kernel * kernel, rng);
  Tensor b({4 * hidden});
  nn::init_uniform_fan_in(b, cin * kernel * kernel, rng);
  weight_ = nn::Parameter("weight", std::move(w));
  bias_ = nn::Parameter("bias", std::move(b));
  peep_i_ = nn::Parameter("peep_i", Tensor({hidden, side, side}));
  peep_f_ = nn::Parameter("peep_f", Tensor({hidden, side, side}));
  peep_o_ = nn::Parameter("peep_o", Tensor({hidden, side, side}));
}

LstmLayerState ConvLstmCell::zero_state(std::size_t batch) const {
  return {Tensor({batch, hidden_, side_, side_}), Tensor({batch, hidden_, side_, side_})};
}

LstmLayerState ConvLstmCell::step(const Tensor& x, const LstmLayerState& state, Cache* cache) const {
  if (x.rank() != 4 || x.dim(1) != in_channels_ || x.dim(2) != side_ || x.dim(3) != side_)
    throw ShapeError("conv lstm input " + shape_string(x.shape()) + " does not match the cell");
  const std::size_t B = x.dim(0);
  const Shape hs{B, hidden_, side_, side_};
  if (state.h.shape() != hs || state.c.shape() != hs)
    throw ShapeError("conv lstm state " + shape_string(state.h.shape()) + " does not match " + shape_string(hs));
  const std::size_t plane = side_ * side_;
  const std::size_t cin = in_channels_ + hidden_;
  Tensor concat({B, cin, side_, side_});
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(x.data() + b * in_channels_ * plane, in_channels_ * plane, concat.data() + b * cin * plane);
    std::copy_n(state.h.data() + b * hidden_ * plane, hidden_ * plane,
                concat.data() + (b * cin + in_channels_) * plane);
  }
  const Tensor z = nn::conv2d_forward(concat, weight_.value, bias_.value);
  Tensor gi(hs), gf(hs), gg(hs), go(hs), c(hs), tc(hs), h(hs);
  const std::size_t hp = hidden_ * plane;
  for (std::size_t b = 0; b < B; ++b) {
    const double* zb = z.data() + b * 4 * hp;
    for (std::size_t j = 0; j < hp; ++j) {
      const std::size_t o = b * hp + j;
      const double cp = state.c[o];
      const double i = nn::sigmoid(zb[j] + peep_i_.value[j] * cp);
      const double f = nn::sigmoid(zb[hp + j] + peep_f_.value[j] * cp);
      const double g = std::tanh(zb[2 * hp + j]);
      const double cn = f * cp + i * g;
      const double og = nn::sigmoid(zb[3 * hp + j] + peep_o_.value[j] * cn);
      const double t = std::tanh(cn);
      gi[o] = i;
      gf[o] = f;
      gg[o] = g;
      go[o] = og;
      c[o] = cn;
      tc[o] = t;
      h[o] = og * t;
    }
  }
  LstmLayerState next{h, c};
  if (cache) {
    cache->concat = std::move(concat);
    cache->c_prev = state.c;
    cache->i = std::move(gi);
    cache->f = std::move(gf);
    cache->g = std::move(gg);
    cache->o = std::move(go);
    cache->c = std::move(c);
    cache->tanh_c = std::move(tc);
  }
  return next;
}

Tensor ConvLstmCell::backward(const Cache& cache, const Tensor& dh, const Tensor& dc, Tensor& dh_prev,
                              Tensor& dc_prev) {
  require_same_shape(dh, cache.c, "conv lstm dH");
  require_same_shape(dc, cache.c, "conv lstm dC");
  const std::size_t B = cache.c.dim(0);
  const std::size_t plane = side_ * side_;
  const std::size_t hp = hidden_ * plane;
  const std::size_t cin = in_channels_ + hidden_;
  Tensor dz({B, 4 * hidden_, side_, side_});
  dc_prev = Tensor(cache.c.shape());
  for (std::size_t b = 0; b < B; ++b) {
    double* dzb = dz.data() + b * 4 * hp;
    for (std::size_t j = 0; j < hp; ++j) {
      const std::size_t o = b * hp + j;
      const double i = cache.i[o], f = cache.f[o], g = cache.g[o], og = cache.o[o];
      const double t = cache.tanh_c[o], cp = cache.c_prev[o], cn = cache.c[o];
      const double d_o = dh[o] * t * og * (1.0 - og);
      const double dct = dc[o] + dh[o] * og * (1.0 - t * t) + d_o * peep_o_.value[j];
      const double d_i = dct * g * i * (1.0 - i);
      const double d_f = dct * cp * f * (1.0 - f);
      const double d_g = dct * i * (1.0 - g * g);
      dzb[j] = d_i;
      dzb[hp + j] = d_f;
      dzb[2 * hp + j] = d_g;
      dzb[3 * hp + j] = d_o;
      peep_i_.grad[j] += d_i * cp;
      peep_f_.grad[j] += d_f * cp;
      peep_o_.grad[j] += d_o * cn;
      dc_prev[o] = dct * f + d_i * peep_i_.value[j] + d_f * peep_f_.value[j];
    }
  }
  const Tensor dconcat = nn::conv2d_backward(cache.concat, weight_.value, dz, &weight_.grad, &bias_.grad);
  Tensor dx({B, in_channels_, side_, side_});
  dh_prev = Tensor(cache.c.shape());
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(dconcat.data() + b * cin * plane, in_channels_ * plane, dx.data() + b * in_channels_ * plane);
    std::copy_n(dconcat.data() + (b * cin + in_channels_) * plane, hp, dh_prev.data() + b * hp);
  }
  return dx;
}

void PredictorConfig::validate() const {
  if (side == 0) throw ConfigError("predictor side must be positive");
  if (hidden == 0) throw ConfigError("predictor.hidden_channels must be positive");
  if (kernel % 2 == 0) throw ConfigError("predictor.kernel must be odd");
  if (layers == 0) throw ConfigError("predictor.layers must be positive");
  if (!(intero_max > intero_min)) throw ConfigError("predictor.intero_max must exceed predictor.intero_min");
}

namespace {
constexpr std::size_t kInputChannels = 3;  // image + two interoception planes
}

Predictor::Predictor(const PredictorConfig& config, RngStream& init_rng) : config_(config) {
  config_.validate();
  adam_.config = config_.adam;
  for (std::size_t l = 0; l < config_.layers; ++l)
    cells_.emplace_back(l == 0 ? kInputChannels : config_.hidden, config_.hidden, config_.side, config_.kernel,
                        init_rng);
  const std::size_t H = config_.hidden;
  const std::size_t flat = H * config_.side * config_.side;
  Tensor iw({1, H, 1, 1});
  nn::init_uniform_fan_in(iw, H, init_rng);
  Tensor ib({1});
  nn::init_uniform_fan_in(ib, H, init_rng);
  Tensor nw({2, flat});
  nn::init_uniform_fan_in(nw, flat, init_rng);
  Tensor nb({2});
  nn::init_uniform_fan_in(nb, flat, init_rng);
  img_w_ = nn::Parameter("image_weight", std::move(iw));
  img_b_ = nn::Parameter("image_bias", std::move(ib));
  int_w_ = nn::Parameter("intero_weight", std::move(nw));
  int_b_ = nn::Parameter("intero_bias", std::move(nb));
}

PredictorState Predictor::initial_state() const {
  PredictorState s;
  for (const auto& c : cells_) s.layers.push_back(c.zero_state(1));
  return s;
}

double Predictor::scale_intero(double value) const {
  return (value - config_.intero_min) / (config_.intero_max - config_.intero_min);
}
double Predictor::unscale_intero(double value) const {
  return config_.intero_min + value * (config_.intero_max - config_.intero_min);
}

Tensor Predictor::input_tensor(const Image& image, const AffectVector& a) const {
  const std::size_t plane = config_.side * config_.side;
  if (image.size() != plane) throw ShapeError("predictor image has the wrong size");
  Tensor x({1, kInputChannels, config_.side, config_.side});
  std::copy(image.begin(), image.end(), x.data());
  std::fill_n(x.data() + plane, plane, scale_intero(a.valence));
  std::fill_n(x.data() + 2 * plane, plane, scale_intero(a.arousal));
  return x;
}

Prediction Predictor::predict(const Image& image, const AffectVector& interoception, PredictorState& state) const {
  if (state.layers.size() != cells_.size()) throw ShapeError("predictor state has the wrong layer count");
  Tensor x = input_tensor(image, interoception);
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    state.layers[l] = cells_[l].step(x, state.layers[l], nullptr);
    x = state.layers[l].h;
  }
  const Tensor img = nn::conv2d_forward(x, img_w_.value, img_b_.value);
  const Tensor flat = x.reshaped({1, x.size()});
  const Tensor y = nn::dense_forward(flat, int_w_.value, int_b_.value);
  Prediction p;
  p.image.resize(img.size());
  for (std::size_t j = 0; j < img.size(); ++j) p.image[j] = nn::sigmoid(img[j]);
  p.interoception = {unscale_intero(y[0]), unscale_intero(y[1])};
  return p;
}

double Predictor::run(const PredictorState& start, std::span<const PredictorSample> samples, bool backprop) {
  if (samples.empty()) throw InvalidArgument("predictor training batch is empty");
  if (start.layers.size() != cells_.size()) throw ShapeError("predictor state has the wrong layer count");
  const std::size_t N = samples.size();
  const std::size_t L = cells_.size();
  const std::size_t plane = config_.side * config_.side;
  const double inv_n = 1.0 / static_cast<double>(N);

  std::vector<std::vector<ConvLstmCell::Cache>> caches;
  if (backprop) caches.assign(N, std::vector<ConvLstmCell::Cache>(L));
  std::vector<Tensor> tops, d_img, d_int;
  PredictorState s = start;
  double loss = 0.0;
  for (std::size_t t = 0; t < N; ++t) {
    const auto& smp = samples[t];
    if (smp.next_image.size() != plane) throw ShapeError("predictor target image has the wrong size");
    Tensor x = input_tensor(smp.image, smp.interoception);
    for (std::size_t l = 0; l < L; ++l) {
      s.layers[l] = cells_[l].step(x, s.layers[l], backprop ? &caches[t][l] : nullptr);
      x = s.layers[l].h;
    }
    const Tensor pre = nn::conv2d_forward(x, img_w_.value, img_b_.value);
    const Tensor y = nn::dense_forward(x.reshaped({1, x.size()}), int_w_.value, int_b_.value);
    Tensor gimg(pre.shape());
    double li = 0.0;
    for (std::size_t j = 0; j < plane; ++j) {
      const double p = nn::sigmoid(pre[j]);
      const double d = p - smp.next_image[j];
      li += d * d;
      gimg[j] = 2.0 * d / static_cast<double>(plane) * p * (1.0 - p) * inv_n;
    }
    li /= static_cast<double>(plane);
    const double zt[2] = {scale_intero(smp.next_interoception.valence), scale_intero(smp.next_interoception.arousal)};
    Tensor gint({1, 2});
    double ln = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      const double d = y[j] - zt[j];
      ln += d * d;
      gint[j] = d * inv_n;  // 2 d / 2 / N
    }
    ln /= 2.0;
    loss += li + ln;
    if (backprop) {
      tops.push_back(x);
      d_img.push_back(std::move(gimg));
      d_int.push_back(std::move(gint));
    }
  }
  loss *= inv_n;
  if (!backprop) return loss;

  for (auto* p : parameters()) p->zero_grad();
  std::vector<Tensor> dh(L), dc(L);
  for (std::size_t l = 0; l < L; ++l) {
    dh[l] = Tensor(start.layers[l].h.shape());
    dc[l] = Tensor(start.layers[l].c.shape());
  }
  for (std::size_t t = N; t-- > 0;) {
    Tensor dtop = nn::conv2d_backward(tops[t], img_w_.value, d_img[t], &img_w_.grad, &img_b_.grad);
    const Tensor dflat =
        nn::dense_backward(tops[t].reshaped({1, tops[t].size()}), int_w_.value, d_int[t], &int_w_.grad, &int_b_.grad);
    for (std::size_t j = 0; j < dtop.size(); ++j) dtop[j] += dflat[j];
    Tensor dx = dtop;
    for (std::size_t l = L; l-- > 0;) {
      Tensor dh_total = dh[l];
      dh_total += dx;
      Tensor dh_prev, dc_prev;
      dx = cells_[l].backward(caches[t][l], dh_total, dc[l], dh_prev, dc_prev);
      dh[l] = std::move(dh_prev);
      dc[l] = std::move(dc_prev);
    }
  }
  return loss;
}

double Predictor::sequence_loss(const PredictorState& start, std::span<const PredictorSample> samples) const {
  return const_cast<Predictor*>(this)->run(start, samples, false);
}

double Predictor::sequence_gradients(const PredictorState& start, std::span<const PredictorSample> samples) {
  return run(start, samples, true);
}

double Predictor::train(const PredictorState& start, std::span<const PredictorSample> samples) {
  const double loss = run(start, samples, true);
  const auto params = parameters();
  nn::adam_step(params, adam_);
  return loss;
}

std::vector<nn::Parameter*> Predictor::parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& c : cells_)
    for (auto* p : c.parameters()) out.push_back(p);
  out.push_back(&img_w_);
  out.push_back(&img_b_);
  out.push_back(&int_w_);
  out.push_back(&int_b_);
  return out;
}

void Predictor::save(Container& out, const std::string& prefix) const {
  auto* self = const_cast<Predictor*>(this);
  const auto params = self->parameters();
  out.put_params(prefix + "/params", params);
  out.put_adam(prefix + "/adam", adam_);
}

void Predictor::load_into(const Container& in, const std::string& prefix) {
  const auto params = parameters();
  in.get_params(prefix + "/params", params);
  in.get_adam(prefix + "/adam", adam_);
}

void save_predictor_state(Container& out, const std::string& prefix, const PredictorState& state) {
  out.put_u64(prefix + "/layers", {state.layers.size()});
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    out.put(prefix + "/h" + std::to_string(l), state.layers[l].h);
    out.put(prefix + "/c" + std::to_string(l), state.layers[l].c);
  }
}

PredictorState load_predictor_state(const Container& in, const std::string& prefix) {
  PredictorState s;
  const std::uint64_t n = in.scalar_u64(prefix + "/layers");
  for (std::uint64_t l = 0; l < n; ++l)
    s.layers.push_back({in.tensor(prefix + "/h" + std::to_string(l)), in.tensor(prefix + "/c" + std::to_string(l))});
  return s;
}

}  // namespace emo

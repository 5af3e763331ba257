#include "emo/core/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "emo/core/errors.hpp"

namespace emo::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void expect_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
}

// cols[(c*k + ky)*k + kx][y*W + x] = x[c][y + ky - pad][x + kx - pad] (zero outside).
void im2col(const double* image, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
            double* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(height), w = static_cast<std::ptrdiff_t>(width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = image + c * height * width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx, ++row) {
        double* out = cols + row * height * width;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::ptrdiff_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = y + dy;
          double* out_row = out + y * w;
          if (sy < 0 || sy >= h) {
            std::fill(out_row, out_row + w, 0.0);
            continue;
          }
          const double* src = plane + sy * w;
          for (std::ptrdiff_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = x + dx;
            out_row[x] = (sx < 0 || sx >= w) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
                double* image) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(height), w = static_cast<std::ptrdiff_t>(width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = image + c * height * width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx, ++row) {
        const double* in = cols + row * height * width;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::ptrdiff_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const double* in_row = in + y * w;
          double* dst = plane + sy * w;
          for (std::ptrdiff_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = x + dx;
            if (sx >= 0 && sx < w) dst[sx] += in_row[x];
          }
        }
      }
    }
  }
}

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor* b) {
  expect_rank(x, 4, "conv2d input");
  expect_rank(w, 4, "conv2d weight");
  if (w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0)
    throw ShapeError("conv2d: weight " + shape_string(w.shape()) + " incompatible with input " +
                     shape_string(x.shape()));
  if (b && (b->rank() != 1 || b->dim(0) != w.dim(0)))
    throw ShapeError("conv2d: bias " + shape_string(b->shape()) + " vs weight " + shape_string(w.shape()));
}

}  // namespace

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  expect_rank(x, 2, "dense input");
  expect_rank(w, 2, "dense weight");
  if (x.dim(1) != w.dim(1) || b.size() != w.dim(0))
    throw ShapeError("dense: input " + shape_string(x.shape()) + " vs weight " + shape_string(w.shape()));
  const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  Tensor y({batch, out});
  ConstMatMap X(x.data(), batch, in);
  ConstMatMap W(w.data(), out, in);
  MatMap Y(y.data(), batch, out);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += ConstVecMap(b.data(), out).transpose();
  return y;
}

Tensor dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dw, Tensor* db) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (dy.rank() != 2 || dy.dim(0) != batch || dy.dim(1) != out)
    throw ShapeError("dense backward: upstream " + shape_string(dy.shape()) + " vs expected [" +
                     std::to_string(batch) + "x" + std::to_string(out) + "]");
  ConstMatMap X(x.data(), batch, in);
  ConstMatMap W(w.data(), out, in);
  ConstMatMap DY(dy.data(), batch, out);
  if (dw) MatMap(dw->data(), out, in).noalias() += DY.transpose() * X;
  if (db) VecMap(db->data(), out) += DY.colwise().sum().transpose();
  Tensor dx({batch, in});
  MatMap(dx.data(), batch, in).noalias() = DY * W;
  return dx;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_conv_shapes(x, w, &b);
  const std::size_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const std::size_t out_channels = w.dim(0), k = w.dim(2), patch = channels * k * k, pixels = height * width;
  Tensor y({batch, out_channels, height, width});
  AlignedBuffer cols(patch * pixels);
  ConstMatMap W(w.data(), out_channels, patch);
  ConstVecMap B(b.data(), out_channels);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x.data() + n * channels * pixels, channels, height, width, k, cols.data());
    MatMap Y(y.data() + n * out_channels * pixels, out_channels, pixels);
    Y.noalias() = W * ConstMatMap(cols.data(), patch, pixels);
    Y.colwise() += B;
  }
  return y;
}

Tensor conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dw, Tensor* db) {
  check_conv_shapes(x, w, nullptr);
  const std::size_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const std::size_t out_channels = w.dim(0), k = w.dim(2), patch = channels * k * k, pixels = height * width;
  if (dy.shape() != Shape{batch, out_channels, height, width})
    throw ShapeError("conv2d backward: upstream " + shape_string(dy.shape()));
  Tensor dx(x.shape());
  AlignedBuffer cols(patch * pixels), dcols(patch * pixels);
  ConstMatMap W(w.data(), out_channels, patch);
  for (std::size_t n = 0; n < batch; ++n) {
    ConstMatMap DY(dy.data() + n * out_channels * pixels, out_channels, pixels);
    if (dw) {
      im2col(x.data() + n * channels * pixels, channels, height, width, k, cols.data());
      MatMap(dw->data(), out_channels, patch).noalias() += DY * ConstMatMap(cols.data(), patch, pixels).transpose();
    }
    if (db) VecMap(db->data(), out_channels) += DY.rowwise().sum();
    MatMap(dcols.data(), patch, pixels).noalias() = W.transpose() * DY;
    col2im_add(dcols.data(), channels, height, width, k, dx.data() + n * channels * pixels);
  }
  return dx;
}

double mse(const Tensor& pred, const Tensor& target, Tensor* grad) {
  require_same_shape(pred, target, "mse");
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  if (grad && !grad->same_shape(pred)) *grad = Tensor::zeros_like(pred);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
    if (grad) (*grad)[i] = 2.0 * d / n;
  }
  return sum / n;
}

void init_uniform_fan_in(Tensor& t, std::size_t fan_in, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

// ---- LayerSpec ---------------------------------------------------------------

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::tanh: return "tanh";
    case LayerKind::relu: return "relu";
    case LayerKind::batchnorm: return "batchnorm";
  }
  return "unknown";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) { return {LayerKind::dense, {in}, {out}, 0}; }

LayerSpec LayerSpec::conv2d(std::size_t channels, std::size_t height, std::size_t width, std::size_t out_channels,
                            std::size_t kernel) {
  return {LayerKind::conv2d, {channels, height, width}, {out_channels, height, width}, kernel};
}

LayerSpec LayerSpec::activation(LayerKind kind, Shape shape) { return {kind, shape, shape, 0}; }

LayerSpec LayerSpec::batchnorm(std::size_t features) { return {LayerKind::batchnorm, {features}, {features}, 0}; }

void LayerSpec::validate() const {
  auto fail = [&](const std::string& why) {
    throw ShapeError(std::string(layer_kind_name(kind)) + " spec " + shape_string(in_shape) + " -> " +
                     shape_string(out_shape) + ": " + why);
  };
  if (in_shape.empty() || out_shape.empty()) fail("empty shape");
  for (auto d : in_shape)
    if (d == 0) fail("zero dimension");
  for (auto d : out_shape)
    if (d == 0) fail("zero dimension");
  switch (kind) {
    case LayerKind::dense:
      if (in_shape.size() != 1 || out_shape.size() != 1) fail("dense layers are rank 1");
      break;
    case LayerKind::conv2d:
      if (in_shape.size() != 3 || out_shape.size() != 3) fail("conv2d layers are [C,H,W]");
      if (in_shape[1] != out_shape[1] || in_shape[2] != out_shape[2]) fail("same padding keeps H and W");
      if (kernel == 0 || kernel % 2 == 0) fail("kernel must be odd");
      break;
    case LayerKind::batchnorm:
      if (in_shape.size() != 1) fail("batchnorm normalizes rank-1 features");
      [[fallthrough]];
    case LayerKind::sigmoid:
    case LayerKind::tanh:
    case LayerKind::relu:
      if (in_shape != out_shape) fail("elementwise layers preserve shape");
      break;
  }
}

// ---- Layer -------------------------------------------------------------------

Layer::Layer(LayerSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Tensor Layer::forward(const Tensor& input, Mode mode) {
  const Shape& s = input.shape();
  if (s.size() != spec_.in_shape.size() + 1 || !std::equal(spec_.in_shape.begin(), spec_.in_shape.end(), s.begin() + 1))
    throw ShapeError(std::string(layer_kind_name(spec_.kind)) + " forward: input " + shape_string(s) +
                     " does not match layer input [B]x" + shape_string(spec_.in_shape));
  Tensor out = do_forward(input, mode);
  batch_shape_ = out.shape();
  cached_ = true;
  return out;
}

Tensor Layer::backward(const Tensor& upstream) {
  if (!cached_) throw StateError(std::string(layer_kind_name(spec_.kind)) + " backward called before forward");
  if (upstream.shape() != batch_shape_)
    throw ShapeError(std::string(layer_kind_name(spec_.kind)) + " backward: upstream " +
                     shape_string(upstream.shape()) + " vs output " + shape_string(batch_shape_));
  return do_backward(upstream);
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : Layer(LayerSpec::dense(in, out)), weight_("weight", Tensor({out, in})), bias_("bias", Tensor({out})) {}

Tensor DenseLayer::do_forward(const Tensor& input, Mode) {
  input_ = input;
  return dense_forward(input, weight_.value, bias_.value);
}

Tensor DenseLayer::do_backward(const Tensor& upstream) {
  return dense_backward(input_, weight_.value, upstream, &weight_.grad, &bias_.grad);
}

Conv2dLayer::Conv2dLayer(std::size_t channels, std::size_t height, std::size_t width, std::size_t out_channels,
                         std::size_t kernel)
    : Layer(LayerSpec::conv2d(channels, height, width, out_channels, kernel)),
      weight_("weight", Tensor({out_channels, channels, kernel, kernel})),
      bias_("bias", Tensor({out_channels})) {}

Tensor Conv2dLayer::do_forward(const Tensor& input, Mode) {
  input_ = input;
  return conv2d_forward(input, weight_.value, bias_.value);
}

Tensor Conv2dLayer::do_backward(const Tensor& upstream) {
  return conv2d_backward(input_, weight_.value, upstream, &weight_.grad, &bias_.grad);
}

ActivationLayer::ActivationLayer(LayerKind kind, Shape shape) : Layer(LayerSpec::activation(kind, std::move(shape))) {
  if (kind != LayerKind::sigmoid && kind != LayerKind::tanh && kind != LayerKind::relu)
    throw InvalidArgument("activation layer needs sigmoid, tanh or relu");
}

Tensor ActivationLayer::do_forward(const Tensor& input, Mode) {
  output_ = input;
  switch (spec().kind) {
    case LayerKind::sigmoid:
      for (double& v : output_.values()) v = sigmoid(v);
      break;
    case LayerKind::tanh:
      for (double& v : output_.values()) v = std::tanh(v);
      break;
    default:
      for (double& v : output_.values()) v = v > 0.0 ? v : 0.0;
      break;
  }
  return output_;
}

Tensor ActivationLayer::do_backward(const Tensor& upstream) {
  Tensor g = upstream;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double y = output_[i];
    switch (spec().kind) {
      case LayerKind::sigmoid: g[i] *= y * (1.0 - y); break;
      case LayerKind::tanh: g[i] *= 1.0 - y * y; break;
      default: g[i] = y > 0.0 ? g[i] : 0.0; break;
    }
  }
  return g;
}

BatchNormLayer::BatchNormLayer(std::size_t features)
    : Layer(LayerSpec::batchnorm(features)),
      gamma_("scale", Tensor({features}, 1.0)),
      beta_("shift", Tensor({features})),
      running_mean_({features}),
      running_var_({features}, 1.0) {}

Tensor BatchNormLayer::do_forward(const Tensor& input, Mode mode) {
  const std::size_t batch = input.dim(0), features = input.dim(1);
  mode_ = mode;
  normalized_ = Tensor(input.shape());
  inv_std_.assign(features, 0.0);
  Tensor out(input.shape());
  for (std::size_t f = 0; f < features; ++f) {
    double mean, var;
    if (mode == Mode::train) {
      mean = 0.0;
      for (std::size_t n = 0; n < batch; ++n) mean += input[n * features + f];
      mean /= static_cast<double>(batch);
      var = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double d = input[n * features + f] - mean;
        var += d * d;
      }
      var /= static_cast<double>(batch);
      running_mean_[f] = kMomentum * running_mean_[f] + (1.0 - kMomentum) * mean;
      running_var_[f] = kMomentum * running_var_[f] + (1.0 - kMomentum) * var;
    } else {
      mean = running_mean_[f];
      var = running_var_[f];
    }
    const double inv = 1.0 / std::sqrt(var + kEpsilon);
    inv_std_[f] = inv;
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t i = n * features + f;
      normalized_[i] = (input[i] - mean) * inv;
      out[i] = gamma_.value[f] * normalized_[i] + beta_.value[f];
    }
  }
  return out;
}

Tensor BatchNormLayer::do_backward(const Tensor& upstream) {
  const std::size_t batch = upstream.dim(0), features = upstream.dim(1);
  Tensor dx(upstream.shape());
  const double nb = static_cast<double>(batch);
  for (std::size_t f = 0; f < features; ++f) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t i = n * features + f;
      sum_dy += upstream[i];
      sum_dy_xhat += upstream[i] * normalized_[i];
    }
    gamma_.grad[f] += sum_dy_xhat;
    beta_.grad[f] += sum_dy;
    const double g = gamma_.value[f] * inv_std_[f];
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t i = n * features + f;
      if (mode_ == Mode::train)
        dx[i] = g * (upstream[i] - sum_dy / nb - normalized_[i] * sum_dy_xhat / nb);
      else
        dx[i] = g * upstream[i];
    }
  }
  return dx;
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, RngStream& rng) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::dense: {
      auto layer = std::make_unique<DenseLayer>(spec.in_shape[0], spec.out_shape[0]);
      init_uniform_fan_in(layer->weight().value, spec.in_shape[0], rng);
      init_uniform_fan_in(layer->bias().value, spec.in_shape[0], rng);
      return layer;
    }
    case LayerKind::conv2d: {
      const auto& in = spec.in_shape;
      auto layer = std::make_unique<Conv2dLayer>(in[0], in[1], in[2], spec.out_shape[0], spec.kernel);
      const std::size_t fan_in = in[0] * spec.kernel * spec.kernel;
      init_uniform_fan_in(layer->weight().value, fan_in, rng);
      init_uniform_fan_in(layer->bias().value, fan_in, rng);
      return layer;
    }
    case LayerKind::batchnorm:
      return std::make_unique<BatchNormLayer>(spec.in_shape[0]);
    default:
      return std::make_unique<ActivationLayer>(spec.kind, spec.in_shape);
  }
}

// ---- Sequential --------------------------------------------------------------

Sequential::Sequential(const Sequential& other) : outputs_(other.outputs_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Sequential::add(std::unique_ptr<Layer> layer) {
  if (!layers_.empty() && layers_.back()->spec().out_shape != layer->spec().in_shape)
    throw ShapeError("sequential: layer input " + shape_string(layer->spec().in_shape) +
                     " does not follow previous output " + shape_string(layers_.back()->spec().out_shape));
  layers_.push_back(std::move(layer));
}

Tensor Sequential::forward(const Tensor& input, Mode mode) {
  outputs_.resize(layers_.size());
  const Tensor* current = &input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    outputs_[i] = layers_[i]->forward(*current, mode);
    current = &outputs_[i];
  }
  return layers_.empty() ? input : outputs_.back();
}

Tensor Sequential::backward(const Tensor& upstream) {
  Tensor g = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_)
    for (auto* p : l->parameters()) out.push_back(p);
  return out;
}

std::vector<Tensor*> Sequential::buffers() {
  std::vector<Tensor*> out;
  for (auto& l : layers_)
    for (auto* b : l->buffers()) out.push_back(b);
  return out;
}

void Sequential::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

// ---- Adam --------------------------------------------------------------------

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.first.empty() && state.step == 0) {
    for (auto* p : params) {
      state.first.push_back(Tensor::zeros_like(p->value));
      state.second.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (state.first.size() != params.size())
    throw ShapeError("adam: state tracks " + std::to_string(state.first.size()) + " parameters, got " +
                     std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i]->value, params[i]->grad, "adam grad");
    require_same_shape(params[i]->value, state.first[i], "adam moment");
    if (!params[i]->grad.all_finite()) throw NumericError("adam: non-finite gradient in '" + params[i]->name + "'");
  }
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i]->value;
    const auto& grad = params[i]->grad;
    auto& m = state.first[i];
    auto& v = state.second[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * grad[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

// ---- Gradient check ----------------------------------------------------------

GradCheckReport finite_difference_check(const GradProblem& problem, double tolerance, double epsilon) {
  if (!(tolerance > 0.0)) throw InvalidArgument("gradient check tolerance must be positive");
  problem.backprop();
  std::vector<Tensor> analytic;
  analytic.reserve(problem.params.size());
  for (auto* p : problem.params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t b = 0; b < problem.params.size(); ++b) {
    Parameter& p = *problem.params[b];
    GradBlockReport block{p.name, 0.0, p.value.size()};
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double saved = p.value[j];
      p.value[j] = saved + epsilon;
      const double up = problem.loss();
      p.value[j] = saved - epsilon;
      const double down = problem.loss();
      p.value[j] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[b][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double err = std::abs(a - numeric) / denom;
      block.max_rel_error = std::isnan(err) ? INFINITY : std::max(err, block.max_rel_error);
    }
    report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
    report.blocks.push_back(std::move(block));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

GradCheckReport finite_difference_check(Sequential& net, const Tensor& input, const Tensor& target, double tolerance,
                                        Mode mode) {
  Parameter input_block("input", input);
  std::vector<Parameter*> params = net.parameters();
  params.push_back(&input_block);
  GradProblem problem;
  problem.params = params;
  problem.loss = [&] { return mse(net.forward(input_block.value, mode), target); };
  problem.backprop = [&] {
    net.zero_grad();
    Tensor grad;
    mse(net.forward(input_block.value, mode), target, &grad);
    input_block.grad = net.backward(grad);
  };
  return finite_difference_check(problem, tolerance);
}

}  // namespace emo::nn

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "emo/core/rng.hpp"
#include "emo/core/tensor.hpp"

namespace emo::nn {

enum class Mode { train, eval };

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}
  void zero_grad() { grad.fill(0.0); }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---- Functional kernels ------------------------------------------------------
// Batched dense map y = x W^T + b with x [B, in], W [out, in], b [out].
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
// Accumulates into dw/db (either may be null) and returns dx.
Tensor dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dw, Tensor* db);

// Stride-1 convolution with zero "same" padding. x [B, C, H, W], w [O, C, k, k]
// with odd k, b [O].
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dw, Tensor* db);

// Mean squared error over all elements. Writes d(loss)/d(pred) into grad when non-null.
double mse(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr);

// Uniform in +-1/sqrt(fan_in).
void init_uniform_fan_in(Tensor& t, std::size_t fan_in, RngStream& rng);

// ---- Layers ------------------------------------------------------------------
enum class LayerKind { dense, conv2d, sigmoid, tanh, relu, batchnorm };

const char* layer_kind_name(LayerKind kind);

// Shapes exclude the leading batch dimension.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Shape in_shape;
  Shape out_shape;
  std::size_t kernel = 0;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv2d(std::size_t channels, std::size_t height, std::size_t width, std::size_t out_channels,
                          std::size_t kernel);
  static LayerSpec activation(LayerKind kind, Shape shape);
  static LayerSpec batchnorm(std::size_t features);

  // Throws ShapeError when out_shape is inconsistent with kind and in_shape.
  void validate() const;
};

class Layer {
 public:
  explicit Layer(LayerSpec spec);
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }

  // Input is [B, in_shape...]. Caches what backward needs.
  Tensor forward(const Tensor& input, Mode mode = Mode::train);
  // Accumulates parameter gradients and returns the input gradient.
  Tensor backward(const Tensor& upstream);

  virtual std::vector<Parameter*> parameters() { return {}; }
  // Non-trainable state that still belongs in checkpoints (running statistics).
  virtual std::vector<Tensor*> buffers() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;

 protected:
  virtual Tensor do_forward(const Tensor& input, Mode mode) = 0;
  virtual Tensor do_backward(const Tensor& upstream) = 0;

 private:
  LayerSpec spec_;
  Shape batch_shape_;
  bool cached_ = false;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t out);
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_backward(const Tensor& upstream) override;

 private:
  Parameter weight_, bias_;
  Tensor input_;
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(std::size_t channels, std::size_t height, std::size_t width, std::size_t out_channels,
              std::size_t kernel);
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2dLayer>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_backward(const Tensor& upstream) override;

 private:
  Parameter weight_, bias_;
  Tensor input_;
};

class ActivationLayer final : public Layer {
 public:
  ActivationLayer(LayerKind kind, Shape shape);
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ActivationLayer>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_backward(const Tensor& upstream) override;

 private:
  Tensor output_;
};

class BatchNormLayer final : public Layer {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEpsilon = 1e-5;

  explicit BatchNormLayer(std::size_t features);
  Parameter& scale() { return gamma_; }
  Parameter& shift() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Tensor*> buffers() override { return {&running_mean_, &running_var_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNormLayer>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_backward(const Tensor& upstream) override;

 private:
  Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
  Tensor normalized_;
  std::vector<double> inv_std_;
  Mode mode_ = Mode::train;
};

// Builds a layer for the spec; parameters are drawn from rng (uniform fan-in).
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, RngStream& rng);

class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer);
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor forward(const Tensor& input, Mode mode = Mode::train);
  Tensor backward(const Tensor& upstream);
  // Output of layer i from the most recent forward call.
  const Tensor& output(std::size_t i) const { return outputs_.at(i); }

  std::vector<Parameter*> parameters();
  std::vector<Tensor*> buffers();
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Tensor> outputs_;
};

// ---- Optimization ------------------------------------------------------------
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::uint64_t step = 0;
};

// Bias-corrected Adam update using each parameter's grad. Moments are shaped on
// first use. Rejects non-finite gradients before touching any state.
void adam_step(std::span<Parameter* const> params, AdamState& state);

// ---- Gradient checking -------------------------------------------------------
struct GradBlockReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

struct GradCheckReport {
  std::vector<GradBlockReport> blocks;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Relative error |a - n| / max(|a|, |n|, floor); the floor stops entries that are
// numerically zero from dominating the report.
inline constexpr double kGradCheckFloor = 1e-4;

struct GradProblem {
  std::vector<Parameter*> params;
  std::function<double()> loss;      // evaluates the scalar objective at current values
  std::function<void()> backprop;    // overwrites every params[i].grad with the analytic gradient
};

GradCheckReport finite_difference_check(const GradProblem& problem, double tolerance, double epsilon = 1e-5);

// Checks a network under an MSE loss against target, plus the gradient with
// respect to the input (reported as block "input").
GradCheckReport finite_difference_check(Sequential& net, const Tensor& input, const Tensor& target,
                                        double tolerance, Mode mode = Mode::train);

}  // namespace emo::nn

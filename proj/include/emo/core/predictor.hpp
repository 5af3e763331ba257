#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emo/core/affect.hpp"
#include "emo/core/environment.hpp"
#include "emo/core/nn.hpp"
#include "emo/core/rng.hpp"
#include "emo/core/tensor.hpp"

namespace emo {

class Container;

struct LstmLayerState {
  Tensor h;  // [B, H, S, S]
  Tensor c;
};

struct PredictorState {
  std::vector<LstmLayerState> layers;
  bool all_finite() const;
};

/// Convolutional LSTM cell with peephole connections. The input and recurrent
/// convolutions share one weight [4H, Cin+H, k, k] with gate order i, f, c, o;
/// peepholes are [H, S, S] maps applied by elementwise product.
class ConvLstmCell {
 public:
  struct Cache {
    Tensor concat;  // [B, Cin+H, S, S]
    Tensor c_prev, i, f, g, o, c, tanh_c;
  };

  ConvLstmCell(std::size_t in_channels, std::size_t hidden, std::size_t side, std::size_t kernel, RngStream& rng);

  std::size_t in_channels() const { return in_channels_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t side() const { return side_; }

  LstmLayerState zero_state(std::size_t batch = 1) const;
  // cache may be null for inference.
  LstmLayerState step(const Tensor& x, const LstmLayerState& state, Cache* cache) const;
  // Given gradients of the loss wrt this step's H and C, accumulates parameter
  // gradients, writes the gradients wrt the previous H and C, and returns dX.
  Tensor backward(const Cache& cache, const Tensor& dh, const Tensor& dc, Tensor& dh_prev, Tensor& dc_prev);

  nn::Parameter& weight() { return weight_; }
  nn::Parameter& bias() { return bias_; }
  nn::Parameter& peephole_i() { return peep_i_; }
  nn::Parameter& peephole_f() { return peep_f_; }
  nn::Parameter& peephole_o() { return peep_o_; }
  std::vector<nn::Parameter*> parameters() { return {&weight_, &bias_, &peep_i_, &peep_f_, &peep_o_}; }

 private:
  std::size_t in_channels_, hidden_, side_, kernel_;
  nn::Parameter weight_, bias_, peep_i_, peep_f_, peep_o_;
};

struct PredictorConfig {
  std::size_t side = 32;
  std::size_t hidden = 5;
  std::size_t kernel = 5;
  std::size_t layers = 2;
  double intero_min = 1.0;
  double intero_max = 13.0;
  nn::AdamConfig adam{};

  void validate() const;
};

struct Prediction {
  Image image;
  AffectVector interoception;
};

// One teacher-forced pair: observed input at t and observed target at t+1.
struct PredictorSample {
  Image image;
  AffectVector interoception;
  Image next_image;
  AffectVector next_interoception;
};

/// Stacked ConvLSTM forecasting the next image (1x1 conv + sigmoid on the top
/// hidden map) and the next interoception (linear map of the flattened top map).
class Predictor {
 public:
  Predictor(const PredictorConfig& config, RngStream& init_rng);

  const PredictorConfig& config() const { return config_; }
  PredictorState initial_state() const;

  // Advances state by one input and returns the forecast for the next step.
  Prediction predict(const Image& image, const AffectVector& interoception, PredictorState& state) const;

  // Mean over pairs of image MSE + scaled interoception MSE, run from start.
  double sequence_loss(const PredictorState& start, std::span<const PredictorSample> samples) const;
  // Same loss with exact BPTT gradients written into the parameter grads.
  double sequence_gradients(const PredictorState& start, std::span<const PredictorSample> samples);
  // One Adam step on the sequence; returns the loss before the step.
  double train(const PredictorState& start, std::span<const PredictorSample> samples);

  double scale_intero(double value) const;
  double unscale_intero(double value) const;

  std::vector<nn::Parameter*> parameters();
  std::vector<ConvLstmCell>& cells() { return cells_; }
  nn::Parameter& image_weight() { return img_w_; }
  nn::Parameter& image_bias() { return img_b_; }
  nn::Parameter& intero_weight() { return int_w_; }
  nn::Parameter& intero_bias() { return int_b_; }
  nn::AdamState& optimizer() { return adam_; }

  void save(Container& out, const std::string& prefix) const;
  void load_into(const Container& in, const std::string& prefix);

 private:
  Tensor input_tensor(const Image& image, const AffectVector& interoception) const;
  double run(const PredictorState& start, std::span<const PredictorSample> samples, bool backprop);

  PredictorConfig config_;
  std::vector<ConvLstmCell> cells_;
  nn::Parameter img_w_, img_b_, int_w_, int_b_;
  nn::AdamState adam_;
};

void save_predictor_state(Container& out, const std::string& prefix, const PredictorState& state);
PredictorState load_predictor_state(const Container& in, const std::string& prefix);

}  // namespace emo

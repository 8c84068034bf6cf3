#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dwrpm/rng.hpp"
#include "dwrpm/tensor.hpp"

namespace dwrpm {

enum class Mode { train, inference };
enum class Activation { relu, linear };
enum class PoolKind { global_average, max };

// ---------------------------------------------------------------------------
// Dense: y = f(x W + b), x [batch x in], W [in x out], b [out].

struct DenseLayer {
  Tensor weights;
  Tensor bias;
  Activation activation = Activation::relu;
};

/// He-initialized weights, zero bias.
DenseLayer make_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng);

Tensor dense_forward(const DenseLayer& layer, const Tensor& x);

struct DenseGradients {
  Tensor input;  // empty when not requested
  Tensor weights;
  Tensor bias;
};

DenseGradients dense_backward(const DenseLayer& layer, const Tensor& x, const Tensor& grad_out);

/// Same, reusing the forward output `y` for the ReLU mask.
DenseGradients dense_backward(const DenseLayer& layer, const Tensor& x, const Tensor& y,
                              const Tensor& grad_out, bool need_input);

// ---------------------------------------------------------------------------
// Conv1D: valid cross-correlation over x [batch x len x in_channels].
// Output [batch x (len - klen + 1) x filters].

struct Conv1DLayer {
  Tensor kernels;  // [filters x in_channels x klen]
  Tensor bias;     // [filters]

  std::size_t filters() const { return kernels.dim(0); }
  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t kernel_len() const { return kernels.dim(2); }
};

Conv1DLayer make_conv1d(std::size_t in_channels, std::size_t filters, std::size_t klen, Rng& rng);

Tensor conv1d_forward(const Conv1DLayer& layer, const Tensor& x);

struct Conv1DGradients {
  Tensor input;  // empty when not requested
  Tensor kernels;
  Tensor bias;
};

Conv1DGradients conv1d_backward(const Conv1DLayer& layer, const Tensor& x, const Tensor& grad_out,
                                bool need_input = true);

// ---------------------------------------------------------------------------
// Inverted dropout. In train mode each element is zeroed with probability
// `rate` and survivors are scaled by 1 / (1 - rate); inference is identity.

struct DropoutLayer {
  double rate = 0.0;
  Mode mode = Mode::train;
};

struct DropoutResult {
  Tensor output;
  Tensor mask;  // 1 for kept elements, 0 for dropped
};

DropoutResult dropout_apply(const DropoutLayer& layer, const Tensor& x, Rng& rng);
Tensor dropout_backward(const DropoutLayer& layer, const Tensor& mask, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// LSTM cell, gate blocks ordered [input | forget | candidate | output].

struct LSTMCell {
  Tensor input_weights;      // [in x 4h]
  Tensor recurrent_weights;  // [h x 4h]
  Tensor bias;               // [4h]

  std::size_t input_size() const { return input_weights.dim(0); }
  std::size_t hidden() const { return recurrent_weights.dim(0); }
};

/// He-initialized weights (fan_in = in + h); forget-gate bias 1, others 0.
LSTMCell make_lstm_cell(std::size_t in, std::size_t hidden, Rng& rng);

struct LstmState {
  Tensor h;
  Tensor c;
};

struct LstmStepCache {
  Tensor x;
  Tensor h_prev;
  Tensor c_prev;
  Tensor gates;   // activated gates [batch x 4h]
  Tensor tanh_c;  // tanh(c_t)
};

LstmState lstm_step(const LSTMCell& cell, const Tensor& x_t, const Tensor& h_prev,
                    const Tensor& c_prev, LstmStepCache* cache = nullptr);

struct LstmCellGradients {
  Tensor input_weights;
  Tensor recurrent_weights;
  Tensor bias;

  static LstmCellGradients zeros_like(const LSTMCell& cell);
};

struct LstmStepGradients {
  Tensor x;
  Tensor h_prev;
  Tensor c_prev;
};

/// Back-propagates through one step, adding parameter gradients into
/// `accumulated`.
LstmStepGradients lstm_step_backward(const LSTMCell& cell, const LstmStepCache& cache,
                                     const Tensor& grad_h, const Tensor& grad_c,
                                     LstmCellGradients& accumulated);

// ---------------------------------------------------------------------------
// Pooling over x [batch x len x channels].
// global_average -> [batch x channels]; max -> [batch x (len / window) x
// channels] with non-overlapping windows (a trailing remainder is dropped).

struct PoolLayer {
  PoolKind kind = PoolKind::global_average;
  std::size_t window = 2;
};

Tensor pool_forward(const PoolLayer& layer, const Tensor& x);
Tensor pool_backward(const PoolLayer& layer, const Tensor& x, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// Graph nodes. A node is immutable during forward/backward; everything a
// backward pass needs is written to a LayerCache owned by the caller.

struct LayerCache {
  std::vector<Tensor> tensors;
  std::vector<LstmStepCache> steps;
  Shape input_shape;
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// Per-sample output shape (no batch axis) for a per-sample input shape.
  /// Throws DimensionError when the input does not fit.
  virtual Shape output_shape(const Shape& input) const = 0;

  /// `rng` is required only by stochastic layers in train mode. `cache` may
  /// be null for inference-only calls.
  virtual Tensor forward(const Tensor& x, Mode mode, Rng* rng, LayerCache* cache) const = 0;

  /// Writes one gradient per parameter into `param_grads` (same order as
  /// parameters()) and returns the input gradient, or an empty tensor when
  /// `need_input` is false.
  virtual Tensor backward(const LayerCache& cache, const Tensor& grad_out,
                          std::span<Tensor> param_grads, bool need_input) const = 0;

  virtual std::vector<NamedTensor> parameters() { return {}; }
  std::vector<const Tensor*> parameters() const;
};

class DenseNode final : public Layer {
 public:
  explicit DenseNode(DenseLayer layer) : layer_(std::move(layer)) {}
  std::string kind() const override { return "dense"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseNode>(*this); }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng, LayerCache* cache) const override;
  Tensor backward(const LayerCache& cache, const Tensor& grad_out, std::span<Tensor> param_grads,
                  bool need_input) const override;
  using Layer::parameters;
  std::vector<NamedTensor> parameters() override;
  const DenseLayer& layer() const { return layer_; }
  DenseLayer& layer() { return layer_; }

 private:
  DenseLayer layer_;
};

/// Accepts [batch x len] (one channel) or [batch x len x channels].
class Conv1DNode final : public Layer {
 public:
  explicit Conv1DNode(Conv1DLayer layer) : layer_(std::move(layer)) {}
  std::string kind() const override { return "conv1d"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1DNode>(*this); }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng, LayerCache* cache) const override;
  Tensor backward(const LayerCache& cache, const Tensor& grad_out, std::span<Tensor> param_grads,
                  bool need_input) const override;
  using Layer::parameters;
  std::vector<NamedTensor> parameters() override;
  const Conv1DLayer& layer() const { return layer_; }
  Conv1DLayer& layer() { return layer_; }

 private:
  Conv1DLayer layer_;
};

class DropoutNode final : public Layer {
 public:
  explicit DropoutNode(double rate);
  std::string kind() const override { return "dropout"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutNode>(*this); }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng, LayerCache* cache) const override;
  Tensor backward(const LayerCache& cache, const Tensor& grad_out, std::span<Tensor> param_grads,
                  bool need_input) const override;
  double rate() const { return rate_; }

 private:
  double rate_;
};

/// Runs an LSTMCell over [batch x len] or [batch x len x channels] from a
/// zero initial state. Returns [batch x len x h] or the final [batch x h].
class LstmNode final : public Layer {
 public:
  LstmNode(LSTMCell cell, bool return_sequences)
      : cell_(std::move(cell)), return_sequences_(return_sequences) {}
  std::string kind() const override { return "lstm"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LstmNode>(*this); }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng, LayerCache* cache) const override;
  Tensor backward(const LayerCache& cache, const Tensor& grad_out, std::span<Tensor> param_grads,
                  bool need_input) const override;
  using Layer::parameters;
  std::vector<NamedTensor> parameters() override;
  const LSTMCell& cell() const { return cell_; }
  bool return_sequences() const { return return_sequences_; }

 private:
  LSTMCell cell_;
  bool return_sequences_;
};

class PoolNode final : public Layer {
 public:
  explicit PoolNode(PoolLayer layer) : layer_(layer) {}
  std::string kind() const override {
    return layer_.kind == PoolKind::max ? "max_pool" : "global_average_pool";
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<PoolNode>(*this); }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng* rng, LayerCache* cache) const override;
  Tensor backward(const LayerCache& cache, const Tensor& grad_out, std::span<Tensor> param_grads,
                  bool need_input) const override;
  const PoolLayer& layer() const { return layer_; }

 private:
  PoolLayer layer_;
};

}  // namespace dwrpm

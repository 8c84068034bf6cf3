#include "dwrpm/layers.hpp"

#include <algorithm>
#include <cmath>

#include "dwrpm/errors.hpp"
#include "dwrpm/kernels.hpp"

namespace dwrpm {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " input, got " + shape_string(x.shape()));
}

void require_shape(const Tensor& t, const Shape& shape, const char* what) {
  if (t.shape() != shape)
    throw DimensionError(std::string(what) + ": expected " + shape_string(shape) + ", got " +
                         shape_string(t.shape()));
}

// [batch x len] is read as a single-channel sequence.
Tensor as_sequence(const Tensor& x) {
  if (x.rank() == 2) return x.reshaped({x.dim(0), x.dim(1), 1});
  if (x.rank() == 3) return x;
  throw DimensionError("expected a [batch x len] or [batch x len x channels] input, got " +
                       shape_string(x.shape()));
}

Shape sequence_shape(const Shape& sample) {
  if (sample.size() == 1) return {sample[0], 1};
  if (sample.size() == 2) return sample;
  throw DimensionError("expected a [len] or [len x channels] sample, got " + shape_string(sample));
}

// Copies time step t of [batch x len x ch] into [batch x ch].
Tensor time_slice(const Tensor& x, std::size_t t) {
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  Tensor out({batch, ch});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(x.raw() + (b * len + t) * ch, ch, out.raw() + b * ch);
  return out;
}

void accumulate(Tensor& into, const Tensor& from) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

DenseLayer make_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  return {he_init(in, {in, out}, rng), Tensor({out}), activation};
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  require_rank(x, 2, "dense_forward");
  if (x.dim(1) != layer.weights.dim(0))
    throw DimensionError("dense_forward: input " + shape_string(x.shape()) +
                         " does not fit weights " + shape_string(layer.weights.shape()));
  const std::size_t batch = x.dim(0), in = x.dim(1), out = layer.weights.dim(1);
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(layer.bias.raw(), out, y.raw() + b * out);
  kernels::gemm(x.raw(), in, layer.weights.raw(), out, y.raw(), out, batch, in, out, true);
  if (layer.activation == Activation::relu)
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

DenseGradients dense_backward(const DenseLayer& layer, const Tensor& x, const Tensor& grad_out) {
  return dense_backward(layer, x, dense_forward(layer, x), grad_out, true);
}

DenseGradients dense_backward(const DenseLayer& layer, const Tensor& x, const Tensor& y,
                              const Tensor& grad_out, bool need_input) {
  require_rank(x, 2, "dense_backward");
  const std::size_t batch = x.dim(0), in = layer.weights.dim(0), out = layer.weights.dim(1);
  require_shape(x, {batch, in}, "dense_backward input");
  require_shape(grad_out, {batch, out}, "dense_backward grad_out");

  Tensor dz = grad_out;
  if (layer.activation == Activation::relu)
    for (std::size_t i = 0; i < dz.size(); ++i)
      if (!(y[i] > 0.0)) dz[i] = 0.0;

  DenseGradients g;
  g.weights = Tensor({in, out});
  kernels::gemm_tn(x.raw(), in, dz.raw(), out, g.weights.raw(), out, batch, in, out, false);
  g.bias = Tensor({out});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < out; ++j) g.bias[j] += dz[b * out + j];
  if (need_input) {
    g.input = Tensor({batch, in});
    kernels::gemm_nt(dz.raw(), out, layer.weights.raw(), out, g.input.raw(), in, batch, out, in,
                     false);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Conv1D

Conv1DLayer make_conv1d(std::size_t in_channels, std::size_t filters, std::size_t klen, Rng& rng) {
  if (klen == 0) throw ArgumentError("make_conv1d: kernel length must be at least 1");
  return {he_init(in_channels * klen, {filters, in_channels, klen}, rng), Tensor({filters})};
}

Tensor conv1d_forward(const Conv1DLayer& layer, const Tensor& x) {
  require_rank(x, 3, "conv1d_forward");
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  const std::size_t k = layer.kernel_len(), f = layer.filters();
  if (ch != layer.in_channels())
    throw DimensionError("conv1d_forward: input " + shape_string(x.shape()) + " has " +
                         std::to_string(ch) + " channels, kernels expect " +
                         std::to_string(layer.in_channels()));
  if (len < k)
    throw DimensionError("conv1d_forward: sequence length " + std::to_string(len) +
                         " shorter than kernel length " + std::to_string(k));
  Tensor out({batch, len - k + 1, f});
  kernels::conv1d_forward(x.raw(), layer.kernels.raw(), layer.bias.raw(), out.raw(), batch, len, ch,
                          k, f);
  return out;
}

Conv1DGradients conv1d_backward(const Conv1DLayer& layer, const Tensor& x, const Tensor& grad_out,
                                bool need_input) {
  require_rank(x, 3, "conv1d_backward");
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  const std::size_t k = layer.kernel_len(), f = layer.filters();
  if (ch != layer.in_channels() || len < k)
    throw DimensionError("conv1d_backward: input " + shape_string(x.shape()) +
                         " does not fit kernels " + shape_string(layer.kernels.shape()));
  require_shape(grad_out, {batch, len - k + 1, f}, "conv1d_backward grad_out");

  Conv1DGradients g;
  g.kernels = Tensor(layer.kernels.shape());
  g.bias = Tensor({f});
  if (need_input) g.input = Tensor(x.shape());
  kernels::conv1d_backward(x.raw(), layer.kernels.raw(), grad_out.raw(),
                           need_input ? g.input.raw() : nullptr, g.kernels.raw(), g.bias.raw(),
                           batch, len, ch, k, f);
  return g;
}

// ---------------------------------------------------------------------------
// Dropout

DropoutResult dropout_apply(const DropoutLayer& layer, const Tensor& x, Rng& rng) {
  if (!(layer.rate >= 0.0 && layer.rate < 1.0))
    throw ArgumentError("dropout rate must lie in [0, 1), got " + std::to_string(layer.rate));
  DropoutResult r{x, Tensor(x.shape(), 1.0)};
  if (layer.mode == Mode::inference || layer.rate == 0.0) return r;
  const double keep_scale = 1.0 / (1.0 - layer.rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.uniform() < layer.rate) {
      r.mask[i] = 0.0;
      r.output[i] = 0.0;
    } else {
      r.output[i] = x[i] * keep_scale;
    }
  }
  return r;
}

Tensor dropout_backward(const DropoutLayer& layer, const Tensor& mask, const Tensor& grad_out) {
  require_shape(grad_out, mask.shape(), "dropout_backward grad_out");
  if (layer.mode == Mode::inference || layer.rate == 0.0) return grad_out;
  const double keep_scale = 1.0 / (1.0 - layer.rate);
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * mask[i] * keep_scale;
  return g;
}

// ---------------------------------------------------------------------------
// LSTM

LSTMCell make_lstm_cell(std::size_t in, std::size_t hidden, Rng& rng) {
  LSTMCell cell{he_init(in + hidden, {in, 4 * hidden}, rng),
                he_init(in + hidden, {hidden, 4 * hidden}, rng), Tensor({4 * hidden})};
  for (std::size_t j = hidden; j < 2 * hidden; ++j) cell.bias[j] = 1.0;
  return cell;
}

LstmState lstm_step(const LSTMCell& cell, const Tensor& x_t, const Tensor& h_prev,
                    const Tensor& c_prev, LstmStepCache* cache) {
  require_rank(x_t, 2, "lstm_step");
  const std::size_t batch = x_t.dim(0), in = cell.input_size(), h = cell.hidden();
  require_shape(x_t, {batch, in}, "lstm_step x_t");
  require_shape(h_prev, {batch, h}, "lstm_step h_prev");
  require_shape(c_prev, {batch, h}, "lstm_step c_prev");

  const std::size_t g4 = 4 * h;
  Tensor gates({batch, g4});
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(cell.bias.raw(), g4, gates.raw() + b * g4);
  kernels::gemm(x_t.raw(), in, cell.input_weights.raw(), g4, gates.raw(), g4, batch, in, g4, true);
  kernels::gemm(h_prev.raw(), h, cell.recurrent_weights.raw(), g4, gates.raw(), g4, batch, h, g4,
                true);

  LstmState next{Tensor({batch, h}), Tensor({batch, h})};
  Tensor tanh_c({batch, h});
  for (std::size_t b = 0; b < batch; ++b) {
    double* z = gates.raw() + b * g4;
    for (std::size_t j = 0; j < h; ++j) {
      const double i_g = sigmoid(z[j]);
      const double f_g = sigmoid(z[h + j]);
      const double c_g = std::tanh(z[2 * h + j]);
      const double o_g = sigmoid(z[3 * h + j]);
      z[j] = i_g;
      z[h + j] = f_g;
      z[2 * h + j] = c_g;
      z[3 * h + j] = o_g;
      const double c = f_g * c_prev[b * h + j] + i_g * c_g;
      const double tc = std::tanh(c);
      next.c[b * h + j] = c;
      tanh_c[b * h + j] = tc;
      next.h[b * h + j] = o_g * tc;
    }
  }
  if (cache != nullptr) *cache = {x_t, h_prev, c_prev, std::move(gates), std::move(tanh_c)};
  return next;
}

LstmCellGradients LstmCellGradients::zeros_like(const LSTMCell& cell) {
  return {Tensor(cell.input_weights.shape()), Tensor(cell.recurrent_weights.shape()),
          Tensor(cell.bias.shape())};
}

namespace {

// Transposed weights are passed in so a sequence backward pass builds them
// once rather than per step.
LstmStepGradients step_backward(const LSTMCell& cell, const Tensor& input_weights_t,
                                const Tensor& recurrent_weights_t, const LstmStepCache& cache,
                                const Tensor& grad_h, const Tensor& grad_c,
                                LstmCellGradients& acc, bool need_x) {
  const std::size_t batch = cache.x.dim(0), in = cell.input_size(), h = cell.hidden();
  const std::size_t g4 = 4 * h;
  require_shape(grad_h, {batch, h}, "lstm_step_backward grad_h");
  require_shape(grad_c, {batch, h}, "lstm_step_backward grad_c");

  Tensor dz({batch, g4});
  LstmStepGradients out;
  out.c_prev = Tensor({batch, h});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* gate = cache.gates.raw() + b * g4;
    double* d = dz.raw() + b * g4;
    for (std::size_t j = 0; j < h; ++j) {
      const std::size_t bj = b * h + j;
      const double i_g = gate[j], f_g = gate[h + j], c_g = gate[2 * h + j], o_g = gate[3 * h + j];
      const double tc = cache.tanh_c[bj];
      const double dh = grad_h[bj];
      const double dc = grad_c[bj] + dh * o_g * (1.0 - tc * tc);
      d[j] = dc * c_g * i_g * (1.0 - i_g);
      d[h + j] = dc * cache.c_prev[bj] * f_g * (1.0 - f_g);
      d[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
      d[3 * h + j] = dh * tc * o_g * (1.0 - o_g);
      out.c_prev[bj] = dc * f_g;
    }
  }

  kernels::gemm_tn(cache.x.raw(), in, dz.raw(), g4, acc.input_weights.raw(), g4, batch, in, g4,
                   true);
  kernels::gemm_tn(cache.h_prev.raw(), h, dz.raw(), g4, acc.recurrent_weights.raw(), g4, batch, h,
                   g4, true);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < g4; ++j) acc.bias[j] += dz[b * g4 + j];

  out.h_prev = Tensor({batch, h});
  kernels::gemm(dz.raw(), g4, recurrent_weights_t.raw(), h, out.h_prev.raw(), h, batch, g4, h,
                false);
  if (need_x) {
    out.x = Tensor({batch, in});
    kernels::gemm(dz.raw(), g4, input_weights_t.raw(), in, out.x.raw(), in, batch, g4, in, false);
  }
  return out;
}

}  // namespace

LstmStepGradients lstm_step_backward(const LSTMCell& cell, const LstmStepCache& cache,
                                     const Tensor& grad_h, const Tensor& grad_c,
                                     LstmCellGradients& accumulated) {
  return step_backward(cell, transpose(cell.input_weights), transpose(cell.recurrent_weights),
                       cache, grad_h, grad_c, accumulated, true);
}

// ---------------------------------------------------------------------------
// Pooling

Tensor pool_forward(const PoolLayer& layer, const Tensor& x) {
  require_rank(x, 3, "pool_forward");
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  if (layer.kind == PoolKind::global_average) return reduce_mean(x, 1);

  if (layer.window == 0) throw ArgumentError("max pool window must be at least 1");
  if (len < layer.window)
    throw DimensionError("pool_forward: length " + std::to_string(len) + " shorter than window " +
                         std::to_string(layer.window));
  const std::size_t w = layer.window, out_len = len / w;
  Tensor out({batch, out_len, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < out_len; ++t)
      for (std::size_t c = 0; c < ch; ++c) {
        double best = x.at(b, t * w, c);
        for (std::size_t j = 1; j < w; ++j) best = std::max(best, x.at(b, t * w + j, c));
        out.at(b, t, c) = best;
      }
  return out;
}

Tensor pool_backward(const PoolLayer& layer, const Tensor& x, const Tensor& grad_out) {
  require_rank(x, 3, "pool_backward");
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  Tensor g(x.shape());
  if (layer.kind == PoolKind::global_average) {
    require_shape(grad_out, {batch, ch}, "pool_backward grad_out");
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t c = 0; c < ch; ++c) g.at(b, t, c) = grad_out.at(b, c) * inv;
    return g;
  }
  const std::size_t w = layer.window, out_len = len / w;
  require_shape(grad_out, {batch, out_len, ch}, "pool_backward grad_out");
  // Ties route the gradient to the first maximal element.
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < out_len; ++t)
      for (std::size_t c = 0; c < ch; ++c) {
        std::size_t arg = t * w;
        for (std::size_t j = 1; j < w; ++j)
          if (x.at(b, t * w + j, c) > x.at(b, arg, c)) arg = t * w + j;
        g.at(b, arg, c) += grad_out.at(b, t, c);
      }
  return g;
}

// ---------------------------------------------------------------------------
// Nodes

std::vector<const Tensor*> Layer::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& p : const_cast<Layer*>(this)->parameters()) out.push_back(p.tensor);
  return out;
}

Shape DenseNode::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != layer_.weights.dim(0))
    throw DimensionError("dense layer expects [" + std::to_string(layer_.weights.dim(0)) +
                         "] per sample, got " + shape_string(input));
  return {layer_.weights.dim(1)};
}

Tensor DenseNode::forward(const Tensor& x, Mode, Rng*, LayerCache* cache) const {
  Tensor y = dense_forward(layer_, x);
  if (cache != nullptr) {
    cache->input_shape = x.shape();
    cache->tensors = {x, y};
  }
  return y;
}

Tensor DenseNode::backward(const LayerCache& cache, const Tensor& grad_out,
                           std::span<Tensor> param_grads, bool need_input) const {
  DenseGradients g = dense_backward(layer_, cache.tensors.at(0), cache.tensors.at(1), grad_out,
                                    need_input);
  param_grads[0] = std::move(g.weights);
  param_grads[1] = std::move(g.bias);
  return g.input;
}

std::vector<NamedTensor> DenseNode::parameters() {
  return {{"weights", &layer_.weights}, {"bias", &layer_.bias}};
}

Shape Conv1DNode::output_shape(const Shape& input) const {
  const Shape seq = sequence_shape(input);
  if (seq[1] != layer_.in_channels())
    throw DimensionError("conv1d expects " + std::to_string(layer_.in_channels()) +
                         " channels, got " + shape_string(input));
  if (seq[0] < layer_.kernel_len())
    throw DimensionError("conv1d: sequence length " + std::to_string(seq[0]) +
                         " shorter than kernel length " + std::to_string(layer_.kernel_len()));
  return {seq[0] - layer_.kernel_len() + 1, layer_.filters()};
}

Tensor Conv1DNode::forward(const Tensor& x, Mode, Rng*, LayerCache* cache) const {
  Tensor seq = as_sequence(x);
  Tensor y = conv1d_forward(layer_, seq);
  if (cache != nullptr) {
    cache->input_shape = x.shape();
    cache->tensors = {std::move(seq)};
  }
  return y;
}

Tensor Conv1DNode::backward(const LayerCache& cache, const Tensor& grad_out,
                            std::span<Tensor> param_grads, bool need_input) const {
  Conv1DGradients g = conv1d_backward(layer_, cache.tensors.at(0), grad_out, need_input);
  param_grads[0] = std::move(g.kernels);
  param_grads[1] = std::move(g.bias);
  if (!need_input) return {};
  return g.input.reshaped(cache.input_shape);
}

std::vector<NamedTensor> Conv1DNode::parameters() {
  return {{"kernels", &layer_.kernels}, {"bias", &layer_.bias}};
}

DropoutNode::DropoutNode(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ArgumentError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
}

Tensor DropoutNode::forward(const Tensor& x, Mode mode, Rng* rng, LayerCache* cache) const {
  if (mode == Mode::inference || rate_ == 0.0) {
    if (cache != nullptr) {
      cache->input_shape = x.shape();
      cache->tensors.clear();
    }
    return x;
  }
  if (rng == nullptr) throw UsageError("dropout in train mode needs an Rng");
  DropoutResult r = dropout_apply({rate_, Mode::train}, x, *rng);
  if (cache != nullptr) {
    cache->input_shape = x.shape();
    cache->tensors = {std::move(r.mask)};
  }
  return std::move(r.output);
}

Tensor DropoutNode::backward(const LayerCache& cache, const Tensor& grad_out, std::span<Tensor>,
                             bool need_input) const {
  if (!need_input) return {};
  if (cache.tensors.empty()) return grad_out;
  return dropout_backward({rate_, Mode::train}, cache.tensors[0], grad_out);
}

Shape LstmNode::output_shape(const Shape& input) const {
  const Shape seq = sequence_shape(input);
  if (seq[1] != cell_.input_size())
    throw DimensionError("lstm expects " + std::to_string(cell_.input_size()) +
                         " features per step, got " + shape_string(input));
  if (return_sequences_) return {seq[0], cell_.hidden()};
  return {cell_.hidden()};
}

Tensor LstmNode::forward(const Tensor& x, Mode, Rng*, LayerCache* cache) const {
  const Tensor seq = as_sequence(x);
  const std::size_t batch = seq.dim(0), len = seq.dim(1), h = cell_.hidden();
  if (seq.dim(2) != cell_.input_size())
    throw DimensionError("lstm: input " + shape_string(x.shape()) + " does not fit cell input " +
                         std::to_string(cell_.input_size()));
  LstmState state{Tensor({batch, h}), Tensor({batch, h})};
  Tensor out = return_sequences_ ? Tensor({batch, len, h}) : Tensor();
  if (cache != nullptr) {
    cache->input_shape = x.shape();
    cache->steps.assign(len, {});
  }
  for (std::size_t t = 0; t < len; ++t) {
    state = lstm_step(cell_, time_slice(seq, t), state.h, state.c,
                      cache != nullptr ? &cache->steps[t] : nullptr);
    if (return_sequences_)
      for (std::size_t b = 0; b < batch; ++b)
        std::copy_n(state.h.raw() + b * h, h, out.raw() + (b * len + t) * h);
  }
  return return_sequences_ ? out : state.h;
}

Tensor LstmNode::backward(const LayerCache& cache, const Tensor& grad_out,
                          std::span<Tensor> param_grads, bool need_input) const {
  const std::size_t len = cache.steps.size();
  if (len == 0) throw UsageError("lstm backward without a recorded forward pass");
  const std::size_t batch = cache.steps[0].x.dim(0), in = cell_.input_size(), h = cell_.hidden();
  if (return_sequences_)
    require_shape(grad_out, {batch, len, h}, "lstm backward grad_out");
  else
    require_shape(grad_out, {batch, h}, "lstm backward grad_out");

  const Tensor wx_t = transpose(cell_.input_weights);
  const Tensor wh_t = transpose(cell_.recurrent_weights);
  LstmCellGradients acc = LstmCellGradients::zeros_like(cell_);
  Tensor dh({batch, h}), dc({batch, h});
  Tensor dx = need_input ? Tensor({batch, len, in}) : Tensor();
  for (std::size_t t = len; t-- > 0;) {
    if (return_sequences_) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < h; ++j) dh[b * h + j] += grad_out.at(b, t, j);
    } else if (t == len - 1) {
      accumulate(dh, grad_out);
    }
    LstmStepGradients g = step_backward(cell_, wx_t, wh_t, cache.steps[t], dh, dc, acc, need_input);
    if (need_input)
      for (std::size_t b = 0; b < batch; ++b)
        std::copy_n(g.x.raw() + b * in, in, dx.raw() + (b * len + t) * in);
    dh = std::move(g.h_prev);
    dc = std::move(g.c_prev);
  }
  param_grads[0] = std::move(acc.input_weights);
  param_grads[1] = std::move(acc.recurrent_weights);
  param_grads[2] = std::move(acc.bias);
  if (!need_input) return {};
  return dx.reshaped(cache.input_shape);
}

std::vector<NamedTensor> LstmNode::parameters() {
  return {{"input_weights", &cell_.input_weights},
          {"recurrent_weights", &cell_.recurrent_weights},
          {"bias", &cell_.bias}};
}

Shape PoolNode::output_shape(const Shape& input) const {
  if (input.size() != 2)
    throw DimensionError("pooling expects [len x channels] per sample, got " + shape_string(input));
  if (layer_.kind == PoolKind::global_average) return {input[1]};
  if (layer_.window == 0 || input[0] < layer_.window)
    throw DimensionError("max pool: length " + std::to_string(input[0]) +
                         " shorter than window " + std::to_string(layer_.window));
  return {input[0] / layer_.window, input[1]};
}

Tensor PoolNode::forward(const Tensor& x, Mode, Rng*, LayerCache* cache) const {
  Tensor y = pool_forward(layer_, x);
  if (cache != nullptr) {
    cache->input_shape = x.shape();
    cache->tensors = {x};
  }
  return y;
}

Tensor PoolNode::backward(const LayerCache& cache, const Tensor& grad_out, std::span<Tensor>,
                          bool need_input) const {
  if (!need_input) return {};
  return pool_backward(layer_, cache.tensors.at(0), grad_out);
}

}  // namespace dwrpm

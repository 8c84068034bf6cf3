#include "dwrpm/model.hpp"

#include "dwrpm/errors.hpp"

namespace dwrpm {

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::dwrpm: return "dwrpm";
    case Architecture::mlp: return "mlp";
    case Architecture::cnn: return "cnn";
    case Architecture::lstm: return "lstm";
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "dwrpm") return Architecture::dwrpm;
  if (name == "mlp") return Architecture::mlp;
  if (name == "cnn") return Architecture::cnn;
  if (name == "lstm") return Architecture::lstm;
  throw ArgumentError("unknown architecture '" + std::string(name) +
                      "' (expected dwrpm, mlp, cnn or lstm)");
}

ArchitectureOptions ArchitectureOptions::defaults(Architecture arch) {
  ArchitectureOptions o;
  switch (arch) {
    case Architecture::dwrpm:
      o.hidden = {300, 200, 100, 50};
      break;
    case Architecture::mlp:
      o.hidden = {300, 200, 100};
      break;
    case Architecture::cnn:
      o.dropout = 0.2;
      break;
    case Architecture::lstm:
      break;
  }
  return o;
}

ModelGraph::ModelGraph(Architecture arch, std::size_t seq_len, ArchitectureOptions options,
                       std::vector<Branch> branches, std::vector<JoinItem> join, Rng& rng)
    : arch_(arch),
      seq_len_(seq_len),
      options_(std::move(options)),
      branches_(std::move(branches)),
      join_(std::move(join)) {
  if (seq_len_ == 0) throw DimensionError(to_string(arch_) + ": seq_len must be positive");
  std::vector<std::size_t> widths;
  for (const Branch& branch : branches_) {
    Shape shape{seq_len_};
    for (std::size_t i = 0; i < branch.layers.size(); ++i) {
      try {
        shape = branch.layers[i]->output_shape(shape);
      } catch (const DimensionError& e) {
        throw DimensionError(to_string(arch_) + " with seq_len " + std::to_string(seq_len_) +
                             ": " + branch.name + " layer " + std::to_string(i) + " (" +
                             branch.layers[i]->kind() + "): " + e.what());
      }
    }
    if (shape.size() != 1)
      throw DimensionError(to_string(arch_) + ": branch " + branch.name +
                           " must end in a flat vector, ends in " + shape_string(shape));
    widths.push_back(shape[0]);
  }

  std::size_t offset = 0;
  for (const JoinItem& item : join_) {
    if (item.source == JoinSource::coords) {
      segments_.push_back({"coords", offset, 2});
      offset += 2;
    } else {
      if (item.branch >= branches_.size()) throw ArgumentError("join refers to a missing branch");
      segments_.push_back({branches_[item.branch].name, offset, widths[item.branch]});
      offset += widths[item.branch];
    }
  }
  head_ = make_dense(offset, 1, Activation::linear, rng);
}

ModelGraph::ModelGraph(const ModelGraph& other)
    : arch_(other.arch_),
      seq_len_(other.seq_len_),
      options_(other.options_),
      join_(other.join_),
      segments_(other.segments_),
      head_(other.head_) {
  for (const Branch& b : other.branches_) {
    Branch copy{b.name, {}};
    for (const auto& layer : b.layers) copy.layers.push_back(layer->clone());
    branches_.push_back(std::move(copy));
  }
}

ModelGraph& ModelGraph::operator=(const ModelGraph& other) {
  if (this != &other) *this = ModelGraph(other);
  return *this;
}

std::size_t ModelGraph::join_width() const { return head_.weights.dim(0); }

std::vector<NamedTensor> ModelGraph::parameters() {
  std::vector<NamedTensor> out;
  for (Branch& branch : branches_)
    for (std::size_t i = 0; i < branch.layers.size(); ++i)
      for (NamedTensor p : branch.layers[i]->parameters()) {
        p.name = branch.name + "." + std::to_string(i) + "." + branch.layers[i]->kind() + "." +
                 p.name;
        out.push_back(std::move(p));
      }
  out.push_back({"head.weights", &head_.weights});
  out.push_back({"head.bias", &head_.bias});
  return out;
}

std::vector<const Tensor*> ModelGraph::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& p : const_cast<ModelGraph*>(this)->parameters()) out.push_back(p.tensor);
  return out;
}

std::vector<std::string> ModelGraph::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : const_cast<ModelGraph*>(this)->parameters()) out.push_back(p.name);
  return out;
}

std::size_t ModelGraph::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameters()) n += t->size();
  return n;
}

void ModelGraph::check_inputs(const Tensor& x, const Tensor& coords) const {
  if (x.rank() != 2 || x.dim(1) != seq_len_)
    throw UsageError(to_string(arch_) + " expects input [batch x " + std::to_string(seq_len_) +
                     "], got " + shape_string(x.shape()));
  if (coords.rank() != 2 || coords.dim(0) != x.dim(0) || coords.dim(1) != 2)
    throw UsageError(to_string(arch_) + " expects coordinates [" + std::to_string(x.dim(0)) +
                     " x 2], got " + shape_string(coords.shape()));
}

Tensor ModelGraph::run(const Tensor& x, const Tensor& coords, Mode mode, Rng* rng,
                       ForwardTape* tape) const {
  check_inputs(x, coords);
  if (mode == Mode::train && rng == nullptr) throw UsageError("train-mode forward needs an Rng");
  const std::size_t batch = x.dim(0);
  if (tape != nullptr) {
    tape->branch_caches.assign(branches_.size(), {});
    tape->batch = batch;
  }

  std::vector<Tensor> outputs;
  outputs.reserve(branches_.size());
  for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
    const Branch& branch = branches_[bi];
    if (tape != nullptr) tape->branch_caches[bi].resize(branch.layers.size());
    Tensor h = x;
    for (std::size_t li = 0; li < branch.layers.size(); ++li)
      h = branch.layers[li]->forward(h, mode, rng,
                                     tape != nullptr ? &tape->branch_caches[bi][li] : nullptr);
    outputs.push_back(std::move(h));
  }

  std::vector<const Tensor*> parts;
  for (const JoinItem& item : join_)
    parts.push_back(item.source == JoinSource::coords ? &coords : &outputs[item.branch]);
  Tensor joined = concat_columns(parts);
  Tensor y = dense_forward(head_, joined);
  if (tape != nullptr) {
    tape->joined = std::move(joined);
    tape->recorded = true;
  }
  return y;
}

ForwardResult ModelGraph::forward(const Tensor& x, const Tensor& coords, Mode mode,
                                  Rng* rng) const {
  ForwardResult r;
  r.output = run(x, coords, mode, rng, &r.tape);
  return r;
}

Tensor ModelGraph::predict(const Tensor& x, const Tensor& coords) const {
  return run(x, coords, Mode::inference, nullptr, nullptr);
}

std::vector<Tensor> ModelGraph::backward(const ForwardTape& tape, const Tensor& grad_out) const {
  if (!tape.recorded) throw UsageError("backward called without a recorded forward pass");
  if (grad_out.rank() != 2 || grad_out.dim(0) != tape.batch || grad_out.dim(1) != 1)
    throw UsageError("backward expects grad_out [" + std::to_string(tape.batch) + " x 1], got " +
                     shape_string(grad_out.shape()));

  std::vector<Tensor> grads;
  // Branch parameter gradients first, matching parameters() order.
  std::vector<std::size_t> first_param(branches_.size() + 1, 0);
  {
    std::size_t n = 0;
    for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
      first_param[bi] = n;
      for (const auto& layer : branches_[bi].layers) n += layer->parameters().size();
    }
    first_param[branches_.size()] = n;
    grads.resize(n + 2);
  }

  const Tensor& joined = tape.joined;
  DenseGradients head = dense_backward(head_, joined, Tensor(), grad_out, true);
  grads[grads.size() - 2] = std::move(head.weights);
  grads[grads.size() - 1] = std::move(head.bias);

  const std::size_t batch = tape.batch, width = join_width();
  for (std::size_t s = 0; s < join_.size(); ++s) {
    if (join_[s].source != JoinSource::branch) continue;
    const std::size_t bi = join_[s].branch;
    const JoinSegment& seg = segments_[s];
    Tensor g({batch, seg.width});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < seg.width; ++j)
        g[b * seg.width + j] = head.input[b * width + seg.offset + j];

    const Branch& branch = branches_[bi];
    std::size_t p_end = first_param[bi + 1];
    for (std::size_t li = branch.layers.size(); li-- > 0;) {
      const Layer& layer = *branch.layers[li];
      const std::size_t np = layer.parameters().size();
      const std::size_t p_begin = p_end - np;
      g = layer.backward(tape.branch_caches[bi][li], g,
                         std::span<Tensor>(grads.data() + p_begin, np), li > 0);
      p_end = p_begin;
    }
  }
  return grads;
}

namespace {

std::vector<std::unique_ptr<Layer>> dense_stack(std::size_t in,
                                                const std::vector<std::size_t>& widths,
                                                double dropout, Rng& rng) {
  std::vector<std::unique_ptr<Layer>> layers;
  for (std::size_t w : widths) {
    layers.push_back(std::make_unique<DenseNode>(make_dense(in, w, Activation::relu, rng)));
    layers.push_back(std::make_unique<DropoutNode>(dropout));
    in = w;
  }
  return layers;
}

void require_seq_len(Architecture arch, std::size_t seq_len, std::size_t minimum) {
  if (seq_len < minimum)
    throw DimensionError(to_string(arch) + ": seq_len " + std::to_string(seq_len) +
                         " is shorter than the receptive field " + std::to_string(minimum));
}

}  // namespace

ModelGraph build_dwrpm(std::size_t seq_len, Rng& rng, const ArchitectureOptions& options) {
  require_seq_len(Architecture::dwrpm, seq_len, options.kernel_len);
  ModelGraph::Branch deep{"deep", dense_stack(seq_len, options.hidden, options.dropout, rng)};
  ModelGraph::Branch wide{"wide", {}};
  wide.layers.push_back(
      std::make_unique<Conv1DNode>(make_conv1d(1, options.filters, options.kernel_len, rng)));
  wide.layers.push_back(std::make_unique<PoolNode>(PoolLayer{PoolKind::global_average, 1}));

  std::vector<ModelGraph::Branch> branches;
  branches.push_back(std::move(wide));
  branches.push_back(std::move(deep));
  using J = ModelGraph::JoinSource;
  return ModelGraph(Architecture::dwrpm, seq_len, options, std::move(branches),
                    {{J::branch, 0}, {J::coords, 0}, {J::branch, 1}}, rng);
}

ModelGraph build_mlp_baseline(std::size_t seq_len, Rng& rng, const ArchitectureOptions& options) {
  std::vector<ModelGraph::Branch> branches;
  branches.push_back({"mlp", dense_stack(seq_len, options.hidden, options.dropout, rng)});
  using J = ModelGraph::JoinSource;
  return ModelGraph(Architecture::mlp, seq_len, options, std::move(branches),
                    {{J::branch, 0}, {J::coords, 0}}, rng);
}

ModelGraph build_cnn_baseline(std::size_t seq_len, Rng& rng, const ArchitectureOptions& options) {
  const std::size_t k = options.kernel_len;
  const std::size_t minimum = 2 * (k - 1) + options.pool_window * k;
  require_seq_len(Architecture::cnn, seq_len, minimum);

  ModelGraph::Branch cnn{"cnn", {}};
  const std::size_t f = options.filters;
  cnn.layers.push_back(std::make_unique<Conv1DNode>(make_conv1d(1, f, k, rng)));
  cnn.layers.push_back(std::make_unique<Conv1DNode>(make_conv1d(f, f, k, rng)));
  cnn.layers.push_back(std::make_unique<PoolNode>(PoolLayer{PoolKind::max, options.pool_window}));
  cnn.layers.push_back(std::make_unique<DropoutNode>(options.dropout));
  cnn.layers.push_back(std::make_unique<Conv1DNode>(make_conv1d(f, f, k, rng)));
  cnn.layers.push_back(std::make_unique<PoolNode>(PoolLayer{PoolKind::global_average, 1}));
  cnn.layers.push_back(std::make_unique<DropoutNode>(options.dropout));

  std::vector<ModelGraph::Branch> branches;
  branches.push_back(std::move(cnn));
  using J = ModelGraph::JoinSource;
  return ModelGraph(Architecture::cnn, seq_len, options, std::move(branches),
                    {{J::branch, 0}, {J::coords, 0}}, rng);
}

ModelGraph build_lstm_baseline(std::size_t seq_len, Rng& rng, const ArchitectureOptions& options) {
  require_seq_len(Architecture::lstm, seq_len, 1);
  const std::size_t h = options.lstm_units;
  ModelGraph::Branch lstm{"lstm", {}};
  lstm.layers.push_back(std::make_unique<LstmNode>(make_lstm_cell(1, h, rng), true));
  lstm.layers.push_back(std::make_unique<DropoutNode>(options.dropout));
  lstm.layers.push_back(std::make_unique<LstmNode>(make_lstm_cell(h, h, rng), false));

  std::vector<ModelGraph::Branch> branches;
  branches.push_back(std::move(lstm));
  using J = ModelGraph::JoinSource;
  return ModelGraph(Architecture::lstm, seq_len, options, std::move(branches),
                    {{J::branch, 0}, {J::coords, 0}}, rng);
}

ModelGraph build_model(Architecture arch, std::size_t seq_len, Rng& rng,
                       const ArchitectureOptions& options) {
  switch (arch) {
    case Architecture::dwrpm: return build_dwrpm(seq_len, rng, options);
    case Architecture::mlp: return build_mlp_baseline(seq_len, rng, options);
    case Architecture::cnn: return build_cnn_baseline(seq_len, rng, options);
    case Architecture::lstm: return build_lstm_baseline(seq_len, rng, options);
  }
  throw ArgumentError("unknown architecture");
}

ModelGraph build_model(Architecture arch, std::size_t seq_len, Rng& rng) {
  return build_model(arch, seq_len, rng, ArchitectureOptions::defaults(arch));
}

}  // namespace dwrpm

#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dwrpm/layers.hpp"

namespace dwrpm {

enum class Architecture { dwrpm, mlp, cnn, lstm };

std::string to_string(Architecture arch);
/// Accepts "dwrpm", "mlp", "cnn", "lstm"; throws ArgumentError otherwise.
Architecture parse_architecture(std::string_view name);

/// Layer widths for one architecture. defaults() gives the published
/// configuration; the gradient checks shrink these.
struct ArchitectureOptions {
  std::vector<std::size_t> hidden;  // dense widths (DWRPM deep branch, MLP)
  std::size_t filters = 100;
  std::size_t kernel_len = 5;
  std::size_t pool_window = 2;
  std::size_t lstm_units = 50;
  double dropout = 0.3;

  static ArchitectureOptions defaults(Architecture arch);
  friend bool operator==(const ArchitectureOptions&, const ArchitectureOptions&) = default;
};

/// Width of one input to the output head, in concatenation order.
struct JoinSegment {
  std::string name;
  std::size_t offset;
  std::size_t width;
};

/// Intermediates recorded by a train/inference forward pass for backward().
struct ForwardTape {
  bool recorded = false;
  std::size_t batch = 0;
  std::vector<std::vector<LayerCache>> branch_caches;
  Tensor joined;  // [batch x join width], the output head's input
};

struct ForwardResult {
  Tensor output;  // [batch x 1]
  ForwardTape tape;
};

/// Branches of layers over the rainfall sequence, joined with the
/// coordinate pair into one linear dense output.
///
/// DWRPM has a wide branch (conv1d -> global average pool) and a deep branch
/// (ReLU dense stack with dropout); its head input is [wide | coords | deep],
/// so the head weights split into the three weight vectors of the joint
/// model. The baselines have one branch and the head input [branch | coords].
class ModelGraph {
 public:
  enum class JoinSource { branch, coords };
  struct JoinItem {
    JoinSource source;
    std::size_t branch = 0;
  };
  struct Branch {
    std::string name;
    std::vector<std::unique_ptr<Layer>> layers;
  };

  /// Validates every layer against its predecessor's output shape; throws
  /// DimensionError naming the architecture when seq_len does not fit.
  ModelGraph(Architecture arch, std::size_t seq_len, ArchitectureOptions options,
             std::vector<Branch> branches, std::vector<JoinItem> join, Rng& rng);

  ModelGraph(const ModelGraph& other);
  ModelGraph& operator=(const ModelGraph& other);
  ModelGraph(ModelGraph&&) noexcept = default;
  ModelGraph& operator=(ModelGraph&&) noexcept = default;

  Architecture architecture() const { return arch_; }
  std::size_t seq_len() const { return seq_len_; }
  const ArchitectureOptions& options() const { return options_; }
  const std::vector<Branch>& branches() const { return branches_; }

  const std::vector<JoinSegment>& join_segments() const { return segments_; }
  std::size_t join_width() const;
  const DenseLayer& head() const { return head_; }
  DenseLayer& head() { return head_; }

  /// Every trainable tensor exactly once, in a fixed order with stable names.
  std::vector<NamedTensor> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  /// x [batch x seq_len], coords [batch x 2]. Train mode needs an Rng for
  /// dropout; inference ignores it.
  ForwardResult forward(const Tensor& x, const Tensor& coords, Mode mode, Rng* rng) const;

  /// Inference without recording a tape.
  Tensor predict(const Tensor& x, const Tensor& coords) const;

  /// Gradient of sum(grad_out * output) for every tensor of parameters().
  std::vector<Tensor> backward(const ForwardTape& tape, const Tensor& grad_out) const;

 private:
  void check_inputs(const Tensor& x, const Tensor& coords) const;
  Tensor run(const Tensor& x, const Tensor& coords, Mode mode, Rng* rng, ForwardTape* tape) const;

  Architecture arch_;
  std::size_t seq_len_;
  ArchitectureOptions options_;
  std::vector<Branch> branches_;
  std::vector<JoinItem> join_;
  std::vector<JoinSegment> segments_;
  DenseLayer head_;
};

/// input -> dense(300) -> ... -> dense(50), ReLU with dropout after each
/// (deep), plus conv1d(100 filters, length 5) -> global average pool
/// (wide); joined as [wide | coords | deep].
ModelGraph build_dwrpm(std::size_t seq_len, Rng& rng,
                       const ArchitectureOptions& options =
                           ArchitectureOptions::defaults(Architecture::dwrpm));

/// dense(300) -> dense(200) -> dense(100), ReLU with dropout after each.
ModelGraph build_mlp_baseline(std::size_t seq_len, Rng& rng,
                              const ArchitectureOptions& options =
                                  ArchitectureOptions::defaults(Architecture::mlp));

/// conv -> conv -> max pool -> dropout -> conv -> global average pool -> dropout.
ModelGraph build_cnn_baseline(std::size_t seq_len, Rng& rng,
                              const ArchitectureOptions& options =
                                  ArchitectureOptions::defaults(Architecture::cnn));

/// lstm(50, sequence) -> dropout -> lstm(50, last state).
ModelGraph build_lstm_baseline(std::size_t seq_len, Rng& rng,
                               const ArchitectureOptions& options =
                                   ArchitectureOptions::defaults(Architecture::lstm));

ModelGraph build_model(Architecture arch, std::size_t seq_len, Rng& rng,
                       const ArchitectureOptions& options);
ModelGraph build_model(Architecture arch, std::size_t seq_len, Rng& rng);

}  // namespace dwrpm

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dwrpm/data.hpp"
#include "dwrpm/model.hpp"

namespace dwrpm {

/// Mean squared difference; throws ArgumentError on empty or unequal input.
double mse(std::span<const double> pred, std::span<const double> target);
double mse(const Tensor& pred, const Tensor& target);
/// d mse / d pred = 2 (pred - target) / N, shaped like pred.
Tensor mse_gradient(const Tensor& pred, const Tensor& target);

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;

  static AdamState for_parameters(std::span<const Tensor* const> params, AdamHyper hyper = {});
};

/// One bias-corrected Adam update in place. Gradients are checked for NaN/Inf
/// before anything changes; a NumericError names the offending parameter.
void adam_step(AdamState& state, std::span<const NamedTensor> params,
               std::span<const Tensor> grads);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  AdamHyper adam;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t patience = 0;    // early stopping after this many epochs without improvement; 0 = off
  double clip_norm = 0.0;      // global gradient-norm clip; 0 = off
  bool restore_best = true;    // leave the lowest-validation-RMSE parameters in the model

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_mae;
  std::optional<double> val_rmse;
  double seconds = 0.0;
};

struct TrainReport {
  std::string architecture;
  std::size_t parameter_count = 0;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_val_mae;
  std::optional<double> best_val_rmse;
  bool stopped_early = false;
  double wall_seconds = 0.0;

  /// Everything except timings, so equal runs serialize to equal bytes.
  std::string to_json() const;
  /// Wall-clock timings only.
  std::string timing_json() const;
};

/// Row indices for each mini-batch of one epoch: a permutation of
/// 0..n_rows-1 (or identity order without shuffling), cut into batches of
/// `batch_size` with a final partial batch.
std::vector<std::vector<std::size_t>> make_epoch_batches(std::size_t n_rows,
                                                         std::size_t batch_size, bool shuffle,
                                                         Rng& rng);

/// Joint training of every parameter with MSE and Adam over the train split,
/// dropout active. Validation MAE/RMSE (mm) are tracked per epoch. Fully
/// determined by cfg.seed and the model's initial parameters. Throws
/// NumericError if the loss diverges.
TrainReport train(ModelGraph& model, const WindowedDataset& data, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

}  // namespace dwrpm

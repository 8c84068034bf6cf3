#include "dwrpm/optim.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <utility>

#include "json.hpp"

#include "dwrpm/errors.hpp"
#include "dwrpm/eval.hpp"

namespace dwrpm {

double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw ArgumentError("mse: " + std::to_string(pred.size()) + " predictions vs " +
                        std::to_string(target.size()) + " targets");
  if (pred.empty()) throw ArgumentError("mse: no samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

double mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw DimensionError("mse: shapes " + shape_string(pred.shape()) + " and " +
                         shape_string(target.shape()) + " differ");
  return mse(pred.data(), target.data());
}

Tensor mse_gradient(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw DimensionError("mse_gradient: shapes " + shape_string(pred.shape()) + " and " +
                         shape_string(target.shape()) + " differ");
  Tensor g(pred.shape());
  const double k = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = k * (pred[i] - target[i]);
  return g;
}

AdamState AdamState::for_parameters(std::span<const Tensor* const> params, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->shape());
    s.v.emplace_back(p->shape());
  }
  return s;
}

void adam_step(AdamState& state, std::span<const NamedTensor> params,
               std::span<const Tensor> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " +
                         std::to_string(state.m.size()) + " moment slots");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].tensor->shape())
      throw DimensionError("adam_step: gradient for " + params[i].name + " has shape " +
                           shape_string(grads[i].shape()) + ", parameter has " +
                           shape_string(params[i].tensor->shape()));
    if (!grads[i].all_finite())
      throw NumericError("adam_step: non-finite gradient for parameter " + params[i].name);
  }

  constexpr double kTiny = std::numeric_limits<double>::min();
  const AdamHyper& h = state.hyper;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].tensor->raw();
    double* m = state.m[i].raw();
    double* v = state.v[i].raw();
    const double* g = grads[i].raw();
    const std::size_t n = grads[i].size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
      // A parameter whose gradient stays zero (a dead ReLU unit) decays its
      // moments into subnormals, which are very slow on x86.
      if (std::abs(m[j]) < kTiny) m[j] = 0.0;
      if (v[j] < kTiny) v[j] = 0.0;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ArgumentError("epochs must be at least 1");
  if (batch_size == 0) throw ArgumentError("batch_size must be at least 1");
  if (!(adam.lr >= 0.0)) throw ArgumentError("learning rate must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ArgumentError("Adam betas must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw ArgumentError("Adam epsilon must be positive");
  if (!(clip_norm >= 0.0)) throw ArgumentError("clip_norm must be non-negative");
}

std::vector<std::vector<std::size_t>> make_epoch_batches(std::size_t n_rows,
                                                         std::size_t batch_size, bool shuffle,
                                                         Rng& rng) {
  if (batch_size == 0) throw ArgumentError("batch_size must be at least 1");
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle)
    for (std::size_t i = n_rows; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < n_rows; begin += batch_size) {
    const std::size_t end = std::min(n_rows, begin + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

namespace {

void clip_gradients(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double k = max_norm / norm;
  for (Tensor& g : grads)
    for (double& v : g.data()) v *= k;
}

MetricPair split_metrics(const ModelGraph& model, const WindowedDataset& data,
                         std::span<const std::size_t> rows) {
  const std::vector<double> pred = predict_rows(model, data, rows);
  ErrorAccumulator acc;
  for (std::size_t i = 0; i < rows.size(); ++i)
    acc.add(std::max(0.0, data.normalizer.denormalize(pred[i])),
            data.normalizer.denormalize(data.targets[rows[i]]));
  return acc.result();
}

}  // namespace

TrainReport train(ModelGraph& model, const WindowedDataset& data, const TrainConfig& cfg,
                  std::ostream* log) {
  cfg.validate();
  if (data.seq_len != model.seq_len())
    throw ArgumentError("dataset seq_len " + std::to_string(data.seq_len) +
                        " does not match model seq_len " + std::to_string(model.seq_len()));
  const std::vector<std::size_t> train_rows = data.rows_in(Split::train);
  const std::vector<std::size_t> val_rows = data.rows_in(Split::val);
  if (train_rows.empty()) throw ArgumentError("training split is empty");

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  TrainReport report;
  report.architecture = to_string(model.architecture());
  report.parameter_count = model.parameter_count();
  report.train_rows = train_rows.size();
  report.val_rows = val_rows.size();

  Rng shuffle_rng(cfg.seed, 101);
  Rng dropout_rng(cfg.seed, 202);
  AdamState adam = AdamState::for_parameters(std::as_const(model).parameters(), cfg.adam);

  std::vector<Tensor> best_params;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_start = clock::now();
    const auto batches = make_epoch_batches(train_rows.size(), cfg.batch_size, cfg.shuffle,
                                            shuffle_rng);
    double loss_sum = 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      rows.clear();
      for (std::size_t i : batches[bi]) rows.push_back(train_rows[i]);
      const auto batch = data.batch(rows);
      ForwardResult fwd = model.forward(batch.x, batch.coords, Mode::train, &dropout_rng);
      const double loss = mse(fwd.output, batch.target);
      if (!std::isfinite(loss))
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi + 1) + ": loss is " + std::to_string(loss));
      loss_sum += loss * static_cast<double>(rows.size());
      std::vector<Tensor> grads = model.backward(fwd.tape, mse_gradient(fwd.output, batch.target));
      if (cfg.clip_norm > 0.0) clip_gradients(grads, cfg.clip_norm);
      const auto params = model.parameters();
      adam_step(adam, params, grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_rows.size());
    bool improved = true;
    if (!val_rows.empty()) {
      const MetricPair m = split_metrics(model, data, val_rows);
      rec.val_mae = m.mae;
      rec.val_rmse = m.rmse;
      improved = !report.best_val_rmse || m.rmse < *report.best_val_rmse;
    }
    rec.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
    report.epochs.push_back(rec);

    if (improved) {
      report.best_epoch = epoch;
      report.best_val_mae = rec.val_mae;
      report.best_val_rmse = rec.val_rmse;
      since_best = 0;
      if (cfg.restore_best) {
        best_params.clear();
        for (const Tensor* p : std::as_const(model).parameters()) best_params.push_back(*p);
      }
    } else {
      ++since_best;
    }

    if (log != nullptr) {
      *log << "epoch " << epoch << "/" << cfg.epochs << "  train_mse " << rec.train_loss;
      if (rec.val_mae) *log << "  val_mae " << *rec.val_mae << "  val_rmse " << *rec.val_rmse;
      *log << "  (" << rec.seconds << " s)" << std::endl;
    }
    if (cfg.patience > 0 && since_best >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }

  if (cfg.restore_best && !best_params.empty()) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = best_params[i];
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return report;
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "dwrpm-train-report";
  j["version"] = 1;
  j["architecture"] = architecture;
  j["parameter_count"] = parameter_count;
  j["train_rows"] = train_rows;
  j["val_rows"] = val_rows;
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["epochs"] = nlohmann::ordered_json::array();
  for (const EpochRecord& e : epochs)
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_mae", opt(e.val_mae)},
                           {"val_rmse", opt(e.val_rmse)}});
  j["best_epoch"] = best_epoch;
  j["final"] = {{"val_mae", opt(best_val_mae)}, {"val_rmse", opt(best_val_rmse)}};
  j["stopped_early"] = stopped_early;
  return j.dump(2) + "\n";
}

std::string TrainReport::timing_json() const {
  nlohmann::ordered_json j;
  j["wall_seconds"] = wall_seconds;
  j["epoch_seconds"] = nlohmann::ordered_json::array();
  for (const EpochRecord& e : epochs) j["epoch_seconds"].push_back(e.seconds);
  return j.dump(2) + "\n";
}

}  // namespace dwrpm

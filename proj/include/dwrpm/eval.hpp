#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dwrpm/data.hpp"
#include "dwrpm/model.hpp"

namespace dwrpm {

/// Errors in millimetres over n paired samples.
struct MetricPair {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

double mae(std::span<const double> pred, std::span<const double> actual);
double rmse(std::span<const double> pred, std::span<const double> actual);

/// Running sums for MAE/RMSE. Merging accumulators gives the same result as
/// accumulating all samples in one.
class ErrorAccumulator {
 public:
  void add(double pred, double actual);
  void merge(const ErrorAccumulator& other);
  std::size_t count() const { return n_; }
  MetricPair result() const;

 private:
  double abs_sum_ = 0.0;
  double sq_sum_ = 0.0;
  std::size_t n_ = 0;
};

struct PredictionRow {
  std::string station_id;
  Date date;
  double actual_mm = 0.0;
  double predicted_mm = 0.0;
  ImdCategory category = ImdCategory::no_rain;  // of the actual value
};

struct EvalReport {
  std::string model;
  std::string split;
  MetricPair overall;
  std::vector<std::pair<Zone, MetricPair>> per_zone;            // zones with samples
  std::vector<std::pair<std::string, MetricPair>> per_station;  // station-id order
  std::vector<std::pair<ImdCategory, MetricPair>> per_category;
  std::string predictions_file;
};

struct Evaluation {
  EvalReport report;
  std::vector<PredictionRow> predictions;
};

/// Model outputs in normalized units for the given dataset rows, inference
/// mode, in row order.
std::vector<double> predict_rows(const ModelGraph& model, const WindowedDataset& data,
                                 std::span<const std::size_t> rows, std::size_t batch_size = 32);

/// Scores predictions already in mm; negative predictions are clamped to 0.
Evaluation evaluate_predictions(const WindowedDataset& data, std::span<const std::size_t> rows,
                                std::span<const double> predicted_mm, const std::string& model,
                                Split split);

/// Predicts every row of `split`, denormalizes, clamps at 0 mm, and scores
/// overall, per zone, per station and per IMD category of the actual value.
Evaluation evaluate(const ModelGraph& model, const WindowedDataset& data, Split split);

/// Day-of-year mean of training-split targets, in mm.
class ClimatologyPredictor {
 public:
  explicit ClimatologyPredictor(const WindowedDataset& data);
  double predict(Date date) const;

 private:
  std::vector<double> by_day_;  // index 1..366
};

// ---------------------------------------------------------------------------
// Serialization

/// Machine-readable report (JSON).
std::string eval_report_json(const EvalReport& report);
EvalReport parse_eval_report(const std::string& json_text);

/// Fixed-width tables: zones with an overall "Rajasthan Region" row, then
/// categories and stations.
std::string render_eval_table(const EvalReport& report);

/// station_id,date,actual_mm,predicted_mm,category with 2-decimal mm.
void write_prediction_dump(std::ostream& out, std::span<const PredictionRow> rows);

// ---------------------------------------------------------------------------
// Comparison across architectures

struct ComparisonRow {
  std::string model;
  double mae = 0.0;
  double rmse = 0.0;
  bool best_mae = false;
  bool best_rmse = false;
};

struct ComparisonTable {
  std::string split;
  std::vector<ComparisonRow> rows;  // input order

  std::string render() const;
};

/// Side-by-side overall metrics; every row that attains a column minimum is
/// marked. Needs at least two reports over the same split.
ComparisonTable compare(std::span<const EvalReport> reports);

}  // namespace dwrpm

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dwrpm/errors.hpp"
#include "dwrpm/eval.hpp"
#include "support.hpp"

using namespace dwrpm;
using namespace dwrpm::testing;

namespace {

// Two stations in different zones, identity normalization (0..100 mm), three
// rows each, all in one split.
WindowedDataset crafted_dataset(Split split = Split::test) {
  WindowedDataset ds;
  ds.seq_len = 2;
  ds.normalizer = Normalizer(0.0, 100.0);
  ds.stations = {make_station("A", Zone::north_west_desert, 27.0, 72.0),
                 make_station("B", Zone::eastern_plains, 26.5, 76.5)};
  const double targets[] = {0.0, 4.0, 40.0, 1.0, 0.0, 10.0};
  for (std::size_t i = 0; i < 6; ++i) {
    ds.sequences.push_back(1.0);
    ds.sequences.push_back(2.0);
    const Station& st = ds.stations[i / 3];
    ds.coords.push_back(st.latitude);
    ds.coords.push_back(st.longitude);
    ds.targets.push_back(targets[i]);
    ds.station_index.push_back(static_cast<std::uint32_t>(i / 3));
    ds.target_day.push_back((make_date(2016, 7, 1) + std::chrono::days(i % 3)).time_since_epoch().count());
    ds.split.push_back(split);
  }
  return ds;
}

EvalReport published_report(const std::string& model, double mae, double rmse) {
  EvalReport r;
  r.model = model;
  r.split = "test";
  r.overall = {mae, rmse, 140146};
  return r;
}

std::vector<EvalReport> published_results() {
  return {published_report("MLP", 1.3137, 2.7808), published_report("1-DCNN", 0.8406, 2.2894),
          published_report("LSTM", 0.8750, 2.3095), published_report("DWRPM", 0.7765, 2.1716)};
}

}  // namespace

TEST(Metrics, Examples) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  EXPECT_EQ(mae(a, a), 0.0);
  EXPECT_EQ(rmse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{0, 0}, std::vector<double>{0, 3}), 1.5);
  EXPECT_DOUBLE_EQ(rmse(std::vector<double>{0, 0}, std::vector<double>{0, 3}), std::sqrt(4.5));
  EXPECT_NEAR(rmse(std::vector<double>{0, 0}, std::vector<double>{0, 3}), 2.1213, 5e-5);
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{5}, std::vector<double>{2}), 3.0);
  EXPECT_DOUBLE_EQ(rmse(std::vector<double>{3.5, 0.5, 7.5}, std::vector<double>{1, -2, 5}), 2.5);
  EXPECT_THROW(mae(std::vector<double>{}, std::vector<double>{}), ArgumentError);
  EXPECT_THROW(rmse(std::vector<double>{1}, std::vector<double>{}), ArgumentError);
}

TEST(Metrics, RmseDominatesMaeAndPermutationInvariant) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<double> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = 20 * rng.uniform() - 5, t[i] = 20 * rng.uniform();
    const double m = mae(p, t), r = rmse(p, t);
    ASSERT_GE(r + 1e-12, m);
    ASSERT_GE(m, 0.0);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    std::vector<double> pp(n), tt(n);
    for (std::size_t i = 0; i < n; ++i) pp[i] = p[idx[i]], tt[i] = t[idx[i]];
    ASSERT_NEAR(mae(pp, tt), m, 1e-12);
    ASSERT_NEAR(rmse(pp, tt), r, 1e-12);
    std::vector<double> clamped(p);
    for (double& v : clamped) v = std::max(0.0, v);
    ASSERT_LE(mae(clamped, t), m + 1e-12);
  }
}

TEST(Metrics, AccumulatorMergeMatchesSinglePass) {
  Rng rng(2);
  ErrorAccumulator all, left, right;
  std::vector<double> p, t;
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    p.push_back(a), t.push_back(b);
    all.add(a, b);
    (i < 37 ? left : right).add(a, b);
  }
  left.merge(right);
  EXPECT_EQ(left.count(), 100u);
  EXPECT_NEAR(left.result().mae, all.result().mae, 1e-12);
  EXPECT_NEAR(all.result().mae, mae(p, t), 1e-12);
  EXPECT_NEAR(all.result().rmse, rmse(p, t), 1e-12);
  EXPECT_THROW(ErrorAccumulator{}.result(), ArgumentError);
}

TEST(Evaluate, PerfectPredictionsGiveZeroMetrics) {
  const WindowedDataset ds = crafted_dataset();
  const auto rows = ds.rows_in(Split::test);
  const std::vector<double> pred(ds.targets.begin(), ds.targets.end());
  const Evaluation ev = evaluate_predictions(ds, rows, pred, "oracle", Split::test);
  EXPECT_EQ(ev.report.overall.mae, 0.0);
  EXPECT_EQ(ev.report.overall.rmse, 0.0);
  EXPECT_EQ(ev.report.overall.n, 6u);
  for (const auto& [z, m] : ev.report.per_zone) EXPECT_EQ(m.mae, 0.0);
  for (const auto& [s, m] : ev.report.per_station) EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(ev.predictions.size(), rows.size());
}

TEST(Evaluate, ZoneAggregatesAreSampleWeighted) {
  WindowedDataset ds = crafted_dataset();
  // Unbalance the zones: drop one row of station B.
  ds.split[5] = Split::train;
  const auto rows = ds.rows_in(Split::test);
  const std::vector<double> pred{1.0, 1.0, 30.0, 2.0, 3.5};
  const Evaluation ev = evaluate_predictions(ds, rows, pred, "m", Split::test);
  ASSERT_EQ(ev.report.per_zone.size(), 2u);
  double mae_w = 0.0, mse_w = 0.0;
  std::size_t n = 0;
  for (const auto& [z, m] : ev.report.per_zone) {
    mae_w += m.mae * static_cast<double>(m.n);
    mse_w += m.rmse * m.rmse * static_cast<double>(m.n);
    n += m.n;
  }
  EXPECT_EQ(n, ev.report.overall.n);
  EXPECT_NEAR(ev.report.overall.mae, mae_w / static_cast<double>(n), 1e-12);
  EXPECT_NEAR(ev.report.overall.rmse * ev.report.overall.rmse, mse_w / static_cast<double>(n), 1e-12);
  // Hand-computed: |1-0| + |1-4| + |30-40| = 14 over 3; |2-1| + |3.5-0| = 4.5 over 2.
  EXPECT_DOUBLE_EQ(ev.report.per_zone[0].second.mae, 14.0 / 3.0);
  EXPECT_DOUBLE_EQ(ev.report.per_zone[1].second.mae, 2.25);
}

TEST(Evaluate, ClampsAndCategorizesByActual) {
  const WindowedDataset ds = crafted_dataset();
  const auto rows = ds.rows_in(Split::test);
  const std::vector<double> pred{-5.0, 4.0, 40.0, 1.0, -1.0, 10.0};
  const Evaluation ev = evaluate_predictions(ds, rows, pred, "m", Split::test);
  EXPECT_EQ(ev.report.overall.mae, 0.0);
  EXPECT_EQ(ev.predictions[0].predicted_mm, 0.0);
  EXPECT_EQ(ev.predictions[2].category, ImdCategory::rather_heavy);
  std::size_t n = 0;
  for (const auto& [c, m] : ev.report.per_category) n += m.n;
  EXPECT_EQ(n, 6u);
  EXPECT_EQ(ev.report.per_category.front().first, ImdCategory::no_rain);
  EXPECT_EQ(ev.report.per_category.front().second.n, 2u);
}

TEST(Evaluate, RejectsEmptySplitAndUnknownStation) {
  WindowedDataset ds = crafted_dataset(Split::train);
  Rng rng(3);
  ArchitectureOptions o = miniatures()[1].options;
  const ModelGraph m = build_mlp_baseline(2, rng, o);
  EXPECT_THROW(evaluate(m, ds, Split::test), ArgumentError);
  ds.station_index[0] = 9;
  const std::size_t rows[] = {0};
  const double pred[] = {0.0};
  EXPECT_THROW(evaluate_predictions(ds, rows, pred, "m", Split::train), FormatError);
}

TEST(Evaluate, ModelPathMatchesManualPrediction) {
  const WindowedDataset ds = crafted_dataset();
  Rng rng(4);
  const ModelGraph m = build_mlp_baseline(2, rng, miniatures()[1].options);
  const Evaluation ev = evaluate(m, ds, Split::test);
  const auto rows = ds.rows_in(Split::test);
  const auto b = ds.batch(rows);
  const Tensor y = m.predict(b.x, b.coords);
  for (std::size_t i = 0; i < rows.size(); ++i)
    EXPECT_DOUBLE_EQ(ev.predictions[i].predicted_mm, std::max(0.0, ds.normalizer.denormalize(y[i])));
  EXPECT_EQ(ev.report.model, "mlp");
  EXPECT_EQ(ev.report.split, "test");
}

TEST(Climatology, DayOfYearMeanOfTrainRows) {
  WindowedDataset ds = crafted_dataset(Split::train);
  // Days 0,1,2 after July 1 for each station: (0,1), (4,0), (40,10).
  const ClimatologyPredictor c(ds);
  EXPECT_DOUBLE_EQ(c.predict(make_date(2016, 7, 1)), 0.5);
  EXPECT_DOUBLE_EQ(c.predict(make_date(2016, 7, 2)), 2.0);
  EXPECT_DOUBLE_EQ(c.predict(make_date(2016, 7, 3)), 25.0);
  // Unseen days fall back to the overall train mean.
  EXPECT_DOUBLE_EQ(c.predict(make_date(2016, 1, 1)), 55.0 / 6.0);
  for (auto& s : ds.split) s = Split::test;
  EXPECT_THROW(ClimatologyPredictor{ds}, ArgumentError);
}

TEST(Reports, JsonRoundTripAndTable) {
  const WindowedDataset ds = crafted_dataset();
  const auto rows = ds.rows_in(Split::test);
  const std::vector<double> pred{1.0, 1.0, 30.0, 2.0, 3.5, 12.0};
  Evaluation ev = evaluate_predictions(ds, rows, pred, "dwrpm", Split::test);
  ev.report.predictions_file = "predictions.csv";
  const EvalReport back = parse_eval_report(eval_report_json(ev.report));
  EXPECT_EQ(back.model, "dwrpm");
  EXPECT_EQ(back.split, "test");
  EXPECT_EQ(back.overall.mae, ev.report.overall.mae);
  EXPECT_EQ(back.overall.n, 6u);
  EXPECT_EQ(back.per_zone.size(), ev.report.per_zone.size());
  EXPECT_EQ(back.per_station.size(), 2u);
  EXPECT_EQ(back.per_category.size(), ev.report.per_category.size());
  EXPECT_EQ(back.predictions_file, "predictions.csv");
  EXPECT_EQ(eval_report_json(back), eval_report_json(ev.report));

  const std::string table = render_eval_table(ev.report);
  for (Zone z : kAllZones) EXPECT_NE(table.find(zone_label(z)), std::string::npos) << zone_label(z);
  EXPECT_NE(table.find("Rajasthan Region"), std::string::npos);

  EXPECT_THROW(parse_eval_report("{"), FormatError);
  EXPECT_THROW(parse_eval_report("{\"model\": \"x\"}"), FormatError);
}

TEST(Reports, PredictionDump) {
  const WindowedDataset ds = crafted_dataset();
  const auto rows = ds.rows_in(Split::test);
  const std::vector<double> pred{1.0 / 3.0, 1.0, 30.0, 2.0, 3.5, 12.0};
  const Evaluation ev = evaluate_predictions(ds, rows, pred, "m", Split::test);
  std::ostringstream out;
  write_prediction_dump(out, ev.predictions);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "station_id,date,actual_mm,predicted_mm,category");
  std::getline(in, line);
  EXPECT_EQ(line, "A,2016-07-01,0.00,0.33,no_rain");
  std::size_t n = 1;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, rows.size());
}

TEST(Compare, PublishedTableMarksDeepAndWideBest) {
  const auto reports = published_results();
  const ComparisonTable t = compare(reports);
  ASSERT_EQ(t.rows.size(), 4u);
  for (const auto& r : t.rows) {
    EXPECT_EQ(r.best_mae, r.model == "DWRPM") << r.model;
    EXPECT_EQ(r.best_rmse, r.model == "DWRPM") << r.model;
  }
  const std::string text = t.render();
  EXPECT_NE(text.find("0.7765*"), std::string::npos) << text;
  EXPECT_NE(text.find("2.1716*"), std::string::npos) << text;
  EXPECT_NE(text.find("1.3137 "), std::string::npos) << text;

  // The fixture survives the JSON round trip used by the command line.
  std::vector<EvalReport> parsed;
  for (const auto& r : reports) parsed.push_back(parse_eval_report(eval_report_json(r)));
  EXPECT_EQ(compare(parsed).render(), text);
}

TEST(Compare, TiesOrderAndErrors) {
  const auto a = published_report("a", 1.0, 2.0), b = published_report("b", 1.0, 2.0);
  const EvalReport pair[] = {a, b};
  const ComparisonTable t = compare(pair);
  EXPECT_TRUE(t.rows[0].best_mae && t.rows[1].best_mae);
  EXPECT_TRUE(t.rows[0].best_rmse && t.rows[1].best_rmse);

  auto reports = published_results();
  std::reverse(reports.begin(), reports.end());
  for (const auto& r : compare(reports).rows) EXPECT_EQ(r.best_mae, r.model == "DWRPM");

  EXPECT_THROW(compare(std::span<const EvalReport>(pair, 1)), ArgumentError);
  EvalReport val = b;
  val.split = "val";
  const EvalReport mixed[] = {a, val};
  EXPECT_THROW(compare(mixed), ArgumentError);
}

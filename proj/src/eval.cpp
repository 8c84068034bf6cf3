#include "dwrpm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "dwrpm/errors.hpp"

namespace dwrpm {
namespace {

void check_pairs(std::span<const double> pred, std::span<const double> actual, const char* what) {
  if (pred.size() != actual.size())
    throw ArgumentError(std::string(what) + ": " + std::to_string(pred.size()) +
                        " predictions vs " + std::to_string(actual.size()) + " actual values");
  if (pred.empty()) throw ArgumentError(std::string(what) + ": no samples");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::ordered_json metric_json(const MetricPair& m) {
  return {{"mae", m.mae}, {"rmse", m.rmse}, {"n", m.n}};
}

MetricPair metric_from_json(const nlohmann::json& j) {
  MetricPair m;
  m.mae = j.at("mae").get<double>();
  m.rmse = j.at("rmse").get<double>();
  m.n = j.value("n", std::size_t{0});
  return m;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> actual) {
  check_pairs(pred, actual, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - actual[i]);
  return sum / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> actual) {
  check_pairs(pred, actual, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

void ErrorAccumulator::add(double pred, double actual) {
  const double d = pred - actual;
  abs_sum_ += std::abs(d);
  sq_sum_ += d * d;
  ++n_;
}

void ErrorAccumulator::merge(const ErrorAccumulator& other) {
  abs_sum_ += other.abs_sum_;
  sq_sum_ += other.sq_sum_;
  n_ += other.n_;
}

MetricPair ErrorAccumulator::result() const {
  if (n_ == 0) throw ArgumentError("no samples to score");
  const double n = static_cast<double>(n_);
  return {abs_sum_ / n, std::sqrt(sq_sum_ / n), n_};
}

std::vector<double> predict_rows(const ModelGraph& model, const WindowedDataset& data,
                                 std::span<const std::size_t> rows, std::size_t batch_size) {
  if (data.seq_len != model.seq_len())
    throw ArgumentError("dataset seq_len " + std::to_string(data.seq_len) +
                        " does not match model seq_len " + std::to_string(model.seq_len()));
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t begin = 0; begin < rows.size(); begin += batch_size) {
    const std::size_t end = std::min(rows.size(), begin + batch_size);
    const auto batch = data.batch(rows.subspan(begin, end - begin));
    const Tensor y = model.predict(batch.x, batch.coords);
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return out;
}

Evaluation evaluate_predictions(const WindowedDataset& data, std::span<const std::size_t> rows,
                                std::span<const double> predicted_mm, const std::string& model,
                                Split split) {
  if (rows.size() != predicted_mm.size())
    throw ArgumentError("evaluate: " + std::to_string(predicted_mm.size()) +
                        " predictions for " + std::to_string(rows.size()) + " rows");
  if (rows.empty()) throw ArgumentError("evaluate: split " + to_string(split) + " is empty");

  Evaluation ev;
  ev.report.model = model;
  ev.report.split = to_string(split);
  ErrorAccumulator overall;
  std::array<ErrorAccumulator, 4> zones;
  std::array<ErrorAccumulator, 7> categories;
  std::map<std::string, ErrorAccumulator> stations;

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (data.station_index[r] >= data.stations.size())
      throw FormatError("row " + std::to_string(r) + " refers to an unknown station");
    const Station& st = data.station_of(r);
    const double actual = std::max(0.0, data.normalizer.denormalize(data.targets[r]));
    const double pred = std::max(0.0, predicted_mm[i]);
    const ImdCategory cat = categorize(actual);
    overall.add(pred, actual);
    zones[static_cast<std::size_t>(st.zone)].add(pred, actual);
    categories[static_cast<std::size_t>(cat)].add(pred, actual);
    stations[st.id].add(pred, actual);
    ev.predictions.push_back({st.id, data.target_date(r), actual, pred, cat});
  }

  ev.report.overall = overall.result();
  for (Zone z : kAllZones)
    if (zones[static_cast<std::size_t>(z)].count() > 0)
      ev.report.per_zone.emplace_back(z, zones[static_cast<std::size_t>(z)].result());
  for (ImdCategory c : kAllCategories)
    if (categories[static_cast<std::size_t>(c)].count() > 0)
      ev.report.per_category.emplace_back(c, categories[static_cast<std::size_t>(c)].result());
  for (const auto& [id, acc] : stations) ev.report.per_station.emplace_back(id, acc.result());
  return ev;
}

Evaluation evaluate(const ModelGraph& model, const WindowedDataset& data, Split split) {
  const std::vector<std::size_t> rows = data.rows_in(split);
  if (rows.empty()) throw ArgumentError("evaluate: split " + to_string(split) + " is empty");
  std::vector<double> pred = predict_rows(model, data, rows);
  for (double& p : pred) p = data.normalizer.denormalize(p);
  return evaluate_predictions(data, rows, pred, to_string(model.architecture()), split);
}

ClimatologyPredictor::ClimatologyPredictor(const WindowedDataset& data) : by_day_(367, 0.0) {
  std::vector<double> sum(367, 0.0);
  std::vector<std::size_t> count(367, 0);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data.split[r] != Split::train) continue;
    const double mm = std::max(0.0, data.normalizer.denormalize(data.targets[r]));
    const unsigned doy = day_of_year(data.target_date(r));
    sum[doy] += mm;
    ++count[doy];
    total += mm;
    ++n;
  }
  if (n == 0) throw ArgumentError("climatology needs training rows");
  for (unsigned d = 1; d <= 366; ++d)
    by_day_[d] = count[d] > 0 ? sum[d] / static_cast<double>(count[d]) : total / static_cast<double>(n);
  // Day 366 only occurs in leap years; fall back to day 365 when it was never seen.
  if (count[366] == 0) by_day_[366] = by_day_[365];
}

double ClimatologyPredictor::predict(Date date) const { return by_day_[day_of_year(date)]; }

// ---------------------------------------------------------------------------

std::string eval_report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["format"] = "dwrpm-eval-report";
  j["version"] = 1;
  j["model"] = report.model;
  j["split"] = report.split;
  j["units"] = "mm";
  j["overall"] = metric_json(report.overall);
  j["zones"] = nlohmann::ordered_json::array();
  for (const auto& [zone, m] : report.per_zone) {
    auto z = metric_json(m);
    z["zone"] = zone_token(zone);
    j["zones"].push_back(z);
  }
  j["categories"] = nlohmann::ordered_json::array();
  for (const auto& [cat, m] : report.per_category) {
    auto c = metric_json(m);
    c["category"] = to_string(cat);
    j["categories"].push_back(c);
  }
  j["stations"] = nlohmann::ordered_json::array();
  for (const auto& [id, m] : report.per_station) {
    auto s = metric_json(m);
    s["station_id"] = id;
    j["stations"].push_back(s);
  }
  if (!report.predictions_file.empty()) j["predictions"] = report.predictions_file;
  return j.dump(2) + "\n";
}

EvalReport parse_eval_report(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("eval report is not valid JSON: ") + e.what());
  }
  try {
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.split = j.value("split", std::string("test"));
    r.overall = metric_from_json(j.at("overall"));
    for (const auto& z : j.value("zones", nlohmann::json::array()))
      r.per_zone.emplace_back(parse_zone(z.at("zone").get<std::string>()), metric_from_json(z));
    for (const auto& c : j.value("categories", nlohmann::json::array())) {
      const std::string name = c.at("category").get<std::string>();
      for (ImdCategory cat : kAllCategories)
        if (to_string(cat) == name) r.per_category.emplace_back(cat, metric_from_json(c));
    }
    for (const auto& s : j.value("stations", nlohmann::json::array()))
      r.per_station.emplace_back(s.at("station_id").get<std::string>(), metric_from_json(s));
    r.predictions_file = j.value("predictions", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("eval report is missing fields: ") + e.what());
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
}

std::string render_eval_table(const EvalReport& report) {
  std::ostringstream os;
  char line[160];
  auto row = [&](const std::string& name, const MetricPair& m) {
    std::snprintf(line, sizeof line, "%-32s %10s %10s %10zu\n", name.c_str(),
                  fixed(m.mae, 4).c_str(), fixed(m.rmse, 4).c_str(), m.n);
    os << line;
  };
  auto header = [&](const char* first) {
    std::snprintf(line, sizeof line, "%-32s %10s %10s %10s\n", first, "MAE", "RMSE", "N");
    os << line << std::string(65, '-') << "\n";
  };

  os << "Model: " << report.model << "    Split: " << report.split << "    Units: mm\n\n";
  header("Zone Name");
  for (Zone zone : kAllZones) {
    const auto it = std::find_if(report.per_zone.begin(), report.per_zone.end(),
                                 [&](const auto& z) { return z.first == zone; });
    if (it != report.per_zone.end()) {
      row(zone_label(zone), it->second);
    } else {
      std::snprintf(line, sizeof line, "%-32s %10s %10s %10d\n", zone_label(zone).c_str(), "-", "-", 0);
      os << line;
    }
  }
  row("Rajasthan Region", report.overall);
  os << "\n";
  header("IMD Category");
  for (const auto& [cat, m] : report.per_category) row(to_string(cat), m);
  os << "\n";
  header("Station");
  for (const auto& [id, m] : report.per_station) row(id, m);
  return os.str();
}

void write_prediction_dump(std::ostream& out, std::span<const PredictionRow> rows) {
  out << "station_id,date,actual_mm,predicted_mm,category\n";
  for (const PredictionRow& p : rows)
    out << p.station_id << ',' << format_iso_date(p.date) << ',' << fixed(p.actual_mm, 2) << ','
        << fixed(p.predicted_mm, 2) << ',' << to_string(p.category) << "\n";
}

// ---------------------------------------------------------------------------

ComparisonTable compare(std::span<const EvalReport> reports) {
  if (reports.size() < 2) throw ArgumentError("compare needs at least two reports");
  ComparisonTable table;
  table.split = reports.front().split;
  double best_mae = reports.front().overall.mae, best_rmse = reports.front().overall.rmse;
  for (const EvalReport& r : reports) {
    if (r.split != table.split)
      throw ArgumentError("compare: report '" + r.model + "' is on split " + r.split +
                          ", expected " + table.split);
    best_mae = std::min(best_mae, r.overall.mae);
    best_rmse = std::min(best_rmse, r.overall.rmse);
  }
  for (const EvalReport& r : reports)
    table.rows.push_back({r.model, r.overall.mae, r.overall.rmse, r.overall.mae == best_mae,
                          r.overall.rmse == best_rmse});
  return table;
}

std::string ComparisonTable::render() const {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-16s %12s %12s\n", "Method", "MAE", "RMSE");
  os << "Split: " << split << "    Units: mm    (* = best)\n" << line << std::string(42, '-')
     << "\n";
  for (const ComparisonRow& r : rows) {
    const std::string m = fixed(r.mae, 4) + (r.best_mae ? "*" : " ");
    const std::string s = fixed(r.rmse, 4) + (r.best_rmse ? "*" : " ");
    std::snprintf(line, sizeof line, "%-16s %12s %12s\n", r.model.c_str(), m.c_str(), s.c_str());
    os << line;
  }
  return os.str();
}

}  // namespace dwrpm

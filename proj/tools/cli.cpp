#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>

#include "CLI11.hpp"

#include "dwrpm/checkpoint.hpp"
#include "dwrpm/errors.hpp"
#include "dwrpm/eval.hpp"

namespace dwrpm::cli {
namespace {

namespace fs = std::filesystem;

std::pair<int, int> parse_year_range(const std::string& text, const char* flag) {
  const auto dash = text.find('-');
  int a = 0, b = 0;
  auto ok = [](std::string_view s, int& v) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc{} && r.ptr == s.data() + s.size();
  };
  if (dash == std::string::npos || !ok(std::string_view(text).substr(0, dash), a) ||
      !ok(std::string_view(text).substr(dash + 1), b))
    throw ArgumentError(std::string(flag) + " expects FIRST-LAST, got '" + text + "'");
  return {a, b};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  return cfg.out;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Flags shared by several subcommands.
struct YearFlags {
  std::string train, val, test;

  void add(CLI::App* app) {
    app->add_option("--train-years", train, "Train split target years, FIRST-LAST");
    app->add_option("--val-years", val, "Validation split target years, FIRST-LAST");
    app->add_option("--test-years", test, "Test split target years, FIRST-LAST");
  }
  void apply(SplitYears& y) const {
    if (!train.empty()) std::tie(y.train_first, y.train_last) = parse_year_range(train, "--train-years");
    if (!val.empty()) std::tie(y.val_first, y.val_last) = parse_year_range(val, "--val-years");
    if (!test.empty()) std::tie(y.test_first, y.test_last) = parse_year_range(test, "--test-years");
    y.validate();
  }
};

struct LayerFlags {
  std::vector<std::size_t> hidden;
  std::optional<std::size_t> filters, kernel_len, pool_window, lstm_units;
  std::optional<double> dropout;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "Dense widths, e.g. 300,200,100,50")->delimiter(',');
    app->add_option("--filters", filters, "Convolution filters");
    app->add_option("--kernel-len", kernel_len, "Convolution kernel length");
    app->add_option("--pool-window", pool_window, "Max-pool window (cnn)");
    app->add_option("--lstm-units", lstm_units, "LSTM hidden size");
    app->add_option("--dropout", dropout, "Dropout rate");
  }
  ArchitectureOptions resolve(Architecture arch) const {
    ArchitectureOptions o = ArchitectureOptions::defaults(arch);
    if (!hidden.empty()) o.hidden = hidden;
    if (filters) o.filters = *filters;
    if (kernel_len) o.kernel_len = *kernel_len;
    if (pool_window) o.pool_window = *pool_window;
    if (lstm_units) o.lstm_units = *lstm_units;
    if (dropout) o.dropout = *dropout;
    return o;
  }
};

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

/// Replaces `--config FILE` after a subcommand with that file's settings as
/// `--key=value` arguments, skipping keys also given on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty() || rest.empty()) return args;
  if (!fs::exists(path)) throw CLI::FileError::Missing(path);

  const std::string sub = rest.front();
  std::vector<std::string> from_file;
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_file(path)) {
    if (!item.parents.empty() && item.parents.front() != sub) continue;
    const std::string flag = "--" + item.name;
    if (given_on_command_line(rest, flag)) continue;
    std::string value;
    for (const std::string& v : item.inputs) value += (value.empty() ? "" : ",") + v;
    from_file.push_back(flag + "=" + value);
  }
  rest.insert(rest.begin() + 1, from_file.begin(), from_file.end());
  return rest;
}

// ---------------------------------------------------------------------------

int cmd_synth(std::size_t n_stations, std::size_t years, int start_year, const RunConfig& cfg,
              std::ostream& out) {
  const SyntheticData data = synth_generate(n_stations, years, cfg.seed, start_year);
  const fs::path dir = prepare_out(cfg);
  {
    std::ofstream f(dir / "stations.csv", std::ios::binary | std::ios::trunc);
    write_stations(f, data.stations);
    if (!f) throw std::runtime_error("cannot write " + (dir / "stations.csv").string());
  }
  {
    std::ofstream f(dir / "records.csv", std::ios::binary | std::ios::trunc);
    write_records(f, data.series);
    if (!f) throw std::runtime_error("cannot write " + (dir / "records.csv").string());
  }
  std::size_t days = 0;
  for (const RainSeries& s : data.series) days += s.values.size();
  out << "wrote " << data.stations.size() << " stations and " << days << " daily records to "
      << dir.string() << "\n";
  return kOk;
}

int cmd_ingest(const RunConfig& cfg, bool allow_outside, std::ostream& out) {
  const IngestResult ingested = ingest(cfg.records, cfg.stations, allow_outside);
  DatasetBuildSummary summary;
  const WindowedDataset ds = build_dataset(ingested, cfg.seq_len, cfg.years, &summary);
  const fs::path dir = prepare_out(cfg);
  save_dataset(dir / "dataset.bin", ds);

  std::ostringstream rep;
  rep << ingested.report.render() << "\n";
  rep << "Windows (seq_len " << cfg.seq_len << "): " << summary.windows << "\n";
  rep << "  train " << summary.per_split[0] << "  val " << summary.per_split[1] << "  test "
      << summary.per_split[2] << "  excluded " << summary.excluded << "\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "Normalizer: x_min %.4f mm, x_max %.4f mm\n", ds.normalizer.x_min(),
                ds.normalizer.x_max());
  rep << buf;
  write_text(dir / "cleaning_report.txt", rep.str());
  out << rep.str();
  return kOk;
}

int cmd_train(const RunConfig& cfg, const LayerFlags& layers, bool seq_len_given,
              std::ostream& out, std::ostream& err) {
  const WindowedDataset ds = load_dataset(cfg.dataset);
  if (seq_len_given && ds.seq_len != cfg.seq_len)
    throw ArgumentError("--seq-len " + std::to_string(cfg.seq_len) + " does not match dataset seq_len " +
                        std::to_string(ds.seq_len));
  const Architecture arch = parse_architecture(cfg.arch);
  Rng init(cfg.seed, 1);
  ModelGraph model = build_model(arch, ds.seq_len, init, layers.resolve(arch));
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const TrainReport report = train(model, ds, tc, &err);

  const fs::path dir = prepare_out(cfg);
  save_checkpoint(dir / "checkpoint.bin", model, ds.normalizer, cfg.seed);
  write_text(dir / "train_report.json", report.to_json());
  write_text(dir / "timing.json", report.timing_json());
  out << "trained " << report.architecture << " (" << report.parameter_count << " parameters) for "
      << report.epochs.size() << " epochs";
  if (report.best_val_rmse)
    out << "; best epoch " << report.best_epoch << " val MAE " << *report.best_val_mae
        << " RMSE " << *report.best_val_rmse << " mm";
  out << "\n";
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  const WindowedDataset ds = load_dataset(cfg.dataset);
  if (ds.seq_len != ck.model.seq_len())
    throw std::runtime_error("checkpoint expects seq_len " + std::to_string(ck.model.seq_len()) +
                             " but dataset has " + std::to_string(ds.seq_len));
  if (ds.normalizer.x_min() != ck.normalizer.x_min() || ds.normalizer.x_max() != ck.normalizer.x_max())
    throw std::runtime_error("checkpoint and dataset were normalized with different constants");
  const Split split = parse_split(cfg.split);
  Evaluation ev = evaluate(ck.model, ds, split);

  const fs::path dir = prepare_out(cfg);
  ev.report.predictions_file = "predictions.csv";
  {
    std::ofstream f(dir / "predictions.csv", std::ios::binary | std::ios::trunc);
    write_prediction_dump(f, ev.predictions);
    if (!f) throw std::runtime_error("cannot write " + (dir / "predictions.csv").string());
  }
  write_text(dir / "eval_report.json", eval_report_json(ev.report));
  const std::string table = render_eval_table(ev.report);
  write_text(dir / "eval_table.txt", table);
  out << table;
  return kOk;
}

int cmd_predict(const RunConfig& cfg, bool allow_outside, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  const IngestResult ingested = ingest(cfg.records, cfg.stations, allow_outside);
  const std::size_t L = ck.model.seq_len();

  std::vector<double> seq, coords;
  std::vector<std::pair<std::string, Date>> keys;
  for (std::size_t s = 0; s < ingested.series.size(); ++s) {
    const RainSeries& series = ingested.series[s];
    const Station& st = *std::find_if(ingested.stations.begin(), ingested.stations.end(),
                                      [&](const Station& x) { return x.id == series.station_id; });
    if (series.values.size() < L) {
      err << "skipping " << st.id << ": fewer than " << L << " days of history\n";
      continue;
    }
    const std::size_t first = series.values.size() - L;
    bool complete = true;
    for (std::size_t i = first; i < series.values.size(); ++i) complete = complete && series.values[i].has_value();
    if (!complete) {
      err << "skipping " << st.id << ": missing days in the last " << L << "\n";
      continue;
    }
    for (std::size_t i = first; i < series.values.size(); ++i)
      seq.push_back(ck.normalizer.normalize(*series.values[i]));
    coords.push_back(st.latitude);
    coords.push_back(st.longitude);
    keys.emplace_back(st.id, series.date_at(series.values.size() - 1) + std::chrono::days(1));
  }
  if (keys.empty()) throw std::runtime_error("no station has a complete history to forecast from");

  const Tensor y = ck.model.predict(Tensor::from_data({keys.size(), L}, std::move(seq)),
                                    Tensor::from_data({keys.size(), 2}, std::move(coords)));
  std::ostringstream csv;
  csv << "station_id,date,predicted_mm,category\n";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const double mm = std::max(0.0, ck.normalizer.denormalize(y[i]));
    csv << keys[i].first << ',' << format_iso_date(keys[i].second) << ',' << fixed2(mm) << ','
        << to_string(categorize(mm)) << "\n";
  }
  const fs::path dir = prepare_out(cfg);
  write_text(dir / "forecast.csv", csv.str());
  out << csv.str();
  return kOk;
}

int cmd_compare(const std::vector<std::string>& paths, const RunConfig& cfg, bool write_file,
                std::ostream& out) {
  std::vector<EvalReport> reports;
  for (const std::string& p : paths) {
    try {
      reports.push_back(parse_eval_report(read_text(p)));
    } catch (const FormatError& e) {
      throw FormatError(p + ": " + e.what());
    }
  }
  const std::string table = compare(reports).render();
  if (write_file) write_text(prepare_out(cfg) / "comparison.txt", table);
  out << table;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Daily rainfall forecasting with a deep & wide network and baselines", "dwrpm"};
  app.require_subcommand(1);

  RunConfig cfg;
  YearFlags years;
  LayerFlags layers;
  bool allow_outside = false;
  std::size_t synth_stations = 20, synth_years = 10;
  int synth_start = 2008;
  std::vector<std::string> report_paths;

  std::string config_path;  // consumed by expand_config() before parsing
  auto config_flag = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "Flat key=value file; command-line flags take precedence");
  };
  auto out_flag = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic monsoon dataset");
  config_flag(synth);
  synth->add_option("--stations", synth_stations, "Number of gauges")->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->add_option("--years", synth_years, "Calendar years")->capture_default_str()
      ->check(CLI::Range(2, 1000));
  synth->add_option("--start-year", synth_start, "First calendar year")->capture_default_str();
  synth->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  out_flag(synth);

  CLI::App* ing = app.add_subcommand("ingest", "Clean gauge records and build the windowed dataset");
  config_flag(ing);
  ing->add_option("--records", cfg.records, "Records CSV")->required()->check(CLI::ExistingFile);
  ing->add_option("--stations", cfg.stations, "Stations CSV")->required()->check(CLI::ExistingFile);
  ing->add_option("--seq-len", cfg.seq_len, "History length in days")->capture_default_str()
      ->check(CLI::PositiveNumber);
  years.add(ing);
  ing->add_flag("--allow-outside-region", allow_outside, "Accept stations outside the region box");
  out_flag(ing);

  CLI::App* tr = app.add_subcommand("train", "Train a model on a dataset cache");
  config_flag(tr);
  tr->add_option("--dataset", cfg.dataset, "Dataset cache from ingest")->required()
      ->check(CLI::ExistingFile);
  tr->add_option("--arch", cfg.arch, "dwrpm, mlp, cnn or lstm")->capture_default_str()
      ->check(CLI::IsMember({"dwrpm", "mlp", "cnn", "lstm"}));
  CLI::Option* seq_opt = tr->add_option("--seq-len", cfg.seq_len, "Expected history length");
  tr->add_option("--epochs", cfg.train.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--batch-size", cfg.train.batch_size, "Mini-batch size")->capture_default_str()
      ->check(CLI::PositiveNumber);
  tr->add_option("--lr", cfg.train.adam.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--beta1", cfg.train.adam.beta1, "Adam beta1")->capture_default_str();
  tr->add_option("--beta2", cfg.train.adam.beta2, "Adam beta2")->capture_default_str();
  tr->add_option("--epsilon", cfg.train.adam.epsilon, "Adam epsilon")->capture_default_str();
  tr->add_option("--patience", cfg.train.patience, "Early-stopping patience, 0 = off")->capture_default_str();
  tr->add_option("--clip-norm", cfg.train.clip_norm, "Gradient norm clip, 0 = off")->capture_default_str();
  tr->add_option("--shuffle", cfg.train.shuffle, "Shuffle rows each epoch")->capture_default_str();
  tr->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  layers.add(tr);
  out_flag(tr);

  CLI::App* ev = app.add_subcommand("evaluate", "Score a checkpoint on a dataset split");
  config_flag(ev);
  ev->add_option("--checkpoint", cfg.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--dataset", cfg.dataset, "Dataset cache")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", cfg.split, "train, val or test")->capture_default_str()
      ->check(CLI::IsMember({"train", "val", "test"}));
  out_flag(ev);

  CLI::App* pr = app.add_subcommand("predict", "Forecast the next day for every station");
  config_flag(pr);
  pr->add_option("--checkpoint", cfg.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  pr->add_option("--records", cfg.records, "Records CSV")->required()->check(CLI::ExistingFile);
  pr->add_option("--stations", cfg.stations, "Stations CSV")->required()->check(CLI::ExistingFile);
  pr->add_flag("--allow-outside-region", allow_outside, "Accept stations outside the region box");
  out_flag(pr);

  CLI::App* cmp = app.add_subcommand("compare", "Compare evaluation reports side by side");
  cmp->add_option("reports", report_paths, "eval_report.json files")->required()->expected(2, -1)
      ->check(CLI::ExistingFile);
  CLI::Option* cmp_out = cmp->add_option("--out", cfg.out, "Also write comparison.txt here");

  try {
    const std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (const auto subs = app.get_subcommands(); !subs.empty())
      err << "run 'dwrpm " << subs.front()->get_name() << " --help' for usage\n";
    return kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_stations, synth_years, synth_start, cfg, out);
    years.apply(cfg.years);
    if (ing->parsed()) return cmd_ingest(cfg, allow_outside, out);
    if (tr->parsed()) {
      cfg.train.validate();
      return cmd_train(cfg, layers, seq_opt->count() > 0, out, err);
    }
    if (ev->parsed()) return cmd_evaluate(cfg, out);
    if (pr->parsed()) return cmd_predict(cfg, allow_outside, out, err);
    if (cmp->parsed()) return cmd_compare(report_paths, cfg, cmp_out->count() > 0, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace dwrpm::cli

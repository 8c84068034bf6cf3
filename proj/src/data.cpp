#include "dwrpm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "dwrpm/binary_io.hpp"
#include "dwrpm/errors.hpp"
#include "dwrpm/rng.hpp"

namespace dwrpm {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view token) {
  if (token.empty()) return std::nullopt;
  if (token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

void expect_header(std::istream& in, std::string_view expected, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(std::string(what) + " file is empty");
  if (trim(line) != expected)
    throw FormatError(std::string(what) + " file: line 1: expected header '" +
                      std::string(expected) + "', got '" + std::string(trim(line)) + "'");
}

std::string fmt_mm(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stations

std::string zone_token(Zone zone) {
  switch (zone) {
    case Zone::north_west_desert: return "NorthWestDesert";
    case Zone::central_aravalli_hill: return "CentralAravalliHill";
    case Zone::eastern_plains: return "EasternPlains";
    case Zone::south_eastern_plateau: return "SouthEasternPlateau";
  }
  return "";
}

std::string zone_label(Zone zone) {
  switch (zone) {
    case Zone::north_west_desert: return "North-West Desert Region";
    case Zone::central_aravalli_hill: return "Central Aravalli Hill Region";
    case Zone::eastern_plains: return "Eastern Plains";
    case Zone::south_eastern_plateau: return "South-Eastern Plateau Region";
  }
  return "";
}

Zone parse_zone(std::string_view token) {
  for (Zone z : kAllZones)
    if (token == zone_token(z)) return z;
  throw ArgumentError("unknown zone '" + std::string(token) + "'");
}

bool Station::within_region() const {
  return latitude >= kMinLatitude && latitude <= kMaxLatitude && longitude >= kMinLongitude &&
         longitude <= kMaxLongitude;
}

std::size_t RainSeries::missing_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](const auto& v) { return !v.has_value(); }));
}

std::vector<Station> read_stations(std::istream& in, bool allow_outside_region) {
  expect_header(in, "station_id,name,district,zone,latitude,longitude", "stations");
  std::vector<Station> stations;
  std::string line;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    const std::string where = "stations file: line " + std::to_string(lineno) + ": ";
    if (f.size() != 6)
      throw FormatError(where + "expected 6 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw FormatError(where + "empty station id");
    Station s;
    s.id = f[0];
    s.name = f[1];
    s.district = f[2];
    try {
      s.zone = parse_zone(f[3]);
    } catch (const ArgumentError& e) {
      throw FormatError(where + e.what());
    }
    const auto lat = parse_number(f[4]);
    const auto lon = parse_number(f[5]);
    if (!lat || !lon) throw FormatError(where + "latitude/longitude must be decimal degrees");
    s.latitude = *lat;
    s.longitude = *lon;
    if (!allow_outside_region && !s.within_region())
      throw FormatError(where + "coordinates (" + std::string(f[4]) + ", " + std::string(f[5]) +
                        ") outside the Rajasthan box");
    stations.push_back(std::move(s));
  }
  std::sort(stations.begin(), stations.end(),
            [](const Station& a, const Station& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < stations.size(); ++i)
    if (stations[i].id == stations[i - 1].id)
      throw FormatError("stations file: duplicate station id '" + stations[i].id + "'");
  return stations;
}

// ---------------------------------------------------------------------------
// Records

IngestResult ingest(std::istream& records, std::istream& stations_in, bool allow_outside_region) {
  IngestResult result;
  result.stations = read_stations(stations_in, allow_outside_region);
  std::unordered_map<std::string, std::size_t> known;
  for (std::size_t i = 0; i < result.stations.size(); ++i) known[result.stations[i].id] = i;

  struct Cell {
    std::optional<double> value;
    std::size_t line;
  };
  std::vector<std::map<int, Cell>> days(result.stations.size());
  CleaningReport& report = result.report;

  expect_header(records, "station_id,date,rainfall_mm", "records");
  std::string line;
  for (std::size_t lineno = 2; std::getline(records, line); ++lineno) {
    if (trim(line).empty()) continue;
    ++report.rows_read;
    const auto f = split_fields(line);
    if (f.size() != 3) {
      report.skipped_rows.push_back({lineno, "expected 3 fields, got " + std::to_string(f.size())});
      continue;
    }
    const auto it = known.find(std::string(f[0]));
    if (it == known.end()) {
      report.skipped_rows.push_back({lineno, "unknown station id '" + std::string(f[0]) + "'"});
      continue;
    }
    const auto date = parse_iso_date(f[1]);
    if (!date) {
      report.skipped_rows.push_back({lineno, "unparseable date '" + std::string(f[1]) + "'"});
      continue;
    }
    std::optional<double> value = parse_number(f[2]);
    if (value && *value < 0.0) {
      report.skipped_rows.push_back({lineno, "negative rainfall " + std::string(f[2])});
      continue;
    }
    if (!value)
      report.missing_cells.push_back(
          {lineno, "non-numeric rainfall '" + std::string(f[2]) + "' treated as missing"});

    const int key = date->time_since_epoch().count();
    auto& station_days = days[it->second];
    const auto [slot, inserted] = station_days.try_emplace(key, Cell{value, lineno});
    if (!inserted) {
      report.duplicate_rows.push_back({lineno, "station " + std::string(f[0]) + " date " +
                                                   std::string(f[1]) + " replaces line " +
                                                   std::to_string(slot->second.line)});
      slot->second = Cell{value, lineno};
    }
    ++report.rows_accepted;
  }

  for (std::size_t i = 0; i < result.stations.size(); ++i) {
    if (days[i].empty()) continue;
    RainSeries series;
    series.station_id = result.stations[i].id;
    const int first = days[i].begin()->first;
    const int last = days[i].rbegin()->first;
    series.start = Date{std::chrono::days(first)};
    series.values.assign(static_cast<std::size_t>(last - first + 1), std::nullopt);
    for (const auto& [day, cell] : days[i])
      series.values[static_cast<std::size_t>(day - first)] = cell.value;
    report.census.push_back({series.station_id, format_iso_date(series.start),
                             format_iso_date(series.date_at(series.size() - 1)), series.size(),
                             series.missing_count()});
    result.series.push_back(std::move(series));
  }
  return result;
}

IngestResult ingest(const std::filesystem::path& records, const std::filesystem::path& stations,
                    bool allow_outside_region) {
  std::ifstream r(records), s(stations);
  if (!s) throw FormatError("cannot open stations file " + stations.string());
  if (!r) throw FormatError("cannot open records file " + records.string());
  return ingest(r, s, allow_outside_region);
}

std::string CleaningReport::render() const {
  std::ostringstream os;
  os << "Cleaning report\n"
     << "rows read: " << rows_read << "\n"
     << "rows accepted: " << rows_accepted << "\n"
     << "rows skipped: " << skipped_rows.size() << "\n"
     << "missing cells: " << missing_cells.size() << "\n"
     << "duplicate rows: " << duplicate_rows.size() << "\n";
  auto section = [&](const char* title, const std::vector<RowIssue>& issues) {
    os << "\n[" << title << "]\n";
    for (const auto& issue : issues) os << "line " << issue.line << ": " << issue.message << "\n";
  };
  section("skipped rows", skipped_rows);
  section("missing cells", missing_cells);
  section("duplicate rows", duplicate_rows);
  os << "\n[station census]\n";
  os << "station_id,first_date,last_date,days,missing\n";
  for (const auto& c : census)
    os << c.station_id << ',' << c.first_date << ',' << c.last_date << ',' << c.days << ','
       << c.missing << "\n";
  return os.str();
}

void write_stations(std::ostream& out, std::span<const Station> stations) {
  out << "station_id,name,district,zone,latitude,longitude\n";
  char buf[64];
  for (const Station& s : stations) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f", s.latitude, s.longitude);
    out << s.id << ',' << s.name << ',' << s.district << ',' << zone_token(s.zone) << ',' << buf
        << "\n";
  }
}

void write_records(std::ostream& out, std::span<const RainSeries> series) {
  out << "station_id,date,rainfall_mm\n";
  for (const RainSeries& s : series)
    for (std::size_t i = 0; i < s.size(); ++i)
      out << s.station_id << ',' << format_iso_date(s.date_at(i)) << ','
          << (s.values[i] ? fmt_mm(*s.values[i]) : std::string("NA")) << "\n";
}

// ---------------------------------------------------------------------------
// Normalizer

Normalizer::Normalizer(double x_min, double x_max) : x_min_(x_min), x_max_(x_max) {
  if (!(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min))
    throw ArgumentError("normalizer needs x_max > x_min, got [" + std::to_string(x_min) + ", " +
                        std::to_string(x_max) + "]");
}

Normalizer Normalizer::fit(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("cannot fit a normalizer on no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return Normalizer(*lo, *hi);
}

// ---------------------------------------------------------------------------
// Splits and windows

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ArgumentError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

std::optional<Split> SplitYears::classify(int year) const {
  if (year >= train_first && year <= train_last) return Split::train;
  if (year >= val_first && year <= val_last) return Split::val;
  if (year >= test_first && year <= test_last) return Split::test;
  return std::nullopt;
}

void SplitYears::validate() const {
  if (train_first > train_last || val_first > val_last || test_first > test_last)
    throw ArgumentError("split year ranges must have first <= last");
  if (!(train_last < val_first && val_last < test_first))
    throw ArgumentError("split year ranges must be chronological and disjoint");
}

std::vector<WindowRow> make_windows(const RainSeries& series, const Station& station,
                                    std::size_t seq_len, const Normalizer& normalizer) {
  if (seq_len == 0) throw ArgumentError("make_windows: seq_len must be positive");
  if (series.station_id != station.id)
    throw ArgumentError("make_windows: series " + series.station_id + " paired with station " +
                        station.id);
  std::vector<WindowRow> rows;
  std::size_t run = 0;  // consecutive present days ending at t
  for (std::size_t t = 0; t < series.size(); ++t) {
    run = series.values[t] ? run + 1 : 0;
    if (run < seq_len + 1) continue;
    WindowRow row;
    row.sequence.resize(seq_len);
    for (std::size_t j = 0; j < seq_len; ++j)
      row.sequence[j] = normalizer.normalize(*series.values[t - seq_len + j]);
    row.latitude = station.latitude;
    row.longitude = station.longitude;
    row.target = normalizer.normalize(*series.values[t]);
    row.station_id = station.id;
    row.target_date = series.date_at(t);
    rows.push_back(std::move(row));
  }
  return rows;
}

SplitRows split_by_year(std::vector<WindowRow> rows, const SplitYears& years) {
  SplitRows out;
  for (WindowRow& row : rows) {
    const auto split = years.classify(year_of(row.target_date));
    if (!split) {
      ++out.excluded;
      continue;
    }
    switch (*split) {
      case Split::train: out.train.push_back(std::move(row)); break;
      case Split::val: out.val.push_back(std::move(row)); break;
      case Split::test: out.test.push_back(std::move(row)); break;
    }
  }
  return out;
}

std::vector<std::size_t> WindowedDataset::rows_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

WindowedDataset::Batch WindowedDataset::batch(std::span<const std::size_t> rows) const {
  const std::size_t n = rows.size();
  if (n == 0) throw ArgumentError("empty batch");
  Batch b{Tensor({n, seq_len}), Tensor({n, 2}), Tensor({n, 1})};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = rows[i];
    if (r >= size()) throw ArgumentError("batch row " + std::to_string(r) + " out of range");
    std::copy_n(sequences.data() + r * seq_len, seq_len, b.x.raw() + i * seq_len);
    b.coords[2 * i] = coords[2 * r];
    b.coords[2 * i + 1] = coords[2 * r + 1];
    b.target[i] = targets[r];
  }
  return b;
}

WindowedDataset build_dataset(const IngestResult& ingested, std::size_t seq_len,
                              const SplitYears& years, DatasetBuildSummary* summary) {
  years.validate();
  if (seq_len == 0) throw ArgumentError("seq_len must be positive");
  std::unordered_map<std::string, std::size_t> station_of;
  for (std::size_t i = 0; i < ingested.stations.size(); ++i)
    station_of[ingested.stations[i].id] = i;

  std::vector<double> train_values;
  for (const RainSeries& s : ingested.series)
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.values[i] && years.classify(year_of(s.date_at(i))) == Split::train)
        train_values.push_back(*s.values[i]);
  if (train_values.empty()) throw ArgumentError("no rainfall values fall in the training years");

  WindowedDataset ds;
  ds.seq_len = seq_len;
  ds.years = years;
  ds.normalizer = Normalizer::fit(train_values);
  ds.stations = ingested.stations;

  // Stations window independently; results are merged in station-id order.
  const std::size_t n_series = ingested.series.size();
  std::vector<std::vector<WindowRow>> per_series(n_series);
  const auto ns = static_cast<std::ptrdiff_t>(n_series);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < ns; ++i) {
    const RainSeries& s = ingested.series[static_cast<std::size_t>(i)];
    const auto st = station_of.find(s.station_id);
    if (st == station_of.end()) continue;
    per_series[static_cast<std::size_t>(i)] =
        make_windows(s, ingested.stations[st->second], seq_len, ds.normalizer);
  }

  DatasetBuildSummary local;
  for (std::size_t i = 0; i < n_series; ++i) {
    for (WindowRow& row : per_series[i]) {
      ++local.windows;
      const auto split = years.classify(year_of(row.target_date));
      if (!split) {
        ++local.excluded;
        continue;
      }
      ++local.per_split[static_cast<std::size_t>(*split)];
      ds.sequences.insert(ds.sequences.end(), row.sequence.begin(), row.sequence.end());
      ds.coords.push_back(row.latitude);
      ds.coords.push_back(row.longitude);
      ds.targets.push_back(row.target);
      ds.station_index.push_back(static_cast<std::uint32_t>(station_of.at(row.station_id)));
      ds.target_day.push_back(row.target_date.time_since_epoch().count());
      ds.split.push_back(*split);
    }
    per_series[i].clear();
    per_series[i].shrink_to_fit();
  }
  if (summary != nullptr) *summary = local;
  return ds;
}

namespace {
constexpr char kDatasetMagic[9] = "DWRPMDAT";
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

void save_dataset(const std::filesystem::path& path, const WindowedDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write dataset cache " + path.string());
  using namespace binary;
  put_magic(out, kDatasetMagic, kDatasetVersion);
  put_u64(out, ds.seq_len);
  for (int y : {ds.years.train_first, ds.years.train_last, ds.years.val_first, ds.years.val_last,
                ds.years.test_first, ds.years.test_last})
    put_i32(out, y);
  put_f64(out, ds.normalizer.x_min());
  put_f64(out, ds.normalizer.x_max());
  put_u32(out, static_cast<std::uint32_t>(ds.stations.size()));
  for (const Station& s : ds.stations) {
    put_string(out, s.id);
    put_string(out, s.name);
    put_string(out, s.district);
    put_u32(out, static_cast<std::uint32_t>(s.zone));
    put_f64(out, s.latitude);
    put_f64(out, s.longitude);
  }
  put_u64(out, ds.size());
  for (std::size_t r = 0; r < ds.size(); ++r) {
    put_u32(out, ds.station_index[r]);
    put_i32(out, ds.target_day[r]);
    put_u32(out, static_cast<std::uint32_t>(ds.split[r]));
    put_f64(out, ds.coords[2 * r]);
    put_f64(out, ds.coords[2 * r + 1]);
    put_f64(out, ds.targets[r]);
    for (std::size_t j = 0; j < ds.seq_len; ++j) put_f64(out, ds.sequences[r * ds.seq_len + j]);
  }
  if (!out) throw FormatError("failed writing dataset cache " + path.string());
}

WindowedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset cache " + path.string());
  using namespace binary;
  const std::uint32_t version = expect_magic(in, kDatasetMagic, "dataset cache");
  if (version != kDatasetVersion)
    throw FormatError("unsupported dataset cache version " + std::to_string(version));
  WindowedDataset ds;
  ds.seq_len = get_u64(in);
  if (ds.seq_len == 0 || ds.seq_len > (1u << 20)) throw FormatError("bad seq_len in dataset cache");
  ds.years.train_first = get_i32(in);
  ds.years.train_last = get_i32(in);
  ds.years.val_first = get_i32(in);
  ds.years.val_last = get_i32(in);
  ds.years.test_first = get_i32(in);
  ds.years.test_last = get_i32(in);
  const double x_min = get_f64(in);
  const double x_max = get_f64(in);
  ds.normalizer = Normalizer(x_min, x_max);
  const std::uint32_t n_stations = get_u32(in);
  for (std::uint32_t i = 0; i < n_stations; ++i) {
    Station s;
    s.id = get_string(in);
    s.name = get_string(in);
    s.district = get_string(in);
    const std::uint32_t zone = get_u32(in);
    if (zone >= kAllZones.size()) throw FormatError("bad zone in dataset cache");
    s.zone = static_cast<Zone>(zone);
    s.latitude = get_f64(in);
    s.longitude = get_f64(in);
    ds.stations.push_back(std::move(s));
  }
  const std::uint64_t rows = get_u64(in);
  ds.sequences.resize(rows * ds.seq_len);
  ds.coords.resize(rows * 2);
  ds.targets.resize(rows);
  ds.station_index.resize(rows);
  ds.target_day.resize(rows);
  ds.split.resize(rows);
  for (std::uint64_t r = 0; r < rows; ++r) {
    ds.station_index[r] = get_u32(in);
    if (ds.station_index[r] >= n_stations) throw FormatError("bad station index in dataset cache");
    ds.target_day[r] = get_i32(in);
    const std::uint32_t split = get_u32(in);
    if (split > 2) throw FormatError("bad split label in dataset cache");
    ds.split[r] = static_cast<Split>(split);
    ds.coords[2 * r] = get_f64(in);
    ds.coords[2 * r + 1] = get_f64(in);
    ds.targets[r] = get_f64(in);
    for (std::size_t j = 0; j < ds.seq_len; ++j) ds.sequences[r * ds.seq_len + j] = get_f64(in);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// IMD categories

ImdCategory categorize(double mm) {
  if (std::isnan(mm) || mm < 0.0)
    throw ArgumentError("categorize: rainfall must be non-negative, got " + std::to_string(mm));
  if (mm < 0.05) return ImdCategory::no_rain;
  if (mm < 7.55) return ImdCategory::light;
  if (mm < 35.55) return ImdCategory::moderate;
  if (mm < 64.45) return ImdCategory::rather_heavy;
  if (mm < 124.45) return ImdCategory::heavy;
  if (mm < 244.45) return ImdCategory::very_heavy;
  return ImdCategory::extremely_heavy;
}

std::string to_string(ImdCategory category) {
  switch (category) {
    case ImdCategory::no_rain: return "no_rain";
    case ImdCategory::light: return "light";
    case ImdCategory::moderate: return "moderate";
    case ImdCategory::rather_heavy: return "rather_heavy";
    case ImdCategory::heavy: return "heavy";
    case ImdCategory::very_heavy: return "very_heavy";
    case ImdCategory::extremely_heavy: return "extremely_heavy";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

const std::vector<std::vector<const char*>>& zone_districts() {
  static const std::vector<std::vector<const char*>> districts = {
      {"Jaisalmer", "Jodhpur", "Hanumangarh", "Shriganganagar", "Barmer", "Churu", "Nagaur",
       "Sikar", "Bikaner", "Jhunjhunu"},
      {"Udaipur", "Dungarpur", "Sirohi", "Jalore", "Pali", "Banswara", "Bhilwara", "Chittorgarh",
       "Rajsamand", "Ajmer"},
      {"Alwar", "Bharatpur", "Tonk", "Sawai Madhopur", "Karauli", "Jaipur", "Dausa", "Dhoulpur"},
      {"Kota", "Bundi", "Jhalawar", "Baran"}};
  return districts;
}

Zone quadrant_zone(double lat, double lon) {
  const bool north = lat >= (kMinLatitude + kMaxLatitude) / 2;
  const bool west = lon < (kMinLongitude + kMaxLongitude) / 2;
  if (north) return west ? Zone::north_west_desert : Zone::eastern_plains;
  return west ? Zone::central_aravalli_hill : Zone::south_eastern_plateau;
}

double bump(double x, double centre, double width) {
  const double z = (x - centre) / width;
  return std::exp(-0.5 * z * z);
}

// 1 at the late-July monsoon peak, small shoulders in May and Oct-Nov.
double seasonality(unsigned doy) {
  const double d = doy;
  const double monsoon = bump(d, 205.0, 28.0);
  const double shoulders = 0.25 * (bump(d, 140.0, 12.0) + bump(d, 290.0, 15.0));
  return std::max(monsoon, shoulders);
}

}  // namespace

SyntheticData synth_generate(std::size_t n_stations, std::size_t years, std::uint64_t seed,
                             int start_year) {
  if (n_stations == 0) throw ArgumentError("synth_generate: need at least one station");
  if (years < 2) throw ArgumentError("synth_generate: need at least two years");
  if (n_stations > 9999 || years > 500) throw ArgumentError("synth_generate: size too large");

  constexpr double kPersistence = 0.93;
  const double innovation = std::sqrt(1.0 - kPersistence * kPersistence);
  const Date first = make_date(start_year, 1, 1);
  const Date end = make_date(start_year + static_cast<int>(years), 1, 1);
  const auto n_days = static_cast<std::size_t>((end - first).count());

  SyntheticData out;
  for (std::size_t s = 0; s < n_stations; ++s) {
    Rng rng(seed, s + 1);
    const double lat_u = rng.uniform(), lon_u = rng.uniform();
    Station st;
    char id[16];
    std::snprintf(id, sizeof id, "SYN%03zu", s + 1);
    st.id = id;
    st.name = "Synthetic Gauge " + std::to_string(s + 1);
    st.latitude = std::round((kMinLatitude + lat_u * (kMaxLatitude - kMinLatitude)) * 1e4) / 1e4;
    st.longitude =
        std::round((kMinLongitude + lon_u * (kMaxLongitude - kMinLongitude)) * 1e4) / 1e4;
    st.zone = quadrant_zone(st.latitude, st.longitude);
    const auto& names = zone_districts()[static_cast<std::size_t>(st.zone)];
    st.district = names[s % names.size()];

    // Wetter toward the south-east.
    const double east = (st.longitude - kMinLongitude) / (kMaxLongitude - kMinLongitude);
    const double south = (kMaxLatitude - st.latitude) / (kMaxLatitude - kMinLatitude);
    const double wetness = 0.6 + 0.8 * (east + south) / 2.0;

    RainSeries series{st.id, first, {}};
    series.values.reserve(n_days);
    double z = rng.normal();
    for (std::size_t d = 0; d < n_days; ++d) {
      const Date date = first + std::chrono::days(static_cast<int>(d));
      z = kPersistence * z + innovation * rng.normal();
      const double threshold = 2.2 - 1.9 * seasonality(day_of_year(date));
      const double jitter = 0.7 + 0.6 * rng.uniform();
      const double mm = wetness * 12.0 * std::max(0.0, z - threshold) * jitter;
      series.values.emplace_back(std::round(mm * 10.0) / 10.0);
    }
    out.stations.push_back(std::move(st));
    out.series.push_back(std::move(series));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monthly statistics

std::array<MonthStats, 12> monthly_stats(const RainSeries& series, int year) {
  std::array<MonthStats, 12> stats{};
  for (unsigned m = 1; m <= 12; ++m) {
    MonthStats& ms = stats[m - 1];
    const Date begin = make_date(year, m, 1);
    const Date end = m == 12 ? make_date(year + 1, 1, 1) : make_date(year, m + 1, 1);
    double sum = 0.0;
    for (Date d = begin; d < end; d += std::chrono::days(1)) {
      const auto offset = (d - series.start).count();
      const bool in_range = offset >= 0 && static_cast<std::size_t>(offset) < series.size();
      const auto& v = in_range ? series.values[static_cast<std::size_t>(offset)] : std::nullopt;
      if (!v) {
        ++ms.missing;
        continue;
      }
      if (ms.days == 0) {
        ms.min = ms.max = *v;
      } else {
        ms.min = std::min(ms.min, *v);
        ms.max = std::max(ms.max, *v);
      }
      sum += *v;
      ++ms.days;
    }
    ms.empty = ms.days == 0;
    if (!ms.empty) ms.mean = sum / static_cast<double>(ms.days);
  }
  return stats;
}

}  // namespace dwrpm

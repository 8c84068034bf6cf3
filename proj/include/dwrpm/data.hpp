#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dwrpm/dates.hpp"
#include "dwrpm/tensor.hpp"

namespace dwrpm {

// ---------------------------------------------------------------------------
// Stations

enum class Zone { north_west_desert, central_aravalli_hill, eastern_plains, south_eastern_plateau };

inline constexpr std::array<Zone, 4> kAllZones = {
    Zone::north_west_desert, Zone::central_aravalli_hill, Zone::eastern_plains,
    Zone::south_eastern_plateau};

/// File token, e.g. "NorthWestDesert".
std::string zone_token(Zone zone);
/// Report label, e.g. "North-West Desert Region".
std::string zone_label(Zone zone);
/// Accepts the file tokens; throws ArgumentError otherwise.
Zone parse_zone(std::string_view token);

// Rajasthan bounding box: 23 deg 12' N .. 29 deg 55' N, 70 deg 30' E .. 77 deg 35' E.
inline constexpr double kMinLatitude = 23.2;
inline constexpr double kMaxLatitude = 29.92;
inline constexpr double kMinLongitude = 70.5;
inline constexpr double kMaxLongitude = 77.58;

struct Station {
  std::string id;
  std::string name;
  std::string district;
  Zone zone = Zone::north_west_desert;
  double latitude = 0.0;   // degrees N
  double longitude = 0.0;  // degrees E

  bool within_region() const;
};

// ---------------------------------------------------------------------------
// Rainfall series

/// Contiguous daily record from `start`; nullopt marks a missing day.
struct RainSeries {
  std::string station_id;
  Date start;
  std::vector<std::optional<double>> values;  // mm

  std::size_t size() const { return values.size(); }
  Date date_at(std::size_t i) const { return start + std::chrono::days(static_cast<int>(i)); }
  std::size_t missing_count() const;
};

// ---------------------------------------------------------------------------
// Ingestion

struct RowIssue {
  std::size_t line;  // 1-based line in the source file (header is line 1)
  std::string message;
};

struct StationCensus {
  std::string station_id;
  std::string first_date;
  std::string last_date;
  std::size_t days = 0;
  std::size_t missing = 0;
};

struct CleaningReport {
  std::size_t rows_read = 0;
  std::size_t rows_accepted = 0;
  std::vector<RowIssue> skipped_rows;    // row dropped entirely
  std::vector<RowIssue> missing_cells;   // non-numeric rainfall -> missing marker
  std::vector<RowIssue> duplicate_rows;  // later row replaced an earlier one
  std::vector<StationCensus> census;

  std::string render() const;
};

struct IngestResult {
  std::vector<Station> stations;  // sorted by id
  std::vector<RainSeries> series; // sorted by station id
  CleaningReport report;
};

/// Parses the stations file. Malformed station rows are fatal (FormatError
/// with the line number); `allow_outside_region` relaxes the coordinate box.
std::vector<Station> read_stations(std::istream& in, bool allow_outside_region = false);

/// Parses records against known stations. Bad rows (wrong column count,
/// bad date, negative rainfall, unknown station) are skipped and reported;
/// non-numeric rainfall becomes a missing day; duplicates keep the last row.
IngestResult ingest(std::istream& records, std::istream& stations,
                    bool allow_outside_region = false);
IngestResult ingest(const std::filesystem::path& records, const std::filesystem::path& stations,
                    bool allow_outside_region = false);

void write_stations(std::ostream& out, std::span<const Station> stations);
void write_records(std::ostream& out, std::span<const RainSeries> series);

// ---------------------------------------------------------------------------
// Normalization: x* = (x - x_min) / (x_max - x_min) * 100, unclamped.

class Normalizer {
 public:
  Normalizer(double x_min, double x_max);

  /// Min/max over the given values; throws ArgumentError if they are all
  /// equal or there are none.
  static Normalizer fit(std::span<const double> values);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double normalize(double mm) const { return (mm - x_min_) / (x_max_ - x_min_) * 100.0; }
  double denormalize(double scaled) const { return scaled / 100.0 * (x_max_ - x_min_) + x_min_; }

 private:
  double x_min_;
  double x_max_;
};

// ---------------------------------------------------------------------------
// Windowing and splits

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };
std::string to_string(Split split);
Split parse_split(std::string_view name);

/// Inclusive year ranges by target date.
struct SplitYears {
  int train_first = 1957;
  int train_last = 2006;
  int val_first = 2007;
  int val_last = 2014;
  int test_first = 2015;
  int test_last = 2017;

  std::optional<Split> classify(int year) const;
  void validate() const;
};

struct WindowRow {
  std::vector<double> sequence;  // normalized, oldest first
  double latitude = 0.0;
  double longitude = 0.0;
  double target = 0.0;  // normalized
  std::string station_id;
  Date target_date;
};

/// One row per day t whose previous seq_len days and day t itself are all
/// present. Windows touching a missing day are skipped.
std::vector<WindowRow> make_windows(const RainSeries& series, const Station& station,
                                    std::size_t seq_len, const Normalizer& normalizer);

struct SplitRows {
  std::vector<WindowRow> train;
  std::vector<WindowRow> val;
  std::vector<WindowRow> test;
  std::size_t excluded = 0;  // target year outside every range
};

SplitRows split_by_year(std::vector<WindowRow> rows, const SplitYears& years);

/// Packed rows for training and evaluation.
struct WindowedDataset {
  std::size_t seq_len = 0;
  SplitYears years;
  Normalizer normalizer{0.0, 1.0};
  std::vector<Station> stations;  // station_index refers here

  std::vector<double> sequences;  // rows x seq_len
  std::vector<double> coords;     // rows x 2 (latitude, longitude)
  std::vector<double> targets;    // rows
  std::vector<std::uint32_t> station_index;
  std::vector<std::int32_t> target_day;  // days since 1970-01-01
  std::vector<Split> split;

  std::size_t size() const { return targets.size(); }
  std::vector<std::size_t> rows_in(Split s) const;
  Date target_date(std::size_t row) const {
    return Date{std::chrono::days(target_day[row])};
  }
  const Station& station_of(std::size_t row) const { return stations[station_index[row]]; }

  struct Batch {
    Tensor x;       // [n x seq_len]
    Tensor coords;  // [n x 2]
    Tensor target;  // [n x 1]
  };
  Batch batch(std::span<const std::size_t> rows) const;
};

struct DatasetBuildSummary {
  std::size_t windows = 0;
  std::size_t excluded = 0;
  std::array<std::size_t, 3> per_split{};
};

/// Fits the normalizer on train-year daily values of every station, windows
/// each station, splits by target year, and packs in station-id order.
WindowedDataset build_dataset(const IngestResult& ingested, std::size_t seq_len,
                              const SplitYears& years, DatasetBuildSummary* summary = nullptr);

void save_dataset(const std::filesystem::path& path, const WindowedDataset& dataset);
WindowedDataset load_dataset(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// IMD intensity categories

enum class ImdCategory {
  no_rain,
  light,
  moderate,
  rather_heavy,
  heavy,
  very_heavy,
  extremely_heavy
};

inline constexpr std::array<ImdCategory, 7> kAllCategories = {
    ImdCategory::no_rain,      ImdCategory::light,      ImdCategory::moderate,
    ImdCategory::rather_heavy, ImdCategory::heavy,      ImdCategory::very_heavy,
    ImdCategory::extremely_heavy};

/// Bands at 0.1 mm gauge resolution: 0 / 0.1-7.5 / 7.6-35.5 / 35.6-64.4 /
/// 64.5-124.4 / 124.5-244.4 / >= 244.5. Cut points sit half a gauge step
/// below each published lower bound. Throws ArgumentError for negatives.
ImdCategory categorize(double mm);
std::string to_string(ImdCategory category);

// ---------------------------------------------------------------------------
// Synthetic monsoon data

struct SyntheticData {
  std::vector<Station> stations;
  std::vector<RainSeries> series;
};

/// Daily series for `n_stations` gauges over `years` calendar years from
/// `start_year`. Rain falls when a persistent latent AR(1) weather state
/// crosses a seasonal threshold that dips during June-September (peaking
/// late July), with light shoulders in May and October-November; amounts
/// grow with the excess and with a wetness factor that rises toward the
/// south-east. Stations are spread over the Rajasthan box and zoned by
/// quadrant. Values are rounded to 0.1 mm.
SyntheticData synth_generate(std::size_t n_stations, std::size_t years, std::uint64_t seed,
                             int start_year = 2008);

// ---------------------------------------------------------------------------
// Monthly statistics

struct MonthStats {
  bool empty = true;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::size_t days = 0;     // days with data
  std::size_t missing = 0;  // days in the month without data
};

/// Calendar-month min/max/mean of daily values in `year`; missing days are
/// excluded and counted.
std::array<MonthStats, 12> monthly_stats(const RainSeries& series, int year);

}  // namespace dwrpm

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dwrpm/errors.hpp"
#include "dwrpm/data.hpp"
#include "support.hpp"

using namespace dwrpm;
using namespace dwrpm::testing;

namespace {

const char* kStationsCsv =
    "station_id,name,district,zone,latitude,longitude\n"
    "S1,Bhinai,Ajmer,CentralAravalliHill,26.05,74.78\n"
    "S2,Patan,Bundi,SouthEasternPlateau,25.30,75.95\n";

IngestResult ingest_text(const std::string& records, const std::string& stations = kStationsCsv) {
  std::istringstream r(records), s(stations);
  return ingest(r, s);
}

SplitYears years(int tr0, int tr1, int v0, int v1, int te0, int te1) {
  SplitYears y;
  y.train_first = tr0, y.train_last = tr1, y.val_first = v0, y.val_last = v1;
  y.test_first = te0, y.test_last = te1;
  return y;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

// ---------------------------------------------------------------------------
// Dates and stations

TEST(Dates, StrictParsing) {
  EXPECT_EQ(parse_iso_date("2016-07-15"), make_date(2016, 7, 15));
  EXPECT_FALSE(parse_iso_date("2017-02-29"));
  EXPECT_FALSE(parse_iso_date("2016-7-15"));
  EXPECT_FALSE(parse_iso_date("2016/07/15"));
  EXPECT_FALSE(parse_iso_date("2016-07-15x"));
  EXPECT_TRUE(parse_iso_date("2016-02-29"));
  EXPECT_EQ(format_iso_date(make_date(1957, 1, 1)), "1957-01-01");
  EXPECT_EQ(day_of_year(make_date(2016, 12, 31)), 366u);
  EXPECT_EQ(day_of_year(make_date(2017, 3, 1)), 60u);
}

TEST(Stations, ZonesRoundTrip) {
  for (Zone z : kAllZones) EXPECT_EQ(parse_zone(zone_token(z)), z);
  EXPECT_THROW(parse_zone("Thar"), ArgumentError);
  EXPECT_EQ(zone_label(Zone::north_west_desert), "North-West Desert Region");
}

TEST(Stations, Validation) {
  std::istringstream ok(kStationsCsv);
  const auto st = read_stations(ok);
  ASSERT_EQ(st.size(), 2u);
  EXPECT_EQ(st[1].zone, Zone::south_eastern_plateau);
  EXPECT_DOUBLE_EQ(st[0].latitude, 26.05);

  std::istringstream bad_zone("station_id,name,district,zone,latitude,longitude\nX,a,b,Coast,25,75\n");
  EXPECT_THROW(read_stations(bad_zone), FormatError);
  std::istringstream outside("station_id,name,district,zone,latitude,longitude\nX,a,b,EasternPlains,12,75\n");
  EXPECT_THROW(read_stations(outside), FormatError);
  std::istringstream outside2("station_id,name,district,zone,latitude,longitude\nX,a,b,EasternPlains,12,75\n");
  EXPECT_EQ(read_stations(outside2, true).size(), 1u);
  std::istringstream dup("station_id,name,district,zone,latitude,longitude\nX,a,b,EasternPlains,25,75\nX,a,b,EasternPlains,25,75\n");
  EXPECT_THROW(read_stations(dup), FormatError);
  std::istringstream header("id,name\n");
  EXPECT_THROW(read_stations(header), FormatError);
}

// ---------------------------------------------------------------------------
// Ingestion

TEST(Ingest, CleaningRules) {
  const IngestResult r = ingest_text(
      "station_id,date,rainfall_mm\n"
      "S1,2000-01-01,0\n"
      "S1,2000-01-02,abc\n"
      "S1,2000-01-03,3\n"
      "S1,2000-01-03,5\n"
      "S1,2000-01-05,1.5\n");
  ASSERT_EQ(r.series.size(), 1u);
  const RainSeries& s = r.series[0];
  EXPECT_EQ(s.start, make_date(2000, 1, 1));
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s.values[0], 0.0);
  EXPECT_FALSE(s.values[1].has_value());
  EXPECT_EQ(s.values[2], 5.0);
  EXPECT_FALSE(s.values[3].has_value());  // gap
  EXPECT_EQ(s.values[4], 1.5);
  EXPECT_EQ(s.missing_count(), 2u);
  ASSERT_EQ(r.report.missing_cells.size(), 1u);
  EXPECT_EQ(r.report.missing_cells[0].line, 3u);
  ASSERT_EQ(r.report.duplicate_rows.size(), 1u);
  EXPECT_EQ(r.report.duplicate_rows[0].line, 5u);
  EXPECT_TRUE(r.report.skipped_rows.empty());
}

TEST(Ingest, ThreeBadRowsAreReported) {
  const IngestResult r = ingest_text(
      "station_id,date,rainfall_mm\n"
      "S1,2000-01-01,0\n"
      "S1,2000-13-01,2\n"      // bad date
      "S9,2000-01-02,2\n"      // unknown station
      "S2,2000-01-02,-4\n"     // negative
      "S2,2000-01-03,1.2\n");
  ASSERT_EQ(r.report.skipped_rows.size(), 3u);
  EXPECT_EQ(r.report.skipped_rows[0].line, 3u);
  EXPECT_EQ(r.report.skipped_rows[1].line, 4u);
  EXPECT_EQ(r.report.skipped_rows[2].line, 5u);
  EXPECT_EQ(r.report.rows_read, 5u);
  EXPECT_EQ(r.report.rows_accepted, 2u);
  const std::string text = r.report.render();
  EXPECT_NE(text.find("line 4"), std::string::npos) << text;
}

TEST(Ingest, WrongFieldCountAndHeader) {
  EXPECT_EQ(ingest_text("station_id,date,rainfall_mm\nS1,2000-01-01\nS1,2000-01-01,1\n")
                .report.skipped_rows.size(),
            1u);
  EXPECT_THROW(ingest_text("id,when,mm\n"), FormatError);
}

TEST(Ingest, WritersRoundTrip) {
  const SyntheticData syn = synth_generate(3, 2, 1);
  std::ostringstream st, rec;
  write_stations(st, syn.stations);
  write_records(rec, syn.series);
  std::istringstream st_in(st.str()), rec_in(rec.str());
  const IngestResult back = ingest(rec_in, st_in);
  EXPECT_TRUE(back.report.skipped_rows.empty());
  EXPECT_TRUE(back.report.missing_cells.empty());
  EXPECT_TRUE(back.report.duplicate_rows.empty());
  ASSERT_EQ(back.series.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(back.series[i].values.size(), syn.series[i].values.size());
    for (std::size_t d = 0; d < back.series[i].size(); ++d)
      EXPECT_NEAR(*back.series[i].values[d], *syn.series[i].values[d], 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Normalization

TEST(Normalizer, Examples) {
  const Normalizer n(0.0, 500.0);
  EXPECT_EQ(n.normalize(0.0), 0.0);
  EXPECT_EQ(n.normalize(500.0), 100.0);
  EXPECT_EQ(n.normalize(250.0), 50.0);
  EXPECT_EQ(n.denormalize(0.0), 0.0);
  EXPECT_EQ(n.denormalize(100.0), 500.0);
  EXPECT_EQ(n.normalize(1000.0), 200.0);  // extrapolates
  EXPECT_THROW(Normalizer(3.0, 3.0), ArgumentError);
  EXPECT_THROW(Normalizer(4.0, 3.0), ArgumentError);
  EXPECT_THROW(Normalizer::fit(std::vector<double>{2.0, 2.0}), ArgumentError);
  const Normalizer f = Normalizer::fit(std::vector<double>{3.0, 0.5, 9.25});
  EXPECT_EQ(f.x_min(), 0.5);
  EXPECT_EQ(f.x_max(), 9.25);
}

TEST(Normalizer, RoundTrip) {
  Rng rng(1);
  const Normalizer n(0.0, 523.7);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = 600.0 * rng.uniform();
    worst = std::max(worst, std::abs(n.denormalize(n.normalize(x)) - x));
  }
  EXPECT_LT(worst, 1e-9);
}

// ---------------------------------------------------------------------------
// Windowing and splits

TEST(Windows, Counts) {
  const Station st = make_station("S1", Zone::eastern_plains);
  const Normalizer n(0.0, 10.0);
  const Date d0 = make_date(2001, 1, 1);
  EXPECT_EQ(make_windows(constant_series("S1", d0, 365, 1.0), st, 210, n).size(), 155u);
  EXPECT_EQ(make_windows(constant_series("S1", d0, 211, 1.0), st, 210, n).size(), 1u);
  EXPECT_EQ(make_windows(constant_series("S1", d0, 210, 1.0), st, 210, n).size(), 0u);
}

TEST(Windows, ContentAndMissingDays) {
  const Station st = make_station("S1", Zone::eastern_plains, 25.5, 76.25);
  const Normalizer n(0.0, 10.0);
  RainSeries s{"S1", make_date(2001, 1, 1), {}};
  for (int i = 0; i < 12; ++i) s.values.push_back(static_cast<double>(i));
  s.values[6] = std::nullopt;
  const auto rows = make_windows(s, st, 3, n);
  // Targets at t = 3..11, minus those whose 4-day span touches day 6.
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].target_date, make_date(2001, 1, 4));
  EXPECT_EQ(rows[0].sequence, (std::vector<double>{0, 10, 20}));
  EXPECT_EQ(rows[0].target, 30.0);
  EXPECT_EQ(rows[0].latitude, 25.5);
  EXPECT_EQ(rows[0].longitude, 76.25);
  EXPECT_EQ(rows[3].target_date, make_date(2001, 1, 11));
  EXPECT_EQ(rows[4].target_date, make_date(2001, 1, 12));
}

TEST(Splits, BoundaryDates) {
  const SplitYears y;
  EXPECT_EQ(y.classify(year_of(make_date(2006, 12, 31))), Split::train);
  EXPECT_EQ(y.classify(year_of(make_date(2007, 1, 1))), Split::val);
  EXPECT_EQ(y.classify(year_of(make_date(2016, 7, 15))), Split::test);
  EXPECT_FALSE(y.classify(1956).has_value());
  EXPECT_FALSE(y.classify(2018).has_value());

  std::vector<WindowRow> rows(4);
  rows[0].target_date = make_date(2006, 12, 31);
  rows[1].target_date = make_date(2007, 1, 1);
  rows[2].target_date = make_date(2016, 7, 15);
  rows[3].target_date = make_date(2020, 1, 1);
  const SplitRows s = split_by_year(rows, y);
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  EXPECT_EQ(s.excluded, 1u);
  EXPECT_THROW(years(2000, 2005, 2004, 2006, 2007, 2008).validate(), ArgumentError);
}

TEST(Dataset, BookkeepingAndNoMissingInWindows) {
  SyntheticData syn = synth_generate(3, 4, 2);
  syn.series[1].values[400] = std::nullopt;
  IngestResult in{syn.stations, syn.series, {}};
  DatasetBuildSummary sum;
  const WindowedDataset ds = build_dataset(in, 30, years(2008, 2009, 2010, 2010, 2011, 2011), &sum);
  EXPECT_EQ(sum.per_split[0] + sum.per_split[1] + sum.per_split[2], ds.size());
  EXPECT_EQ(sum.windows, ds.size() + sum.excluded);
  // 3 stations x (days - 30) windows, minus the 31 that touch the missing day.
  std::size_t days = syn.series[0].size();
  EXPECT_EQ(sum.windows, 3 * (days - 30) - 31);
  const Date gap = syn.series[1].date_at(400);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (ds.station_of(r).id != syn.stations[1].id) continue;
    const auto t = ds.target_date(r);
    EXPECT_FALSE(t >= gap && t <= gap + std::chrono::days(30));
  }
  // Rows are grouped by station in id order.
  for (std::size_t r = 1; r < ds.size(); ++r) EXPECT_LE(ds.station_index[r - 1], ds.station_index[r]);
}

TEST(Dataset, NormalizerFitOnTrainYearsOnly) {
  // Val/test years hold a 90 mm day; train years peak at 40 mm. Fitting on
  // all data would give x_max 90.
  const Station st = make_station("S1", Zone::eastern_plains);
  RainSeries s{"S1", make_date(2001, 1, 1), {}};
  const std::size_t days = 365 * 3;
  for (std::size_t i = 0; i < days; ++i) s.values.push_back(static_cast<double>(i % 5));
  s.values[100] = 40.0;
  s.values[500] = 90.0;
  s.values[900] = 90.0;
  IngestResult in{{st}, {s}, {}};
  const WindowedDataset ds = build_dataset(in, 20, years(2001, 2001, 2002, 2002, 2003, 2003));
  EXPECT_EQ(ds.normalizer.x_min(), 0.0);
  EXPECT_EQ(ds.normalizer.x_max(), 40.0);
  std::vector<double> all;
  for (const auto& v : s.values) all.push_back(*v);
  EXPECT_NE(Normalizer::fit(all).x_max(), ds.normalizer.x_max());
  // Val/test rows reuse the train constants, so 90 mm maps above 100.
  double hi = 0.0;
  for (double t : ds.targets) hi = std::max(hi, t);
  EXPECT_DOUBLE_EQ(hi, 225.0);
}

TEST(Dataset, CacheRoundTrip) {
  const SyntheticData syn = synth_generate(2, 2, 3);
  IngestResult in{syn.stations, syn.series, {}};
  const WindowedDataset ds = build_dataset(in, 15, years(2008, 2008, 2009, 2009, 2010, 2010));
  const auto dir = scratch_dir("cache");
  save_dataset(dir / "d.bin", ds);
  const WindowedDataset back = load_dataset(dir / "d.bin");
  EXPECT_EQ(back.seq_len, ds.seq_len);
  EXPECT_EQ(back.sequences, ds.sequences);
  EXPECT_EQ(back.targets, ds.targets);
  EXPECT_EQ(back.coords, ds.coords);
  EXPECT_EQ(back.target_day, ds.target_day);
  EXPECT_EQ(back.split, ds.split);
  EXPECT_EQ(back.station_index, ds.station_index);
  EXPECT_EQ(back.normalizer.x_max(), ds.normalizer.x_max());
  ASSERT_EQ(back.stations.size(), 2u);
  EXPECT_EQ(back.stations[1].id, ds.stations[1].id);
  EXPECT_EQ(back.years.val_first, 2009);

  std::ofstream(dir / "junk.bin") << "not a dataset";
  EXPECT_THROW(load_dataset(dir / "junk.bin"), FormatError);
}

TEST(Dataset, BatchLayout) {
  const SyntheticData syn = synth_generate(2, 2, 4);
  IngestResult in{syn.stations, syn.series, {}};
  const WindowedDataset ds = build_dataset(in, 10, years(2008, 2008, 2009, 2009, 2010, 2010));
  const std::size_t rows[] = {3, 0, ds.size() - 1};
  const auto b = ds.batch(rows);
  EXPECT_EQ(b.x.shape(), (Shape{3, 10}));
  EXPECT_EQ(b.coords.shape(), (Shape{3, 2}));
  EXPECT_EQ(b.target.shape(), (Shape{3, 1}));
  for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(b.x.at(1, j), ds.sequences[j]);
  EXPECT_EQ(b.target[2], ds.targets.back());
  EXPECT_EQ(b.coords.at(2, 0), ds.station_of(ds.size() - 1).latitude);
}

// ---------------------------------------------------------------------------
// IMD categories

TEST(Imd, Examples) {
  EXPECT_EQ(categorize(0.0), ImdCategory::no_rain);
  EXPECT_EQ(categorize(35.5), ImdCategory::moderate);
  EXPECT_EQ(categorize(244.5), ImdCategory::extremely_heavy);
  EXPECT_THROW(categorize(-0.1), ArgumentError);
}

TEST(Imd, BandEdges) {
  const std::pair<double, ImdCategory> cases[] = {
      {0.0, ImdCategory::no_rain},         {0.1, ImdCategory::light},
      {7.5, ImdCategory::light},           {7.6, ImdCategory::moderate},
      {35.5, ImdCategory::moderate},       {35.6, ImdCategory::rather_heavy},
      {64.4, ImdCategory::rather_heavy},   {64.5, ImdCategory::heavy},
      {124.4, ImdCategory::heavy},         {124.5, ImdCategory::very_heavy},
      {244.4, ImdCategory::very_heavy},    {244.5, ImdCategory::extremely_heavy},
  };
  for (const auto& [mm, cat] : cases) EXPECT_EQ(categorize(mm), cat) << mm;
}

TEST(Imd, Monotone) {
  ImdCategory prev = ImdCategory::no_rain;
  for (int tenth = 0; tenth <= 6000; ++tenth) {
    const ImdCategory c = categorize(tenth / 10.0);
    EXPECT_GE(static_cast<int>(c), static_cast<int>(prev));
    prev = c;
  }
  EXPECT_EQ(to_string(ImdCategory::rather_heavy), "rather_heavy");
}

// ---------------------------------------------------------------------------
// Synthetic generator

TEST(Synth, MonsoonShare) {
  for (std::uint64_t seed : {1u, 2u, 3u, 17u}) {
    const SyntheticData syn = synth_generate(5, 4, seed);
    double total = 0.0, monsoon = 0.0;
    for (const RainSeries& s : syn.series)
      for (std::size_t i = 0; i < s.size(); ++i) {
        ASSERT_TRUE(s.values[i].has_value());
        const double v = *s.values[i];
        ASSERT_GE(v, 0.0);
        total += v;
        const unsigned m = month_of(s.date_at(i));
        if (m >= 6 && m <= 9) monsoon += v;
      }
    ASSERT_GT(total, 0.0);
    EXPECT_GE(monsoon / total, 0.70) << "seed " << seed;
  }
}

TEST(Synth, DeterministicAndShaped) {
  const SyntheticData a = synth_generate(20, 10, 7), b = synth_generate(20, 10, 7);
  ASSERT_EQ(a.series.size(), 20u);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a.series[i].values, b.series[i].values);
    EXPECT_EQ(a.stations[i].latitude, b.stations[i].latitude);
    EXPECT_TRUE(a.stations[i].within_region());
    rows += a.series[i].size();
  }
  // 2008..2017 holds three leap years.
  EXPECT_EQ(rows, 20u * (10 * 365 + 3));
  EXPECT_NE(synth_generate(20, 10, 8).series[0].values, a.series[0].values);
  EXPECT_THROW(synth_generate(0, 10, 1), ArgumentError);
  EXPECT_THROW(synth_generate(3, 1, 1), ArgumentError);
}

TEST(Synth, ZonesFollowQuadrants) {
  const SyntheticData syn = synth_generate(40, 2, 9);
  std::set<Zone> seen;
  for (const Station& s : syn.stations) seen.insert(s.zone);
  EXPECT_EQ(seen.size(), 4u);
}

// ---------------------------------------------------------------------------
// Monthly statistics

TEST(MonthlyStats, ReconstructedYear) {
  // Daily values rebuilt so every month matches the published 1957 row of
  // the Sikar gauge: zero minimum everywhere, the listed maximum, and a
  // mean that rounds to the listed value.
  RainSeries s{"SIKAR", make_date(1957, 1, 1), {}};
  s.values.assign(365, 0.0);
  auto set = [&](unsigned month, unsigned day, double mm) {
    s.values[day_of_year(make_date(1957, month, day)) - 1] = mm;
  };
  set(1, 10, 15.2), set(1, 11, 0.3);
  set(5, 20, 55.9);
  set(6, 25, 77.5), set(6, 26, 24.2);
  set(7, 5, 50.8), set(7, 6, 50.0), set(7, 20, 37.2);
  set(8, 8, 54.6), set(8, 9, 17.6);
  set(9, 3, 64.8), set(9, 4, 11.4);
  set(10, 2, 11.4), set(10, 3, 7.5);
  const double max_row[12] = {15.2, 0, 0, 0, 55.9, 77.5, 50.8, 54.6, 64.8, 11.4, 0, 0};
  const double mean_row[12] = {0.50, 0, 0, 0, 1.80, 3.39, 4.45, 2.33, 2.54, 0.61, 0, 0};
  const auto stats = monthly_stats(s, 1957);
  for (int m = 0; m < 12; ++m) {
    EXPECT_FALSE(stats[m].empty);
    EXPECT_EQ(stats[m].min, 0.0);
    EXPECT_EQ(stats[m].max, max_row[m]) << "month " << m + 1;
    EXPECT_EQ(round2(stats[m].mean), mean_row[m]) << "month " << m + 1;
  }
  EXPECT_NEAR(stats[0].mean, 0.5, 1e-12);
}

TEST(MonthlyStats, SmallCases) {
  RainSeries s{"X", make_date(2001, 4, 1), {}};
  s.values.assign(30, 0.0);
  auto zero = monthly_stats(s, 2001)[3];
  EXPECT_EQ(zero.min, 0.0);
  EXPECT_EQ(zero.max, 0.0);
  EXPECT_EQ(zero.mean, 0.0);
  s.values[12] = 31.0;
  EXPECT_DOUBLE_EQ(monthly_stats(s, 2001)[3].mean, 31.0 / 30.0);
  s.values[5] = std::nullopt;
  const auto gap = monthly_stats(s, 2001);
  EXPECT_EQ(gap[3].missing, 1u);
  EXPECT_EQ(gap[3].days, 29u);
  EXPECT_DOUBLE_EQ(gap[3].mean, 31.0 / 29.0);
  EXPECT_TRUE(gap[4].empty);
}

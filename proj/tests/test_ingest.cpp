#include "tvvine/ingest.hpp"
#include "tvvine/rng.hpp"
#include "tvvine/distributions.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace tvvine;
using namespace tvvine::ingest;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = dist::normal_quantile(rng.uniform());
  return x;
}

Date ymd(int y, unsigned m, unsigned d) { return std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}; }

}  // namespace

TEST(LoadPanel, ThreeRowsTwoSeries) {
  auto p = parse_panel("date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n2020-01-03,5,6\n");
  EXPECT_EQ(p.length(), 3u);
  ASSERT_EQ(p.width(), 2u);
  EXPECT_EQ(p.series[1].name, "b");
  EXPECT_DOUBLE_EQ(p.series[1].values[2], 6.0);
}

TEST(LoadPanel, BadCellNamesRow) {
  const std::string csv = "date,a\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n2020-01-04,4\n2020-01-05,x\n";
  try {
    (void)parse_panel(csv);
    FAIL() << "expected an error";
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find("row 5"), std::string::npos) << e.what();
  }
}

TEST(LoadPanel, UnorderedDatesAreSorted) {
  auto p = parse_panel("date,a\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n");
  EXPECT_EQ(p.dates[0], ymd(2020, 1, 1));
  EXPECT_EQ(p.dates[2], ymd(2020, 1, 3));
  EXPECT_EQ(p.series[0].values, (std::vector<double>{1, 2, 3}));
}

TEST(LoadPanel, DuplicateDatesRejected) {
  EXPECT_THROW((void)parse_panel("date,a\n2020-01-01,1\n2020-01-01,2\n"), IngestError);
}

TEST(LoadPanel, MissingFileAndEmptyFile) {
  EXPECT_THROW((void)load_panel("/nonexistent/file.csv"), IngestError);
  const auto path = std::filesystem::temp_directory_path() / "tvvine_empty.csv";
  std::ofstream(path).close();
  EXPECT_THROW((void)load_panel(path.string()), IngestError);
}

TEST(LoadPanel, ColumnSchemaSelects) {
  auto p = parse_panel("date,a,b,c\n2020-01-01,1,2,3\n2020-01-02,4,5,6\n", ColumnSchema{{"c", "a"}});
  ASSERT_EQ(p.width(), 2u);
  EXPECT_EQ(p.series[0].name, "c");
  EXPECT_THROW((void)parse_panel("date,a\n2020-01-01,1\n", ColumnSchema{{"zz"}}), IngestError);
}

TEST(LoadPanel, WriteReadRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "tvvine_rt.csv").string();
  std::vector<Date> dates{ymd(2021, 3, 1), ymd(2021, 3, 2)};
  std::vector<NamedSeries> s{{"x", {0.1 + 0.2, 1.0 / 3.0}}};
  write_panel(path, dates, s);
  auto p = load_panel(path);
  EXPECT_EQ(p.dates, dates);
  EXPECT_EQ(p.series[0].values, s[0].values);
}

TEST(AlignCommonDates, Cases) {
  auto a = parse_panel("date,a\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n");
  auto b = parse_panel("date,b\n2020-01-02,5\n2020-01-03,6\n2020-01-04,7\n");
  std::vector<RawPanel> ab{a, b};
  auto m = align_common_dates(ab);
  ASSERT_EQ(m.length(), 2u);
  EXPECT_EQ(m.dates[0], ymd(2020, 1, 2));
  EXPECT_EQ(m.width(), 2u);
  EXPECT_EQ(m.series[1].values, (std::vector<double>{5, 6}));

  std::vector<RawPanel> same{a, a};
  EXPECT_EQ(align_common_dates(same).length(), 3u);
  EXPECT_EQ(align_common_dates(same).width(), 2u);

  auto c = parse_panel("date,c\n2021-01-01,1\n2021-01-02,2\n");
  std::vector<RawPanel> disjoint{a, c};
  EXPECT_THROW((void)align_common_dates(disjoint), std::exception);
}

TEST(AlignCommonDates, OutputDatesSubsetOfInputs) {
  auto a = parse_panel("date,a\n2020-01-01,1\n2020-01-02,2\n2020-01-04,3\n2020-01-05,3\n");
  auto b = parse_panel("date,b\n2020-01-02,5\n2020-01-04,6\n2020-01-05,7\n2020-01-09,7\n");
  std::vector<RawPanel> ab{a, b};
  auto m = align_common_dates(ab);
  for (const auto& d : m.dates) {
    EXPECT_NE(std::find(a.dates.begin(), a.dates.end(), d), a.dates.end());
    EXPECT_NE(std::find(b.dates.begin(), b.dates.end(), d), b.dates.end());
  }
}

TEST(ComputeIndicator, Examples) {
  RawPanel p;
  p.dates = {ymd(2020, 1, 1), ymd(2020, 1, 2), ymd(2020, 1, 3)};
  p.series = {{"c", {2, 2, 2}}, {"e", {1, std::exp(1.0), std::exp(1.0)}}};
  auto r = compute_indicator(p);
  EXPECT_EQ(r.length(), 2u);
  EXPECT_EQ(r.column(0), (std::vector<double>{0, 0}));
  EXPECT_DOUBLE_EQ(r.column(1)[0], 1.0);
  EXPECT_EQ(r.dates[0], ymd(2020, 1, 2));

  p.series[0].values[1] = 0.0;
  EXPECT_THROW((void)compute_indicator(p), std::exception);
}

TEST(ComputeIndicator, CumulativeSumRecoversLevels) {
  RawPanel p;
  SplitMix64 rng(3);
  double level = 2.5;
  for (int t = 0; t < 300; ++t) {
    p.dates.push_back(std::chrono::sys_days{ymd(2019, 1, 1)} + std::chrono::days{t});
    level *= std::exp(0.02 * (rng.uniform() - 0.5));
    if (p.series.empty()) p.series.push_back({"x", {}});
    p.series[0].values.push_back(level);
  }
  auto r = compute_indicator(p);
  double acc = std::log(p.series[0].values[0]);
  for (std::size_t t = 0; t < r.length(); ++t) {
    acc += r.column(0)[t];
    EXPECT_NEAR(std::exp(acc), p.series[0].values[t + 1], 1e-10 * p.series[0].values[t + 1]);
  }
}

TEST(Describe, SymmetricSequence) {
  std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
  auto d = describe(x, 2);
  EXPECT_DOUBLE_EQ(d.mean, 4.5);
  EXPECT_NEAR(d.skewness, 0.0, 1e-14);
  EXPECT_NEAR(d.sd, std::sqrt(6.0), 1e-12);
  // m4/m2^2 for 1..8: m2 = 5.25, m4 = 48.5625
  EXPECT_NEAR(d.kurtosis, 48.5625 / (5.25 * 5.25), 1e-12);
}

TEST(Describe, NormalKurtosisNearThree) {
  auto d = describe(normals(10000, 11));
  EXPECT_GE(d.kurtosis, 2.8);
  EXPECT_LE(d.kurtosis, 3.2);
}

TEST(Describe, ConstantSeriesRejected) {
  std::vector<double> x(8, 1.0);
  EXPECT_THROW((void)describe(x), std::exception);
}

TEST(Describe, PermutationInvariant) {
  auto x = normals(500, 5);
  auto y = x;
  std::reverse(y.begin(), y.end());
  std::rotate(y.begin(), y.begin() + 17, y.end());
  auto a = describe(x), b = describe(y);
  EXPECT_NEAR(a.mean, b.mean, 1e-14);
  EXPECT_NEAR(a.sd, b.sd, 1e-12);
  EXPECT_NEAR(a.skewness, b.skewness, 1e-10);
  EXPECT_NEAR(a.kurtosis, b.kurtosis, 1e-10);
}

TEST(LjungBox, MatchesDirectFormula) {
  auto x = normals(300, 9);
  const std::size_t n = x.size(), lags = 5;
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double c0 = 0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  double q = 0;
  for (std::size_t k = 1; k <= lags; ++k) {
    double ck = 0;
    for (std::size_t t = k; t < n; ++t) ck += (x[t] - mean) * (x[t - k] - mean);
    const double r = ck / c0;
    q += r * r / double(n - k);
  }
  q *= double(n) * double(n + 2);
  auto lb = ljung_box(x, lags);
  EXPECT_NEAR(lb.statistic, q, 1e-9);
  EXPECT_NEAR(lb.p_value, dist::chi_squared_sf(q, lags), 1e-12);
}

TEST(LjungBox, UniformNoisePassesMostSeeds) {
  int pass = 0;
  for (int s = 0; s < 20; ++s) {
    SplitMix64 rng(100 + s);
    std::vector<double> x(2000);
    for (auto& v : x) v = rng.uniform();
    auto r = ljung_box(x, 10);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    pass += r.p_value > 0.05;
  }
  EXPECT_GE(pass, 17);
}

TEST(LjungBox, Ar1Detected) {
  auto e = normals(2000, 21);
  std::vector<double> x(e.size());
  x[0] = e[0];
  for (std::size_t t = 1; t < x.size(); ++t) x[t] = 0.9 * x[t - 1] + e[t];
  EXPECT_LT(ljung_box(x, 10).p_value, 1e-3);
  std::vector<double> flat(100, 2.0);
  EXPECT_THROW((void)ljung_box(flat, 10), std::exception);
}

TEST(ArchLm, NoiseVersusGarch) {
  int pass = 0;
  for (int s = 0; s < 20; ++s) pass += arch_lm_test(normals(2000, 300 + s), 10).p_value > 0.05;
  EXPECT_GE(pass, 17);

  auto z = normals(2000, 77);
  std::vector<double> x(z.size());
  double h = 1.0, prev = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    h = 0.05 + 0.15 * prev * prev + 0.8 * h;
    x[t] = std::sqrt(h) * z[t];
    prev = x[t];
  }
  auto r = arch_lm_test(x, 10);
  EXPECT_LT(r.p_value, 1e-3);
  EXPECT_GE(r.statistic, 0.0);

  std::vector<double> flat(100, 1.0);
  EXPECT_THROW((void)arch_lm_test(flat, 10), std::exception);
}

TEST(Dates, ParseFormat) {
  EXPECT_EQ(format_date(parse_date("2018-01-02")), "2018-01-02");
  EXPECT_THROW((void)parse_date("2018-13-02"), std::exception);
  EXPECT_THROW((void)parse_date("yesterday"), std::exception);
}

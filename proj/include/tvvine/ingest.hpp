#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvvine::ingest {

using Date = std::chrono::year_month_day;

/// Raised for malformed or inconsistent input files. Carries row/column
/// context in its message.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedSeries {
  std::string name;
  std::vector<double> values;
};

/// Date-aligned panel of raw levels, one series per entity.
struct RawPanel {
  std::vector<Date> dates;
  std::vector<NamedSeries> series;

  [[nodiscard]] std::size_t length() const { return dates.size(); }
  [[nodiscard]] std::size_t width() const { return series.size(); }
  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;
};

/// Log-difference panel: one row fewer than the RawPanel it came from.
struct IndicatorPanel {
  std::vector<Date> dates;
  std::vector<NamedSeries> series;

  [[nodiscard]] std::size_t length() const { return dates.size(); }
  [[nodiscard]] std::size_t width() const { return series.size(); }
  [[nodiscard]] const std::vector<double>& column(std::size_t i) const { return series.at(i).values; }
};

/// Column selection for load_panel. An empty list keeps every value column.
struct ColumnSchema {
  std::vector<std::string> columns;
};

struct DescriptiveStats {
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;  // Pearson (non-excess)
  double ljung_box_p = 1.0;
  double arch_lm_p = 1.0;
};

struct TestStatistic {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline constexpr std::size_t kDefaultDiagnosticLag = 10;

[[nodiscard]] Date parse_date(std::string_view text);
[[nodiscard]] std::string format_date(const Date& d);

/// Reads a CSV with a header row, an ISO-8601 date column and numeric value
/// columns. Rows are returned in ascending date order.
[[nodiscard]] RawPanel load_panel(const std::string& path, const ColumnSchema& schema = {});
[[nodiscard]] RawPanel parse_panel(std::string_view csv_text, const ColumnSchema& schema = {},
                                   const std::string& source = "<memory>");
void write_panel(const std::string& path, const std::vector<Date>& dates, const std::vector<NamedSeries>& series);

/// Merges panels on the intersection of their date sets.
[[nodiscard]] RawPanel align_common_dates(std::span<const RawPanel> panels);

/// Lr_t = ln L_t - ln L_{t-1} per series.
[[nodiscard]] IndicatorPanel compute_indicator(const RawPanel& panel);

[[nodiscard]] DescriptiveStats describe(std::span<const double> series, std::size_t lags = kDefaultDiagnosticLag);

/// Q = n(n+2) sum_{k<=lags} r_k^2 / (n-k), chi-square(lags) p-value.
[[nodiscard]] TestStatistic ljung_box(std::span<const double> series, std::size_t lags);

/// Engle's LM test: n R^2 from regressing squared demeaned values on `lags` of themselves.
[[nodiscard]] TestStatistic arch_lm_test(std::span<const double> series, std::size_t lags);

}  // namespace tvvine::ingest

#include "tvvine/ingest.hpp"

#include "tvvine/distributions.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace tvvine::ingest {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

void require_min_length(std::span<const double> x, std::size_t n, const char* what) {
  if (x.size() < n) throw std::invalid_argument(std::string(what) + ": series too short");
}

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

}  // namespace

void RawPanel::validate() const {
  if (dates.size() < 2) throw std::invalid_argument("RawPanel: fewer than 2 rows");
  for (const auto& s : series) {
    if (s.values.size() != dates.size()) throw std::invalid_argument("RawPanel: series '" + s.name + "' length mismatch");
  }
  for (std::size_t i = 1; i < dates.size(); ++i) {
    if (!(dates[i - 1] < dates[i])) throw std::invalid_argument("RawPanel: dates not strictly ascending");
  }
}

Date parse_date(std::string_view text) {
  text = trim(text);
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse_part = [&](std::string_view part, auto& value) {
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    return ec == std::errc() && p == part.data() + part.size();
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_part(text.substr(0, 4), y) ||
      !parse_part(text.substr(5, 2), m) || !parse_part(text.substr(8, 2), d)) {
    throw IngestError("invalid ISO-8601 date '" + std::string(text) + "'");
  }
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw IngestError("invalid calendar date '" + std::string(text) + "'");
  return date;
}

std::string format_date(const Date& d) {
  std::ostringstream os;
  os << std::setfill('0') << std::setw(4) << static_cast<int>(d.year()) << '-' << std::setw(2)
     << static_cast<unsigned>(d.month()) << '-' << std::setw(2) << static_cast<unsigned>(d.day());
  return os.str();
}

RawPanel parse_panel(std::string_view text, const ColumnSchema& schema, const std::string& source) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto pos = text.find('\n', start);
      auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
      if (!trim(line).empty()) lines.push_back(line);
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  }
  if (lines.empty()) throw IngestError(source + ": empty file");
  const auto header = split_fields(lines.front());
  if (header.size() < 2) throw IngestError(source + ": header needs a date column and at least one value column");

  std::vector<std::size_t> picked;
  if (schema.columns.empty()) {
    for (std::size_t c = 1; c < header.size(); ++c) picked.push_back(c);
  } else {
    for (const auto& name : schema.columns) {
      auto it = std::find(header.begin() + 1, header.end(), name);
      if (it == header.end()) throw IngestError(source + ": column '" + name + "' not found in header");
      picked.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }

  struct Row {
    Date date;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    const std::string where = source + ": row " + std::to_string(r) + " (line " + std::to_string(r + 1) + ")";
    if (fields.size() != header.size()) {
      throw IngestError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    Row row;
    try {
      row.date = parse_date(fields[0]);
    } catch (const IngestError& e) {
      throw IngestError(where + ", column '" + std::string(header[0]) + "': " + e.what());
    }
    for (auto c : picked) {
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw IngestError(where + ", column '" + std::string(header[c]) + "': cannot parse '" + std::string(fields[c]) +
                          "' as a number");
      }
      row.values.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].date == rows[i - 1].date) throw IngestError(source + ": duplicate date " + format_date(rows[i].date));
  }

  RawPanel panel;
  for (auto c : picked) panel.series.push_back({std::string(header[c]), {}});
  for (auto& row : rows) {
    panel.dates.push_back(row.date);
    for (std::size_t k = 0; k < picked.size(); ++k) panel.series[k].values.push_back(row.values[k]);
  }
  return panel;
}

RawPanel load_panel(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_panel(buf.str(), schema, path);
}

void write_panel(const std::string& path, const std::vector<Date>& dates, const std::vector<NamedSeries>& series) {
  std::ofstream out(path);
  if (!out) throw IngestError(path + ": cannot open for writing");
  out << "date";
  for (const auto& s : series) out << ',' << s.name;
  out << '\n' << std::setprecision(17);
  for (std::size_t t = 0; t < dates.size(); ++t) {
    out << format_date(dates[t]);
    for (const auto& s : series) out << ',' << s.values.at(t);
    out << '\n';
  }
  if (!out) throw IngestError(path + ": write failed");
}

RawPanel align_common_dates(std::span<const RawPanel> panels) {
  if (panels.size() < 2) throw std::invalid_argument("align_common_dates: need at least 2 panels");
  std::set<Date> common(panels[0].dates.begin(), panels[0].dates.end());
  for (std::size_t p = 1; p < panels.size(); ++p) {
    std::set<Date> next;
    for (const auto& d : panels[p].dates) {
      if (common.count(d)) next.insert(d);
    }
    common = std::move(next);
  }
  if (common.empty()) throw IngestError("align_common_dates: empty date intersection");
  if (common.size() < 2) throw IngestError("align_common_dates: date intersection has fewer than 2 dates");

  RawPanel out;
  out.dates.assign(common.begin(), common.end());
  for (const auto& panel : panels) {
    std::map<Date, std::size_t> index;
    for (std::size_t i = 0; i < panel.dates.size(); ++i) index[panel.dates[i]] = i;
    for (const auto& s : panel.series) {
      NamedSeries merged{s.name, {}};
      merged.values.reserve(out.dates.size());
      for (const auto& d : out.dates) merged.values.push_back(s.values.at(index.at(d)));
      out.series.push_back(std::move(merged));
    }
  }
  return out;
}

IndicatorPanel compute_indicator(const RawPanel& panel) {
  panel.validate();
  IndicatorPanel out;
  out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
  for (const auto& s : panel.series) {
    NamedSeries lr{s.name, {}};
    lr.values.reserve(panel.length() - 1);
    for (std::size_t t = 0; t < s.values.size(); ++t) {
      if (!(s.values[t] > 0.0)) {
        throw std::domain_error("compute_indicator: non-positive value in series '" + s.name + "' on " +
                                format_date(panel.dates[t]));
      }
      if (t > 0) lr.values.push_back(std::log(s.values[t]) - std::log(s.values[t - 1]));
    }
    out.series.push_back(std::move(lr));
  }
  return out;
}

DescriptiveStats describe(std::span<const double> x, std::size_t lags) {
  require_min_length(x, 8, "describe");
  const double n = static_cast<double>(x.size());
  DescriptiveStats st;
  st.mean = mean_of(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - st.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  if (m2 <= 0.0) throw std::domain_error("describe: constant series, skewness and kurtosis undefined");
  st.sd = std::sqrt(m2 / (n - 1.0));
  m2 /= n;
  m3 /= n;
  m4 /= n;
  st.skewness = m3 / std::pow(m2, 1.5);
  st.kurtosis = m4 / (m2 * m2);
  const std::size_t lag = std::min(lags, (x.size() - 1) / 2);
  st.ljung_box_p = ljung_box(x, lag).p_value;
  st.arch_lm_p = arch_lm_test(x, lag).p_value;
  return st;
}

TestStatistic ljung_box(std::span<const double> x, std::size_t lags) {
  if (lags == 0) throw std::invalid_argument("ljung_box: lags must be positive");
  if (2 * lags >= x.size()) throw std::invalid_argument("ljung_box: lags must be below length/2");
  const double m = mean_of(x);
  double denom = 0.0;
  for (double v : x) denom += (v - m) * (v - m);
  if (denom <= 0.0) throw std::domain_error("ljung_box: zero-variance series");
  const std::size_t n = x.size();
  double q = 0.0;
  for (std::size_t k = 1; k <= lags; ++k) {
    double num = 0.0;
    for (std::size_t t = k; t < n; ++t) num += (x[t] - m) * (x[t - k] - m);
    const double rho = num / denom;
    q += rho * rho / static_cast<double>(n - k);
  }
  q *= static_cast<double>(n) * static_cast<double>(n + 2);
  return {q, dist::chi_squared_sf(q, static_cast<double>(lags))};
}

TestStatistic arch_lm_test(std::span<const double> x, std::size_t lags) {
  if (lags == 0) throw std::invalid_argument("arch_lm_test: lags must be positive");
  if (2 * lags >= x.size()) throw std::invalid_argument("arch_lm_test: lags must be below length/2");
  const double m = mean_of(x);
  std::vector<double> e2(x.size());
  std::transform(x.begin(), x.end(), e2.begin(), [m](double v) { return (v - m) * (v - m); });

  const auto rows = static_cast<Eigen::Index>(x.size() - lags);
  const auto cols = static_cast<Eigen::Index>(lags + 1);
  Eigen::MatrixXd design(rows, cols);
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t t = static_cast<std::size_t>(r) + lags;
    y(r) = e2[t];
    design(r, 0) = 1.0;
    for (std::size_t k = 1; k <= lags; ++k) design(r, static_cast<Eigen::Index>(k)) = e2[t - k];
  }
  const double ybar = y.mean();
  const double tss = (y.array() - ybar).square().sum();
  if (!(tss > 1e-300 * static_cast<double>(rows))) throw std::domain_error("arch_lm_test: singular regression (constant squared series)");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) throw std::domain_error("arch_lm_test: singular regression design");
  const Eigen::VectorXd beta = qr.solve(y);
  const double ssr = (y - design * beta).squaredNorm();
  const double r2 = std::clamp(1.0 - ssr / tss, 0.0, 1.0);
  const double lm = static_cast<double>(rows) * r2;
  return {lm, dist::chi_squared_sf(lm, static_cast<double>(lags))};
}

}  // namespace tvvine::ingest

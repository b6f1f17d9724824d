#include "tvvine/risk.hpp"

#include "tvvine/diag.hpp"
#include "tvvine/distributions.hpp"
#include "tvvine/parallel.hpp"
#include "tvvine/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tvvine::risk {

namespace {

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string full(double x) { return fmt("%.17g", x); }
std::string six(double x) { return fmt("%.6g", x); }

// x ln(x / y) with the 0 ln 0 = 0 convention.
double xlogy_ratio(double count, double p_model, double p_hat) {
  if (count == 0.0) return 0.0;
  return count * (std::log(p_model) - std::log(p_hat));
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

void WeightVector::validate() const {
  if (w.empty()) throw std::invalid_argument("weights: empty vector");
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("weights: entries must be finite and non-negative");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("weights: entries must sum to 1");
}

WeightVector equal_weights(std::size_t n) {
  if (n == 0) throw std::invalid_argument("equal_weights: n must be positive");
  return WeightVector{std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

WeightVector gdp_weights(std::span<const double> g) {
  if (g.empty()) throw std::invalid_argument("gdp_weights: no entries");
  double s = 0.0;
  for (double x : g) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("gdp_weights: entries must be positive");
    s += x;
  }
  WeightVector w;
  for (double x : g) w.w.push_back(x / s);
  return w;
}

std::vector<double> portfolio_aggregate(const std::vector<std::vector<double>>& draws, const WeightVector& weights) {
  if (draws.size() != weights.w.size()) throw std::invalid_argument("portfolio_aggregate: weight dimension mismatch");
  if (draws.empty()) return {};
  const std::size_t m = draws.front().size();
  for (const auto& d : draws)
    if (d.size() != m) throw std::invalid_argument("portfolio_aggregate: unequal draw counts");
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < draws.size(); ++i)
    for (std::size_t k = 0; k < m; ++k) out[k] += weights.w[i] * draws[i][k];
  return out;
}

double var_quantile(std::span<const double> draws, double alpha) {
  if (draws.empty()) throw std::invalid_argument("var_quantile: empty draws");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("var_quantile: alpha must be in (0, 1)");
  const std::size_t m = draws.size();
  auto idx = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(m) - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, m);
  std::vector<double> v(draws.begin(), draws.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx - 1), v.end());
  return v[idx - 1];
}

std::size_t VaRSeries::exceedances() const { return static_cast<std::size_t>(std::count(exceed.begin(), exceed.end(), true)); }

void VaRSeries::validate() const {
  if (var.size() != realized.size() || var.size() != exceed.size() || (!dates.empty() && dates.size() != var.size()))
    throw std::invalid_argument("VaR series: length mismatch");
}

KupiecResult kupiec(std::size_t N, std::size_t T, double alpha) {
  if (T == 0) throw std::invalid_argument("kupiec: T must be positive");
  if (N > T) throw std::invalid_argument("kupiec: N exceeds T");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("kupiec: alpha must be in (0, 1)");
  const double p = 1.0 - alpha;
  const double n = static_cast<double>(N), t = static_cast<double>(T);
  const double rate = n / t;
  const double ll = xlogy_ratio(t - n, 1.0 - p, 1.0 - rate) + xlogy_ratio(n, p, rate);
  KupiecResult r;
  r.N = N;
  r.T = T;
  r.alpha = alpha;
  r.fail_rate = rate;
  r.LR = std::max(0.0, -2.0 * ll);
  r.p_value = dist::chi_squared_sf(r.LR, 1.0);
  return r;
}

LossMetrics loss_metrics(const VaRSeries& s) {
  s.validate();
  if (s.var.empty()) throw std::invalid_argument("loss_metrics: empty series");
  LossMetrics m;
  double excess = 0.0, num = 0.0, den = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < s.var.size(); ++t) {
    if (s.exceed[t]) {
      excess += s.realized[t] - s.var[t];
      ++count;
    }
    num += std::abs(s.var[t] - s.realized[t]);
    den += std::abs(s.realized[t]);
  }
  m.no_exceedances = count == 0;
  m.loss = count ? excess / static_cast<double>(count) : 0.0;
  m.mad = num == 0.0 ? 0.0 : num / den;
  return m;
}

marginals::UniformPanel uniform_panel(const std::vector<marginals::MarginalFit>& margs, marginals::PitMode mode) {
  marginals::UniformPanel p;
  p.mode = mode;
  for (const auto& m : margs) p.columns.push_back(marginals::pit(m, mode));
  p.validate();
  return p;
}

BacktestReport run_backtest(const vine::FittedTVVine& fitted, const std::vector<marginals::MarginalFit>& margs,
                            const ingest::IndicatorPanel& data, const BacktestOptions& opt) {
  const std::size_t n = data.width();
  const std::size_t L = data.length();
  if (margs.size() != n || static_cast<std::size_t>(fitted.structure.n) != n)
    throw std::invalid_argument("run_backtest: data, marginals and vine dimensions differ");
  for (std::size_t i = 0; i < n; ++i)
    if (margs[i].z.size() != L)
      throw std::invalid_argument("run_backtest: marginal for series '" + data.series[i].name +
                                  "' has no residual path on this data");
  if (fitted.length != L) throw std::invalid_argument("run_backtest: vine paths do not cover the data; refilter first");
  if (opt.window == 0 || opt.window > L) throw std::invalid_argument("run_backtest: window must be in [1, data length]");
  if (opt.window < 250) warn("run_backtest: window " + std::to_string(opt.window) + " is below the 250-date minimum");
  if (opt.n_sims == 0) throw std::invalid_argument("run_backtest: n_sims must be positive");
  if (opt.n_sims < 100) warn("run_backtest: fewer than 100 simulations per date");
  for (double a : opt.alphas)
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("run_backtest: alpha outside (0, 1)");
  const WeightVector weights = opt.weights.w.empty() ? equal_weights(n) : opt.weights;
  weights.validate();
  if (weights.w.size() != n) throw std::invalid_argument("run_backtest: weight dimension mismatch");

  // One-step-ahead marginal moments on the full sample.
  std::vector<marginals::FilterPaths> mpaths;
  std::vector<std::vector<double>> sorted_z;
  std::vector<dist::SkewStudentT> sst;
  for (std::size_t i = 0; i < n; ++i) {
    mpaths.push_back(marginals::filter(margs[i], data.column(i)));
    sorted_z.push_back(marginals::sorted_residuals(margs[i]));
    sst.emplace_back(margs[i].nu, margs[i].xi_skew);
  }
  const auto mode = fitted.pit_mode;

  const std::size_t start = L - opt.window;
  std::vector<double> realized(opt.window);
  for (std::size_t k = 0; k < opt.window; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += weights.w[i] * data.column(i)[start + k];
    realized[k] = s;
  }

  // Vine used for each date: the full-sample fit, or block-wise refits.
  std::vector<vine::FittedTVVine> vines;
  std::vector<std::size_t> vine_of(opt.window, 0);
  if (opt.refit_every == 0) {
    vines.push_back(fitted);
  } else {
    const auto full_panel = uniform_panel(margs, mode);
    for (std::size_t b = 0; b * opt.refit_every < opt.window; ++b) {
      const std::size_t t0 = start + b * opt.refit_every;
      std::vector<marginals::MarginalFit> sub = margs;
      for (auto& m : sub) m.z.resize(t0);
      auto fv = vine::fit_sequential(uniform_panel(sub, mode), opt.refit);
      vines.push_back(vine::refilter(fv, full_panel));
      for (std::size_t k = b * opt.refit_every; k < std::min(opt.window, (b + 1) * opt.refit_every); ++k) vine_of[k] = b;
    }
  }

  std::vector<std::vector<double>> var(opt.alphas.size(), std::vector<double>(opt.window));
  std::atomic<std::size_t> clamped{0};
  parallel_for(opt.window, static_cast<unsigned>(std::max(1, opt.threads)), [&](std::size_t k) {
    const std::size_t t = start + k;
    vine::Sampler sampler(vines[vine_of[k]]);
    sampler.set_time(t);
    std::vector<double> w(n), u(n), scratch, port(opt.n_sims);
    std::size_t local_clamped = 0;
    for (std::size_t d = 0; d < opt.n_sims; ++d) {
      SplitMix64 rng(substream_seed(opt.seed, t, d));
      for (auto& x : w) x = rng.uniform();
      try {
        sampler.draw(w, u, scratch);
      } catch (const std::exception& e) {
        throw std::runtime_error("run_backtest: simulation failed at " + ingest::format_date(data.dates[t]) + ": " +
                                 e.what());
      }
      double l = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double z;
        if (mode == marginals::PitMode::Parametric) {
          z = sst[i].quantile(u[i]);
        } else {
          bool c = false;
          z = marginals::empirical_quantile(sorted_z[i], u[i], &c);
          local_clamped += c ? 1 : 0;
        }
        l += weights.w[i] * (mpaths[i].cond_mean[t] + mpaths[i].sigma[t] * z);
      }
      port[d] = l;
    }
    std::sort(port.begin(), port.end());
    for (std::size_t a = 0; a < opt.alphas.size(); ++a) var[a][k] = var_quantile(port, opt.alphas[a]);
    clamped += local_clamped;
  });

  BacktestReport rep;
  rep.clamped_draws = clamped.load();
  if (rep.clamped_draws > 0)
    warn("run_backtest: " + std::to_string(rep.clamped_draws) +
         " simulated uniforms fell outside the empirical residual hull and were clamped");
  for (std::size_t a = 0; a < opt.alphas.size(); ++a) {
    VaRSeries s;
    s.alpha = opt.alphas[a];
    s.dates.assign(data.dates.begin() + static_cast<std::ptrdiff_t>(start), data.dates.end());
    s.var = var[a];
    s.realized = realized;
    s.exceed.resize(opt.window);
    for (std::size_t k = 0; k < opt.window; ++k) s.exceed[k] = s.realized[k] > s.var[k];
    rep.kupiec.push_back(kupiec(s.exceedances(), opt.window, s.alpha));
    rep.loss.push_back(loss_metrics(s));
    rep.series.push_back(std::move(s));
  }
  return rep;
}

std::string var_csv_name(double alpha) { return "var_" + fmt("%g", alpha) + ".csv"; }

void emit_report(const BacktestReport& rep, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());
  for (const auto& s : rep.series) {
    auto out = open_out(fs::path(out_dir) / var_csv_name(s.alpha));
    out << "date,var,realized,exceed\n";
    for (std::size_t t = 0; t < s.var.size(); ++t)
      out << (t < s.dates.size() ? ingest::format_date(s.dates[t]) : std::to_string(t)) << ',' << full(s.var[t]) << ','
          << full(s.realized[t]) << ',' << (s.exceed[t] ? 1 : 0) << '\n';
    if (!out) throw std::runtime_error("write failed for " + var_csv_name(s.alpha));
  }
  auto sum = open_out(fs::path(out_dir) / "summary.csv");
  sum << "# LR = -2 ln[(1-p)^(T-N) p^N / ((1-N/T)^(T-N) (N/T)^N)], p = 1 - alpha; p_value from chi-square(1)\n";
  sum << "# " << kLossFormula << '\n';
  sum << "# " << kMadFormula << '\n';
  for (std::size_t a = 0; a < rep.series.size(); ++a)
    if (rep.loss[a].no_exceedances) sum << "# alpha " << six(rep.series[a].alpha) << ": no exceedances, loss set to 0\n";
  sum << "alpha,fail_times,fail_rate,p_value,LR,loss,mad\n";
  for (std::size_t a = 0; a < rep.series.size(); ++a) {
    const auto& k = rep.kupiec[a];
    sum << six(rep.series[a].alpha) << ',' << k.N << ',' << six(k.fail_rate) << ',' << six(k.p_value) << ','
        << six(k.LR) << ',' << six(rep.loss[a].loss) << ',' << six(rep.loss[a].mad) << '\n';
  }
  if (!sum) throw std::runtime_error("write failed for summary.csv");
  auto svg = open_out(fs::path(out_dir) / "var_chart.svg");
  svg << render_svg(rep);
  if (!svg) throw std::runtime_error("write failed for var_chart.svg");
}

VaRSeries read_var_csv(const std::string& path, double alpha) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  VaRSeries s;
  s.alpha = alpha;
  std::string line;
  std::getline(in, line);
  if (line != "date,var,realized,exceed") throw std::runtime_error(path + ": unexpected header");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string d, v, r, e;
    if (!std::getline(ss, d, ',') || !std::getline(ss, v, ',') || !std::getline(ss, r, ',') || !std::getline(ss, e))
      throw std::runtime_error(path + ": malformed row " + std::to_string(row));
    s.dates.push_back(ingest::parse_date(d));
    s.var.push_back(std::stod(v));
    s.realized.push_back(std::stod(r));
    s.exceed.push_back(e == "1");
  }
  return s;
}

std::string render_svg(const BacktestReport& rep) {
  constexpr double W = 1200, H = 600, left = 80, right = 220, top = 40, bottom = 60;
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1200\" height=\"600\" viewBox=\"0 0 1200 600\">\n";
  os << "<rect width=\"1200\" height=\"600\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">Portfolio VaR backtest</text>\n";
  if (rep.series.empty()) {
    os << "</svg>\n";
    return os.str();
  }
  const auto& base = rep.series.front();
  const std::size_t T = base.realized.size();
  double lo = 0.0, hi = 0.0;
  bool first = true;
  auto widen = [&](double x) {
    if (!std::isfinite(x)) return;
    if (first) lo = hi = x, first = false;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  };
  for (double x : base.realized) widen(x);
  for (const auto& s : rep.series)
    for (double x : s.var) widen(x);
  if (hi <= lo) hi = lo + 1.0;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](std::size_t t) { return left + (T > 1 ? pw * static_cast<double>(t) / static_cast<double>(T - 1) : 0.0); };
  auto py = [&](double y) { return top + ph * (1.0 - (y - lo) / (hi - lo)); };

  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4 << "\" font-family=\"sans-serif\" font-size=\"11\" "
       << "text-anchor=\"end\">" << six(y) << "</text>\n";
  }
  if (!base.dates.empty()) {
    os << "<text x=\"" << left << "\" y=\"" << H - 30 << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << ingest::format_date(base.dates.front()) << "</text>\n";
    os << "<text x=\"" << W - right << "\" y=\"" << H - 30 << "\" font-family=\"sans-serif\" font-size=\"11\" "
       << "text-anchor=\"end\">" << ingest::format_date(base.dates.back()) << "</text>\n";
  }
  auto polyline = [&](const std::vector<double>& ys, const char* color, const std::string& cls, double width) {
    os << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
       << "\" points=\"";
    for (std::size_t t = 0; t < ys.size(); ++t) os << (t ? " " : "") << fmt("%.2f", px(t)) << ',' << fmt("%.2f", py(ys[t]));
    os << "\"/>\n";
  };
  polyline(base.realized, "#555555", "realized", 1.0);
  for (std::size_t a = 0; a < rep.series.size(); ++a)
    polyline(rep.series[a].var, palette[a % 7], "var", 1.5);

  // Legend.
  const double lx = W - right + 20;
  auto legend = [&](std::size_t row, const char* color, const std::string& label) {
    const double y = top + 20 + 22.0 * static_cast<double>(row);
    os << "<line x1=\"" << lx << "\" y1=\"" << y << "\" x2=\"" << lx + 30 << "\" y2=\"" << y << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << lx + 38 << "\" y=\"" << y + 4 << "\" font-family=\"sans-serif\" font-size=\"12\">" << label
       << "</text>\n";
  };
  legend(0, "#555555", "realized");
  for (std::size_t a = 0; a < rep.series.size(); ++a)
    legend(a + 1, palette[a % 7], "VaR " + six(rep.series[a].alpha));
  os << "</svg>\n";
  return os.str();
}

}  // namespace tvvine::risk

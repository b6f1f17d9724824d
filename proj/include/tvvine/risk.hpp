#pragma once

#include "tvvine/ingest.hpp"
#include "tvvine/marginals.hpp"
#include "tvvine/vine.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tvvine::risk {

/// Non-negative portfolio weights summing to one.
struct WeightVector {
  std::vector<double> w;
  void validate() const;
};

[[nodiscard]] WeightVector equal_weights(std::size_t n);
/// w_i = g_i / sum g. Throws std::invalid_argument on a non-positive entry.
[[nodiscard]] WeightVector gdp_weights(std::span<const double> gdp_totals);

/// Per draw k: L_k = sum_i w_i draws[i][k].
[[nodiscard]] std::vector<double> portfolio_aggregate(const std::vector<std::vector<double>>& draws,
                                                      const WeightVector& weights);

/// Element ceil(alpha M) (1-based) of the sorted draws.
[[nodiscard]] double var_quantile(std::span<const double> draws, double alpha);

struct VaRSeries {
  double alpha = 0.95;
  std::vector<ingest::Date> dates;
  std::vector<double> var;
  std::vector<double> realized;
  std::vector<bool> exceed;  // realized > var

  [[nodiscard]] std::size_t exceedances() const;
  void validate() const;
};

struct KupiecResult {
  std::size_t N = 0;
  std::size_t T = 0;
  double alpha = 0.0;
  double LR = 0.0;
  double p_value = 1.0;
  double fail_rate = 0.0;
};

/// Proportion-of-failures likelihood ratio with expected failure rate 1 - alpha.
[[nodiscard]] KupiecResult kupiec(std::size_t N, std::size_t T, double alpha);

struct LossMetrics {
  double loss = 0.0;  // mean of (realized - VaR) over exceedances
  double mad = 0.0;   // mean |VaR - realized| / mean |realized|
  bool no_exceedances = false;
};

inline constexpr const char* kLossFormula = "loss = mean over exceedance dates of (realized - VaR); 0 when there are none";
inline constexpr const char* kMadFormula = "mad = mean over all dates of |VaR - realized| / mean over all dates of |realized|";

[[nodiscard]] LossMetrics loss_metrics(const VaRSeries& s);

struct BacktestOptions {
  std::size_t window = 400;
  std::size_t n_sims = 1000;
  std::vector<double> alphas{0.90, 0.95, 0.99, 0.995};
  WeightVector weights;  // empty means equal weights
  std::uint64_t seed = 42;
  int threads = 1;
  std::size_t refit_every = 0;  // 0: filter the single full-sample vine
  vine::VineFitOptions refit;   // used when refit_every > 0
};

struct BacktestReport {
  std::vector<VaRSeries> series;  // one per alpha, input order
  std::vector<KupiecResult> kupiec;
  std::vector<LossMetrics> loss;
  std::size_t clamped_draws = 0;  // empirical inverse PIT values clamped to the hull
};

/// For each of the last `window` dates t: edge parameters and marginal
/// conditional moments use data through t-1, n_sims joint draws are mapped
/// back to indicator values and aggregated, and the VaR per alpha is the
/// order statistic of the simulated portfolio. `marginals` must carry
/// residual paths on `data` (see marginals::refresh_paths) and `fitted` must
/// have been fitted or refiltered on the matching pseudo-observations.
[[nodiscard]] BacktestReport run_backtest(const vine::FittedTVVine& fitted,
                                          const std::vector<marginals::MarginalFit>& marginals,
                                          const ingest::IndicatorPanel& data, const BacktestOptions& options);

/// Pseudo-observations of every series under `mode`.
[[nodiscard]] marginals::UniformPanel uniform_panel(const std::vector<marginals::MarginalFit>& marginals,
                                                    marginals::PitMode mode);

/// Writes var_<alpha>.csv per alpha, summary.csv and var_chart.svg into out_dir.
void emit_report(const BacktestReport& report, const std::string& out_dir);

[[nodiscard]] std::string var_csv_name(double alpha);
[[nodiscard]] VaRSeries read_var_csv(const std::string& path, double alpha);
[[nodiscard]] std::string render_svg(const BacktestReport& report);

}  // namespace tvvine::risk

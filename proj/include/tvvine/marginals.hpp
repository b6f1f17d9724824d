#pragma once

#include "tvvine/optim.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tvvine::marginals {

/// ARFIMA(p, d, q)-GARCH(a, b) orders. `a` counts ARCH (alpha) terms and
/// `b` counts GARCH (beta) terms.
struct MarginalOrder {
  int p = 1;
  int q = 0;
  bool use_frac_d = false;
  int a = 1;
  int b = 1;

  void validate() const;
  [[nodiscard]] std::string label() const;
  friend bool operator==(const MarginalOrder&, const MarginalOrder&) = default;
};

enum class PitMode { Empirical, Parametric };

[[nodiscard]] std::string_view pit_mode_name(PitMode m);
[[nodiscard]] PitMode parse_pit_mode(std::string_view s);

/// Fitted mean/variance recursion plus the in-sample paths.
/// Mean:     y_t = mu + sum phi_i y_{t-i} + sum theta_j eps_{t-j} + eps_t,  y = (1-L)^d r
/// Variance: sigma_t^2 = omega + sum alpha_i eps_{t-i}^2 + sum beta_j sigma_{t-j}^2
/// eps_t = sigma_t z_t with z_t standardized Fernandez-Steel skew-t(nu, xi_skew).
struct MarginalFit {
  std::string name;
  MarginalOrder order;
  double mu = 0.0;
  std::vector<double> phi;
  std::vector<double> theta;
  double d = 0.0;
  double omega = 1.0;
  std::vector<double> alpha;
  std::vector<double> beta;
  double nu = 8.0;
  double xi_skew = 1.0;
  std::size_t frac_truncation = 1000;

  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;

  std::vector<double> sigma;  // conditional sd path on the fitted data
  std::vector<double> z;      // standardized residuals

  [[nodiscard]] int n_params() const;
  void validate() const;
};

/// Column-major matrix of pseudo-observations in (0, 1).
struct UniformPanel {
  std::vector<std::vector<double>> columns;
  PitMode mode = PitMode::Empirical;

  [[nodiscard]] std::size_t width() const { return columns.size(); }
  [[nodiscard]] std::size_t length() const { return columns.empty() ? 0 : columns.front().size(); }
  void validate() const;
};

/// Weights pi_k of (1 - L)^d: pi_0 = 1, pi_k = pi_{k-1} (k - 1 - d) / k.
[[nodiscard]] std::vector<double> frac_diff_weights(double d, std::size_t count);

/// y_t = sum_{k=0}^{min(t, truncation)} pi_k x_{t-k}.
[[nodiscard]] std::vector<double> frac_diff(std::span<const double> x, double d, std::size_t truncation = 1000);

/// Streaming form of the fitted recursion. Starts from the unconditional
/// moments implied by the coefficients, so filtering any prefix of a series
/// reproduces the corresponding prefix of the full-sample filter.
class MarginalRecursion {
 public:
  explicit MarginalRecursion(const MarginalFit& fit);

  /// Conditional mean and sd of the next raw observation.
  [[nodiscard]] double next_mean() const;
  [[nodiscard]] double next_sigma() const { return std::sqrt(next_var_); }

  /// Feeds an observed raw value.
  void observe(double r);
  /// Generates r = next_mean + next_sigma * z, observes it and returns it.
  double step(double z);

 private:
  void refresh();

  const MarginalFit* fit_;
  std::vector<double> pi_;
  std::vector<double> r_, y_, eps_, var_;
  double y_pre_ = 0.0;
  double var_pre_ = 1.0;
  double next_y_mean_ = 0.0;
  double next_frac_ = 0.0;
  double next_var_ = 1.0;
};

struct FilterPaths {
  std::vector<double> cond_mean;  // E[r_t | r_{<t}]
  std::vector<double> sigma;      // sd[r_t | r_{<t}]
  std::vector<double> z;
  double loglik = 0.0;
};

/// Runs the recursion with fixed coefficients over `series`.
[[nodiscard]] FilterPaths filter(const MarginalFit& fit, std::span<const double> series);

/// Recomputes loglik, sigma and z on `series` with the stored coefficients.
void refresh_paths(MarginalFit& fit, std::span<const double> series);

struct MarginalFitOptions {
  optim::NelderMeadOptions nm{.ftol = 1e-9, .xtol = 1e-10, .max_evals = 6000, .initial_step = 0.1, .max_rebuilds = 6};
  int restarts = 3;
  std::uint64_t seed = 7;
  std::size_t frac_truncation = 1000;
};

/// Joint maximum likelihood over all coefficients. Warns when the series is
/// shorter than 200; throws std::runtime_error if no restart yields a finite
/// likelihood.
[[nodiscard]] MarginalFit fit_marginal(std::span<const double> series, const MarginalOrder& order,
                                       const MarginalFitOptions& options = {});

struct OrderCandidate {
  MarginalOrder order;
  double loglik = 0.0;
  double aic = 0.0;
  double ljung_box_p = 0.0;
  double arch_lm_p = 0.0;
  bool passes = false;
  bool failed = false;
  std::string error;
};

struct OrderSelection {
  MarginalOrder order;
  MarginalFit fit;
  std::vector<OrderCandidate> candidates;
  bool diagnostics_passed = false;
};

/// Minimum-AIC order among candidates whose residuals pass Ljung-Box (on z)
/// and ARCH-LM at 5%; falls back to overall minimum AIC with a warning.
[[nodiscard]] OrderSelection select_order(std::span<const double> series, std::span<const MarginalOrder> grid,
                                          const MarginalFitOptions& options = {}, std::size_t diagnostic_lag = 10);

/// p, q in {0,1,2}; (a, b) in {(1,0), (0,1), (1,1)}.
[[nodiscard]] std::vector<MarginalOrder> default_grid();

[[nodiscard]] std::vector<double> pit(const MarginalFit& fit, PitMode mode);

/// Empirical mode interpolates the fitted residual quantile function and
/// clamps outside its hull. When `clamped` is null a warning is raised for
/// clamped values, otherwise their count is added to *clamped.
[[nodiscard]] std::vector<double> inverse_pit(std::span<const double> u, const MarginalFit& fit, PitMode mode,
                                              std::size_t* clamped = nullptr);

/// Sorted fitted residuals, the support of the empirical inverse PIT.
[[nodiscard]] std::vector<double> sorted_residuals(const MarginalFit& fit);
[[nodiscard]] double empirical_quantile(std::span<const double> sorted_z, double u, bool* clamped = nullptr);

/// Filters `history`, then forward-simulates one step per element of
/// `simulated_z` (sigma from the variance recursion, eps = sigma z, mean
/// equation inverted back to the raw scale).
[[nodiscard]] std::vector<double> reconstruct_returns(const MarginalFit& fit, std::span<const double> simulated_z,
                                                      std::span<const double> history);

/// Simulates `n` raw values from the fitted recursion with skew-t
/// innovations, discarding `burn_in` leading values.
[[nodiscard]] std::vector<double> simulate(const MarginalFit& fit, std::size_t n, std::uint64_t seed,
                                           std::size_t burn_in = 500);

/// Minimum history length accepted by reconstruct_returns.
[[nodiscard]] std::size_t required_history(const MarginalOrder& order);

}  // namespace tvvine::marginals

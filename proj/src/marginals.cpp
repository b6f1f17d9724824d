#include "tvvine/marginals.hpp"

#include "tvvine/diag.hpp"
#include "tvvine/distributions.hpp"
#include "tvvine/ingest.hpp"
#include "tvvine/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tvvine::marginals {

namespace {

constexpr double kPitClamp = 1e-10;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Partial autocorrelations in (-1, 1) -> coefficients of a stationary
// polynomial 1 - c_1 L - ... - c_k L^k (Durbin-Levinson).
std::vector<double> pacf_to_coefs(std::span<const double> r) {
  std::vector<double> c, prev;
  for (std::size_t k = 0; k < r.size(); ++k) {
    prev = c;
    c.assign(k + 1, 0.0);
    c[k] = r[k];
    for (std::size_t j = 0; j < k; ++j) c[j] = prev[j] - r[k] * prev[k - 1 - j];
  }
  return c;
}

std::vector<double> sample_pacf(std::span<const double> y, int order) {
  const auto n = y.size();
  const double m = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> acf(static_cast<std::size_t>(order) + 1, 0.0);
  for (int k = 0; k <= order; ++k) {
    double s = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) s += (y[t] - m) * (y[t - k] - m);
    acf[k] = s;
  }
  std::vector<double> out;
  if (acf[0] <= 0.0) return std::vector<double>(order, 0.0);
  for (auto& a : acf) a /= acf[0];
  // Durbin-Levinson on the sample autocorrelations.
  std::vector<double> phi, prev;
  double v = 1.0;
  for (int k = 1; k <= order; ++k) {
    double num = acf[k];
    for (int j = 1; j < k; ++j) num -= phi[j - 1] * acf[k - j];
    const double r = std::clamp(num / v, -0.9, 0.9);
    prev = phi;
    phi.assign(k, 0.0);
    phi[k - 1] = r;
    for (int j = 1; j < k; ++j) phi[j - 1] = prev[j - 1] - r * prev[k - 1 - j];
    v *= 1.0 - r * r;
    out.push_back(r);
  }
  return out;
}

struct Layout {
  std::size_t mu = 0, ar = 1, ma, d, omega, garch, nu, xi, size;
  explicit Layout(const MarginalOrder& o) {
    ma = ar + static_cast<std::size_t>(o.p);
    d = ma + static_cast<std::size_t>(o.q);
    omega = d + (o.use_frac_d ? 1 : 0);
    garch = omega + 1;
    nu = garch + static_cast<std::size_t>(o.a + o.b);
    xi = nu + 1;
    size = xi + 1;
  }
};

void unpack(std::span<const double> x, const Layout& L, MarginalFit& f) {
  const auto& o = f.order;
  f.mu = x[L.mu];
  std::vector<double> r(static_cast<std::size_t>(o.p));
  for (int i = 0; i < o.p; ++i) r[i] = std::tanh(std::clamp(x[L.ar + i], -10.0, 10.0));
  f.phi = pacf_to_coefs(r);
  r.assign(static_cast<std::size_t>(o.q), 0.0);
  for (int j = 0; j < o.q; ++j) r[j] = std::tanh(std::clamp(x[L.ma + j], -10.0, 10.0));
  f.theta = pacf_to_coefs(r);
  for (auto& t : f.theta) t = -t;
  f.d = o.use_frac_d ? 0.5 * std::tanh(x[L.d]) : 0.0;
  f.omega = std::exp(std::clamp(x[L.omega], -60.0, 60.0));
  double denom = 1.0;
  std::vector<double> e(static_cast<std::size_t>(o.a + o.b));
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = std::exp(std::clamp(x[L.garch + i], -30.0, 30.0));
    denom += e[i];
  }
  f.alpha.assign(e.begin(), e.begin() + o.a);
  f.beta.assign(e.begin() + o.a, e.end());
  for (auto& a : f.alpha) a /= denom;
  for (auto& b : f.beta) b /= denom;
  f.nu = 2.0 + std::exp(std::clamp(x[L.nu], -5.0, std::log(200.0)));
  f.xi_skew = std::exp(std::clamp(x[L.xi], -3.0, 3.0));
}

double negloglik(const MarginalFit& f, std::span<const double> series) {
  const dist::SkewStudentT sst(f.nu, f.xi_skew);
  MarginalRecursion rec(f);
  double ll = 0.0;
  for (double r : series) {
    const double s = rec.next_sigma();
    const double z = (r - rec.next_mean()) / s;
    ll += sst.log_pdf(z) - std::log(s);
    if (!std::isfinite(ll)) return std::numeric_limits<double>::infinity();
    rec.observe(r);
  }
  return -ll;
}

double variance(std::span<const double> y) {
  const double n = static_cast<double>(y.size());
  const double m = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double s = 0.0;
  for (double v : y) s += (v - m) * (v - m);
  return s / std::max(1.0, n - 1.0);
}

}  // namespace

void MarginalOrder::validate() const {
  if (p < 0 || q < 0 || p > 5 || q > 5) throw std::invalid_argument("marginal order: p, q must be in [0, 5]");
  if (a < 0 || b < 0 || a > 2 || b > 2) throw std::invalid_argument("marginal order: a, b must be in [0, 2]");
  if (a + b < 1) throw std::invalid_argument("marginal order: need at least one GARCH term");
}

std::string MarginalOrder::label() const {
  std::ostringstream os;
  os << (use_frac_d ? "ARFIMA(" : "ARMA(") << p << ',' << (use_frac_d ? "d," : "") << q << ")-GARCH(" << a << ','
     << b << ')';
  return os.str();
}

std::string_view pit_mode_name(PitMode m) { return m == PitMode::Empirical ? "empirical" : "parametric"; }

PitMode parse_pit_mode(std::string_view s) {
  if (s == "empirical") return PitMode::Empirical;
  if (s == "parametric") return PitMode::Parametric;
  throw std::invalid_argument("unknown PIT mode '" + std::string(s) + "'");
}

int MarginalFit::n_params() const { return 1 + order.p + order.q + (order.use_frac_d ? 1 : 0) + 1 + order.a + order.b + 2; }

void MarginalFit::validate() const {
  order.validate();
  if (phi.size() != static_cast<std::size_t>(order.p) || theta.size() != static_cast<std::size_t>(order.q) ||
      alpha.size() != static_cast<std::size_t>(order.a) || beta.size() != static_cast<std::size_t>(order.b))
    throw std::invalid_argument("marginal fit: coefficient count does not match order");
  if (!(omega > 0.0)) throw std::invalid_argument("marginal fit: omega must be positive");
  for (double v : alpha)
    if (v < 0.0) throw std::invalid_argument("marginal fit: negative alpha");
  for (double v : beta)
    if (v < 0.0) throw std::invalid_argument("marginal fit: negative beta");
  if (sum(alpha) + sum(beta) >= 1.0) throw std::invalid_argument("marginal fit: alpha + beta must be below 1");
  if (!(d > -0.5 && d < 0.5)) throw std::invalid_argument("marginal fit: d outside (-0.5, 0.5)");
  if (!(nu > 2.0)) throw std::invalid_argument("marginal fit: nu must exceed 2");
  if (!(xi_skew > 0.0)) throw std::invalid_argument("marginal fit: skew must be positive");
}

void UniformPanel::validate() const {
  for (const auto& c : columns) {
    if (c.size() != length()) throw std::invalid_argument("uniform panel: ragged columns");
    for (double u : c)
      if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("uniform panel: value outside (0, 1)");
  }
}

std::vector<double> frac_diff_weights(double d, std::size_t count) {
  std::vector<double> pi(count);
  if (count == 0) return pi;
  pi[0] = 1.0;
  for (std::size_t k = 1; k < count; ++k) pi[k] = pi[k - 1] * (static_cast<double>(k) - 1.0 - d) / static_cast<double>(k);
  return pi;
}

std::vector<double> frac_diff(std::span<const double> x, double d, std::size_t truncation) {
  if (truncation == 0) throw std::invalid_argument("frac_diff: truncation must be positive");
  const auto pi = frac_diff_weights(d, truncation + 1);
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t K = std::min(t, truncation);
    double s = 0.0;
    for (std::size_t k = 0; k <= K; ++k) s += pi[k] * x[t - k];
    y[t] = s;
  }
  return y;
}

MarginalRecursion::MarginalRecursion(const MarginalFit& fit) : fit_(&fit) {
  if (fit.order.use_frac_d) pi_ = frac_diff_weights(fit.d, fit.frac_truncation + 1);
  else pi_ = {1.0};
  y_pre_ = fit.mu / (1.0 - sum(fit.phi));
  var_pre_ = fit.omega / std::max(1e-12, 1.0 - sum(fit.alpha) - sum(fit.beta));
  refresh();
}

double MarginalRecursion::next_mean() const { return next_y_mean_ - next_frac_; }

void MarginalRecursion::refresh() {
  const auto& f = *fit_;
  const std::size_t t = r_.size();
  double m = f.mu;
  for (std::size_t i = 1; i <= f.phi.size(); ++i) m += f.phi[i - 1] * (i <= t ? y_[t - i] : y_pre_);
  for (std::size_t j = 1; j <= f.theta.size(); ++j)
    if (j <= t) m += f.theta[j - 1] * eps_[t - j];
  next_y_mean_ = m;

  double v = f.omega;
  for (std::size_t i = 1; i <= f.alpha.size(); ++i) v += f.alpha[i - 1] * (i <= t ? eps_[t - i] * eps_[t - i] : var_pre_);
  for (std::size_t j = 1; j <= f.beta.size(); ++j) v += f.beta[j - 1] * (j <= t ? var_[t - j] : var_pre_);
  next_var_ = v;

  double fr = 0.0;
  const std::size_t K = std::min(t, pi_.size() - 1);
  for (std::size_t k = 1; k <= K; ++k) fr += pi_[k] * r_[t - k];
  next_frac_ = fr;
}

void MarginalRecursion::observe(double r) {
  const double y = r + next_frac_;
  r_.push_back(r);
  y_.push_back(y);
  eps_.push_back(y - next_y_mean_);
  var_.push_back(next_var_);
  refresh();
}

double MarginalRecursion::step(double z) {
  const double r = next_mean() + next_sigma() * z;
  observe(r);
  return r;
}

FilterPaths filter(const MarginalFit& fit, std::span<const double> series) {
  const dist::SkewStudentT sst(fit.nu, fit.xi_skew);
  MarginalRecursion rec(fit);
  FilterPaths out;
  out.cond_mean.reserve(series.size());
  out.sigma.reserve(series.size());
  out.z.reserve(series.size());
  for (double r : series) {
    const double m = rec.next_mean();
    const double s = rec.next_sigma();
    const double z = (r - m) / s;
    out.cond_mean.push_back(m);
    out.sigma.push_back(s);
    out.z.push_back(z);
    out.loglik += sst.log_pdf(z) - std::log(s);
    rec.observe(r);
  }
  return out;
}

void refresh_paths(MarginalFit& fit, std::span<const double> series) {
  auto fp = filter(fit, series);
  fit.sigma = std::move(fp.sigma);
  fit.z = std::move(fp.z);
  fit.loglik = fp.loglik;
  fit.aic = 2.0 * fit.n_params() - 2.0 * fit.loglik;
}

MarginalFit fit_marginal(std::span<const double> series, const MarginalOrder& order, const MarginalFitOptions& options) {
  order.validate();
  const std::size_t n = series.size();
  const std::size_t min_len = static_cast<std::size_t>(std::max({order.p, order.q, order.a, order.b})) + 3;
  if (n < min_len) throw std::invalid_argument("fit_marginal: series too short for order " + order.label());
  if (n < 200) warn("fit_marginal: series length " + std::to_string(n) + " is below 200; estimates are unreliable");
  for (double v : series)
    if (!std::isfinite(v)) throw std::invalid_argument("fit_marginal: non-finite value in series");

  const Layout L(order);
  MarginalFit work;
  work.order = order;
  work.frac_truncation = options.frac_truncation;

  // Method-of-moments start.
  const double var_y = std::max(variance(series), 1e-12);
  const auto pacf = order.p > 0 ? sample_pacf(series, order.p) : std::vector<double>{};
  std::vector<double> x0(L.size, 0.0), steps(L.size, 0.1);
  std::vector<double> r0(pacf.begin(), pacf.end());
  const double mean_y = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  x0[L.mu] = mean_y * (1.0 - sum(pacf_to_coefs(r0)));
  steps[L.mu] = 0.1 * std::sqrt(var_y);
  for (int i = 0; i < order.p; ++i) x0[L.ar + i] = std::atanh(pacf[i]);
  const double a0 = order.a > 0 ? 0.05 : 0.0;
  const double b0 = order.b > 0 ? 0.90 : 0.0;
  x0[L.omega] = std::log(var_y * (1.0 - a0 - b0));
  steps[L.omega] = 0.3;
  const double slack = 1.0 - a0 - b0;
  for (int i = 0; i < order.a; ++i) x0[L.garch + i] = std::log(a0 / order.a / slack);
  for (int j = 0; j < order.b; ++j) x0[L.garch + order.a + j] = std::log(b0 / order.b / slack);
  for (int i = 0; i < order.a + order.b; ++i) steps[L.garch + i] = 0.5;
  x0[L.nu] = std::log(6.0);
  steps[L.nu] = 0.3;
  x0[L.xi] = 0.0;

  const optim::Objective obj = [&](std::span<const double> x) {
    unpack(x, L, work);
    return negloglik(work, series);
  };

  optim::OptimResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    std::vector<double> start = x0;
    if (r > 0) {
      SplitMix64 rng(substream_seed(options.seed, static_cast<std::uint64_t>(r)));
      for (std::size_t i = 0; i < start.size(); ++i) start[i] += (rng.uniform() - 0.5) * 5.0 * steps[i];
    }
    auto res = optim::nelder_mead(obj, start, steps, options.nm);
    if (std::isfinite(res.value) && res.value < best.value) best = std::move(res);
  }
  if (!std::isfinite(best.value))
    throw std::runtime_error("fit_marginal: no restart produced a finite likelihood for " + order.label());

  MarginalFit fit;
  fit.order = order;
  fit.frac_truncation = options.frac_truncation;
  unpack(best.x, L, fit);
  fit.converged = best.converged;
  if (!fit.converged) warn("fit_marginal: optimizer hit its evaluation limit for " + order.label());
  refresh_paths(fit, series);
  return fit;
}

std::vector<MarginalOrder> default_grid() {
  std::vector<MarginalOrder> g;
  for (int p = 0; p <= 2; ++p)
    for (int q = 0; q <= 2; ++q)
      for (auto [a, b] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}})
        g.push_back(MarginalOrder{.p = p, .q = q, .use_frac_d = false, .a = a, .b = b});
  return g;
}

OrderSelection select_order(std::span<const double> series, std::span<const MarginalOrder> grid,
                            const MarginalFitOptions& options, std::size_t diagnostic_lag) {
  if (grid.empty()) throw std::invalid_argument("select_order: empty grid");
  OrderSelection sel;
  std::vector<MarginalFit> fits;
  int best_pass = -1, best_any = -1;
  std::string causes;
  for (const auto& order : grid) {
    OrderCandidate c;
    c.order = order;
    try {
      auto fit = fit_marginal(series, order, options);
      c.loglik = fit.loglik;
      c.aic = fit.aic;
      const std::size_t lag = std::min(diagnostic_lag, fit.z.size() / 2 - 1);
      try {
        c.ljung_box_p = ingest::ljung_box(fit.z, lag).p_value;
        c.arch_lm_p = ingest::arch_lm_test(fit.z, lag).p_value;
        c.passes = c.ljung_box_p > 0.05 && c.arch_lm_p > 0.05;
      } catch (const std::exception&) {
        c.passes = false;
      }
      fits.push_back(std::move(fit));
    } catch (const std::exception& e) {
      c.failed = true;
      c.error = e.what();
      causes += "\n  " + order.label() + ": " + e.what();
      fits.emplace_back();
    }
    sel.candidates.push_back(c);
    const int idx = static_cast<int>(sel.candidates.size()) - 1;
    if (c.failed) continue;
    if (best_any < 0 || c.aic < sel.candidates[best_any].aic) best_any = idx;
    if (c.passes && (best_pass < 0 || c.aic < sel.candidates[best_pass].aic)) best_pass = idx;
  }
  if (best_any < 0) throw std::runtime_error("select_order: every candidate failed" + causes);
  int chosen = best_pass;
  sel.diagnostics_passed = best_pass >= 0;
  if (chosen < 0) {
    chosen = best_any;
    warn("select_order: no candidate passes Ljung-Box and ARCH-LM at 5%; using minimum AIC " +
         grid[chosen].label());
  }
  sel.order = grid[chosen];
  sel.fit = std::move(fits[chosen]);
  return sel;
}

std::vector<double> pit(const MarginalFit& fit, PitMode mode) {
  const auto n = fit.z.size();
  std::vector<double> u(n);
  if (mode == PitMode::Parametric) {
    const dist::SkewStudentT sst(fit.nu, fit.xi_skew);
    for (std::size_t t = 0; t < n; ++t) u[t] = sst.cdf(fit.z[t]);
  } else {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fit.z[a] < fit.z[b]; });
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && fit.z[idx[j + 1]] == fit.z[idx[i]]) ++j;
      const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) u[idx[k]] = rank / static_cast<double>(n + 1);
      i = j + 1;
    }
  }
  for (auto& v : u) v = std::clamp(v, kPitClamp, 1.0 - kPitClamp);
  return u;
}

std::vector<double> sorted_residuals(const MarginalFit& fit) {
  std::vector<double> z = fit.z;
  std::sort(z.begin(), z.end());
  return z;
}

double empirical_quantile(std::span<const double> z, double u, bool* clamped) {
  if (z.empty()) throw std::invalid_argument("empirical_quantile: no residuals");
  const auto n = z.size();
  const double pos = u * static_cast<double>(n + 1);
  if (clamped) *clamped = false;
  if (pos <= 1.0) {
    if (clamped && pos < 1.0 - 1e-9) *clamped = true;
    return z.front();
  }
  if (pos >= static_cast<double>(n)) {
    if (clamped && pos > static_cast<double>(n) + 1e-9) *clamped = true;
    return z.back();
  }
  const auto i = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(i);
  return z[i - 1] + w * (z[i] - z[i - 1]);
}

std::vector<double> inverse_pit(std::span<const double> u, const MarginalFit& fit, PitMode mode, std::size_t* clamped) {
  std::vector<double> z(u.size());
  if (mode == PitMode::Parametric) {
    const dist::SkewStudentT sst(fit.nu, fit.xi_skew);
    for (std::size_t i = 0; i < u.size(); ++i) z[i] = sst.quantile(u[i]);
    return z;
  }
  const auto sorted = sorted_residuals(fit);
  std::size_t count = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    bool c = false;
    z[i] = empirical_quantile(sorted, u[i], &c);
    count += c ? 1 : 0;
  }
  if (clamped) *clamped += count;
  else if (count > 0)
    warn("inverse_pit: " + std::to_string(count) + " value(s) outside the empirical hull clamped to extreme residuals");
  return z;
}

std::size_t required_history(const MarginalOrder& order) {
  return static_cast<std::size_t>(std::max({order.p, order.q, order.a, order.b, 1}));
}

std::vector<double> reconstruct_returns(const MarginalFit& fit, std::span<const double> simulated_z,
                                        std::span<const double> history) {
  if (history.size() < required_history(fit.order))
    throw std::invalid_argument("reconstruct_returns: history of " + std::to_string(history.size()) +
                                " values is shorter than the required " +
                                std::to_string(required_history(fit.order)));
  MarginalRecursion rec(fit);
  for (double r : history) rec.observe(r);
  std::vector<double> out;
  out.reserve(simulated_z.size());
  for (double z : simulated_z) out.push_back(rec.step(z));
  return out;
}

std::vector<double> simulate(const MarginalFit& fit, std::size_t n, std::uint64_t seed, std::size_t burn_in) {
  const dist::SkewStudentT sst(fit.nu, fit.xi_skew);
  SplitMix64 rng(seed);
  MarginalRecursion rec(fit);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n + burn_in; ++t) {
    const double r = rec.step(sst.quantile(rng.uniform()));
    if (t >= burn_in) out.push_back(r);
  }
  return out;
}

}  // namespace tvvine::marginals

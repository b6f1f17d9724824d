#include "tvvine/dynamics.hpp"

#include "tvvine/diag.hpp"
#include "tvvine/distributions.hpp"
#include "tvvine/rng.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace tvvine::dynamics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxNuExcess = 198.0;
constexpr double kMinNuExcess = 0.05;

double nu_from_eta(double eta) { return 2.0 + std::clamp(std::exp(std::min(eta, 10.0)), kMinNuExcess, kMaxNuExcess); }
double eta_from_nu(double nu) { return std::log(std::clamp(nu - 2.0, kMinNuExcess, kMaxNuExcess)); }

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Reuses the quantile cache while nu is unchanged.
class EvaluatorCache {
 public:
  EvaluatorCache(Family f, std::span<const double> u, std::span<const double> v) : f_(f), u_(u), v_(v) {}

  const copula::PairEvaluator& get(std::optional<double> nu) {
    if (!ev_ || (f_ == Family::StudentT && ev_->nu() != nu)) ev_.emplace(f_, nu, u_, v_);
    return *ev_;
  }

 private:
  Family f_;
  std::span<const double> u_, v_;
  std::optional<copula::PairEvaluator> ev_;
};

std::vector<double> forcing_terms(Family f, std::span<const double> u, std::span<const double> v) {
  std::vector<double> g(u.size());
  for (std::size_t t = 0; t < u.size(); ++t) g[t] = patton_term(f, u[t], v[t]);
  return g;
}

// Runs a driver over cached data. `forcing` may be empty for non-Patton drivers.
GasPath run(Family f, const Coef& coef, const copula::PairEvaluator& ev, std::span<const double> forcing,
            bool keep_path) {
  DriverState st(f, coef);
  const std::size_t n = ev.size();
  GasPath path;
  if (keep_path) {
    path.theta_tilde.reserve(n);
    path.theta.reserve(n);
  }
  const bool gas = st.needs_score();
  const bool patton = std::holds_alternative<PattonCoef>(coef);
  for (std::size_t t = 0; t < n; ++t) {
    const double th = st.theta();
    if (keep_path) {
      path.theta_tilde.push_back(st.theta_tilde());
      path.theta.push_back(th);
    }
    const double ld = ev.log_density(t, th);
    if (!std::isfinite(ld))
      throw std::runtime_error("filter: non-finite log density at t=" + std::to_string(t));
    path.loglik += ld;
    double s = 0.0, curv = 0.0;
    if (gas) {
      std::tie(s, curv) = ev.derivatives(t, th);
      if (!std::isfinite(s)) throw std::runtime_error("filter: non-finite score at t=" + std::to_string(t));
    }
    st.advance(s, patton ? forcing[t] : 0.0, curv);
  }
  path.lyapunov = st.lyapunov();
  path.next_theta_tilde = st.theta_tilde();
  path.next_theta = st.theta();
  path.saturated = st.saturated();
  return path;
}

double initial_theta(Family f, double tau) {
  if (copula::is_elliptical(f)) return std::clamp(std::sin(std::numbers::pi * tau / 2.0), -0.95, 0.95);
  return 1.0 / (1.0 - std::clamp(tau, 0.02, 0.9));
}

}  // namespace

std::string_view driver_name(Driver d) {
  switch (d) {
    case Driver::Gas: return "gas";
    case Driver::Patton: return "patton";
    case Driver::Static: return "static";
  }
  return "?";
}

Driver parse_driver(std::string_view s) {
  if (s == "gas") return Driver::Gas;
  if (s == "patton") return Driver::Patton;
  if (s == "static") return Driver::Static;
  throw std::invalid_argument("unknown driver '" + std::string(s) + "'");
}

double LinkFn::forward(double x) const {
  if (copula::is_elliptical(family)) return std::tanh(0.5 * x);
  return 1.0 + std::exp(x);
}

double LinkFn::inverse(double theta) const {
  double x;
  if (copula::is_elliptical(family)) {
    if (!(theta > -1.0 && theta < 1.0)) throw std::domain_error("link inverse: correlation outside (-1, 1)");
    x = 2.0 * std::atanh(theta);
  } else {
    if (!(theta >= 1.0)) throw std::domain_error("link inverse: Gumbel parameter below 1");
    x = std::log(theta - 1.0);
  }
  return std::clamp(x, lower(), upper());
}

double LinkFn::derivative(double x) const {
  if (copula::is_elliptical(family)) {
    const double t = std::tanh(0.5 * x);
    return 0.5 * (1.0 - t * t);
  }
  return std::exp(x);
}

double LinkFn::second_derivative(double x) const {
  if (copula::is_elliptical(family)) {
    const double t = std::tanh(0.5 * x);
    return -t * 0.5 * (1.0 - t * t);
  }
  return std::exp(x);
}

double LinkFn::lower() const { return copula::is_elliptical(family) ? -15.0 : -30.0; }
double LinkFn::upper() const { return copula::is_elliptical(family) ? 15.0 : std::log(99.0); }

Driver driver_of(const Coef& c) {
  return std::visit(overloaded{[](const StaticCoef&) { return Driver::Static; },
                               [](const GasCoef&) { return Driver::Gas; },
                               [](const PattonCoef&) { return Driver::Patton; }},
                    c);
}

std::optional<double> coef_nu(const Coef& c) {
  return std::visit([](const auto& x) { return x.nu; }, c);
}

int free_params(const Coef& c) {
  const int base = driver_of(c) == Driver::Static ? 1 : 3;
  return base + (coef_nu(c) ? 1 : 0);
}

void validate(Family f, const Coef& c) {
  const auto nu = coef_nu(c);
  if (f == Family::StudentT) {
    if (!nu || !(*nu > 2.0)) throw std::domain_error("coefficients: Student-t requires nu > 2");
  } else if (nu) {
    throw std::domain_error("coefficients: nu given for a family without a tail parameter");
  }
  std::visit(overloaded{[&](const StaticCoef& s) { copula::validate(f, copula::CopulaParam{s.theta, s.nu}); },
                        [&](const GasCoef& g) {
                          if (!(std::abs(g.B) < 1.0)) throw std::domain_error("GAS coefficients: |B| must be below 1");
                          if (g.gamma != 0.0 && g.gamma != 0.5 && g.gamma != 1.0)
                            throw std::domain_error("GAS coefficients: gamma must be 0, 0.5 or 1");
                          if (g.gamma != 0.0 && f != Family::Gaussian)
                            throw std::domain_error("GAS coefficients: gamma > 0 is only available for Gaussian");
                          if (!std::isfinite(g.k) || !std::isfinite(g.A))
                            throw std::domain_error("GAS coefficients: non-finite value");
                        },
                        [&](const PattonCoef& p) {
                          if (p.q < 1 || p.q > 10) throw std::domain_error("Patton coefficients: q must be in [1, 10]");
                          if (!std::isfinite(p.omega) || !std::isfinite(p.alpha) || !std::isfinite(p.beta))
                            throw std::domain_error("Patton coefficients: non-finite value");
                        }},
             c);
}

std::vector<double> coef_vector(const Coef& c) {
  std::vector<double> v = std::visit(
      overloaded{[](const StaticCoef& s) { return std::vector<double>{s.theta}; },
                 [](const GasCoef& g) { return std::vector<double>{g.k, g.A, g.B, g.gamma}; },
                 [](const PattonCoef& p) { return std::vector<double>{p.omega, p.alpha, p.beta, double(p.q)}; }},
      c);
  if (auto nu = coef_nu(c)) v.push_back(*nu);
  return v;
}

Coef coef_from_vector(Driver d, Family f, std::span<const double> v) {
  const std::size_t base = d == Driver::Static ? 1 : 4;
  const bool has_nu = f == Family::StudentT;
  if (v.size() != base + (has_nu ? 1 : 0))
    throw std::invalid_argument("coefficient vector has " + std::to_string(v.size()) + " entries for driver " +
                                std::string(driver_name(d)) + " and family " + std::string(copula::family_name(f)));
  std::optional<double> nu;
  if (has_nu) nu = v[base];
  Coef c;
  switch (d) {
    case Driver::Static: c = StaticCoef{v[0], nu}; break;
    case Driver::Gas: c = GasCoef{v[0], v[1], v[2], v[3], nu}; break;
    case Driver::Patton: c = PattonCoef{v[0], v[1], v[2], static_cast<int>(std::lround(v[3])), nu}; break;
  }
  validate(f, c);
  return c;
}

double patton_term(Family f, double u, double v) {
  u = copula::clamp_unit(u);
  v = copula::clamp_unit(v);
  if (copula::is_elliptical(f)) return dist::normal_quantile(u) * dist::normal_quantile(v);
  return std::abs(u - v);
}

DriverState::DriverState(Family f, const Coef& coef) : family_(f), coef_(coef), link_{f} {
  std::visit(overloaded{[&](const StaticCoef& s) { x_ = link_.inverse(s.theta); },
                        [&](const GasCoef& g) {
                          if (!(std::abs(g.B) < 1.0)) throw std::domain_error("GAS coefficients: |B| must be below 1");
                          x_ = std::clamp(g.k / (1.0 - g.B), link_.lower(), link_.upper());
                        },
                        [&](const PattonCoef& p) {
                          if (p.q < 1) throw std::domain_error("Patton coefficients: q must be positive");
                          x_ = std::clamp(p.omega, link_.lower(), link_.upper());
                        }},
             coef_);
}

double DriverState::clamp(double x) {
  if (!(x >= link_.lower())) {
    ++saturated_;
    return link_.lower();
  }
  if (x > link_.upper()) {
    ++saturated_;
    return link_.upper();
  }
  return x;
}

void DriverState::advance(double score, double forcing, double curvature) {
  if (auto* g = std::get_if<GasCoef>(&coef_)) {
    const double d = link_.derivative(x_);
    double scale = 1.0;
    if (g->gamma != 0.0) {
      const double rho = link_.forward(x_);
      const double r2 = rho * rho;
      const double info = (1.0 + r2) / ((1.0 - r2) * (1.0 - r2)) * d * d;
      scale = std::pow(info, -g->gamma);
    }
    // Scaling treated as locally constant in the contraction rate.
    const double ds = scale * (curvature * d * d + score * link_.second_derivative(x_));
    log_contraction_ += std::log(std::max(std::abs(g->B + g->A * ds), 1e-300));
    ++steps_;
    x_ = clamp(g->k + g->A * scale * score * d + g->B * x_);
  } else if (auto* p = std::get_if<PattonCoef>(&coef_)) {
    const double prev = link_.forward(x_);
    window_.push_back(forcing);
    window_sum_ += forcing;
    if (window_.size() > static_cast<std::size_t>(p->q)) {
      window_sum_ -= window_.front();
      window_.pop_front();
    }
    const double mean = window_sum_ / static_cast<double>(window_.size());
    x_ = clamp(p->omega + p->beta * prev + p->alpha * mean);
  }
}

GasPath filter(Family f, const Coef& coef, std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("filter: column length mismatch");
  validate(f, coef);
  const copula::PairEvaluator ev(f, coef_nu(coef), u, v);
  std::vector<double> g;
  if (std::holds_alternative<PattonCoef>(coef)) g = forcing_terms(f, u, v);
  auto path = run(f, coef, ev, g, true);
  if (path.saturated > 0)
    warn("filter: " + std::string(copula::family_name(f)) + " path saturated at the link bound on " +
         std::to_string(path.saturated) + " of " + std::to_string(u.size()) + " steps");
  return path;
}

GasPath gas_filter(Family f, const GasCoef& coef, std::span<const double> u, std::span<const double> v) {
  return filter(f, Coef{coef}, u, v);
}

GasPath patton_filter(Family f, const PattonCoef& coef, std::span<const double> u, std::span<const double> v) {
  return filter(f, Coef{coef}, u, v);
}

GasPath static_filter(Family f, const StaticCoef& coef, std::span<const double> u, std::span<const double> v) {
  return filter(f, Coef{coef}, u, v);
}

double pair_loglik(Driver d, Family f, const Coef& coef, std::span<const double> u, std::span<const double> v) {
  if (driver_of(coef) != d) throw std::invalid_argument("pair_loglik: coefficients do not match the driver");
  return filter(f, coef, u, v).loglik;
}

PairFit fit_pair(Family f, Driver d, std::span<const double> u, std::span<const double> v,
                 const PairFitOptions& options) {
  if (u.size() != v.size()) throw std::invalid_argument("fit_pair: column length mismatch");
  const std::size_t n = u.size();
  if (n < 2) throw std::invalid_argument("fit_pair: need at least 2 observations");
  if (n < 100) warn("fit_pair: only " + std::to_string(n) + " observations; estimates are unreliable");
  if (options.gamma != 0.0 && f != Family::Gaussian && d == Driver::Gas)
    throw std::invalid_argument("fit_pair: gamma > 0 is only available for the Gaussian family");

  const LinkFn link{f};
  const bool student = f == Family::StudentT;
  EvaluatorCache cache(f, u, v);
  const auto max_sat = static_cast<std::size_t>(options.max_saturation * static_cast<double>(n));

  auto evaluate = [&](const Coef& c, std::span<const double> forcing) {
    try {
      const auto path = run(f, c, cache.get(coef_nu(c)), forcing, false);
      if (path.saturated > max_sat) return kInf;
      if (std::holds_alternative<GasCoef>(c) && path.lyapunov >= 0.0) return kInf;
      return std::isfinite(path.loglik) ? -path.loglik : kInf;
    } catch (const std::exception&) {
      return kInf;
    }
  };

  // Minimizes over the driver coefficients for a fixed tail parameter.
  // Student-t nu is handled by profiling: a bounded 1-D search over
  // eta = log(nu - 2) wraps the coefficient search.
  using Maker = std::function<Coef(std::span<const double>, std::optional<double>)>;
  auto inner = [&](const Maker& make, std::optional<double> nu, const std::vector<std::vector<double>>& starts,
                   std::span<const double> steps, std::span<const double> forcing) {
    optim::OptimResult best;
    best.value = kInf;
    for (const auto& x0 : starts) {
      auto res = optim::nelder_mead([&](std::span<const double> x) { return evaluate(make(x, nu), forcing); }, x0,
                                    steps, options.nm);
      if (res.value < best.value) best = std::move(res);
    }
    return best;
  };
  struct Stage {
    optim::OptimResult res;
    std::optional<double> nu;
  };
  // Coordinate ascent between the coefficients (simplex) and
  // eta = log(nu - 2) (bounded Brent search with coefficients held).
  auto profile = [&](const Maker& make, std::vector<std::vector<double>> starts, std::span<const double> steps,
                     std::span<const double> forcing, double eta0) {
    Stage best{inner(make, student ? std::optional<double>(nu_from_eta(eta0)) : std::nullopt, starts, steps, forcing),
               student ? std::optional<double>(nu_from_eta(eta0)) : std::nullopt};
    if (!student || !std::isfinite(best.res.value)) return best;
    for (int cycle = 0; cycle < 4; ++cycle) {
      const auto x = best.res.x;
      auto by_eta = [&](double eta) {
        const double val = evaluate(make(x, nu_from_eta(eta)), forcing);
        return std::isfinite(val) ? val : 1e300;
      };
      std::uintmax_t iters = 40;
      const auto [eta, val] =
          boost::math::tools::brent_find_minima(by_eta, std::log(kMinNuExcess), std::log(kMaxNuExcess), 16, iters);
      if (!(val < best.res.value)) break;
      const double nu = nu_from_eta(eta);
      auto res = inner(make, nu, {x}, steps, forcing);
      const double gain = best.res.value - res.value;
      if (res.value < best.res.value) best = Stage{std::move(res), nu};
      if (!(gain > 1e-7)) break;
    }
    return best;
  };

  // Static stage.
  const double tau = copula::kendall_tau(u, v);
  const Maker static_make = [&](std::span<const double> x, std::optional<double> nu) {
    return Coef{StaticCoef{link.forward(std::clamp(x[0], link.lower(), link.upper())), nu}};
  };
  const std::vector<double> static_steps{0.2};
  const auto st = profile(static_make, {{link.inverse(initial_theta(f, tau))}}, static_steps, {},
                          eta_from_nu(copula::kDefaultStudentNu));
  if (!std::isfinite(st.res.value))
    throw std::runtime_error("fit_pair: static " + std::string(copula::family_name(f)) + " fit failed");

  optim::OptimResult best = st.res;
  Coef best_coef = static_make(st.res.x, st.nu);
  const double x_static = std::clamp(st.res.x[0], link.lower(), link.upper());
  const double eta_static = st.nu ? eta_from_nu(*st.nu) : 0.0;

  if (d == Driver::Gas) {
    const Maker make = [&](std::span<const double> x, std::optional<double> nu) {
      return Coef{GasCoef{x[0], x[1], std::tanh(x[2]), options.gamma, nu}};
    };
    std::vector<std::vector<double>> starts;
    for (auto [B0, A0] : {std::pair{0.95, 0.05}, std::pair{0.8, 0.05}, std::pair{0.99, 0.05}, std::pair{0.95, -0.5}})
      starts.push_back({(1.0 - B0) * x_static, A0, std::atanh(B0)});
    const std::vector<double> steps{0.02 + 0.05 * std::abs(starts[0][0]), 0.03, 0.3};
    const auto dyn = profile(make, starts, steps, {}, eta_static);
    best = dyn.res;
    if (std::isfinite(best.value)) best_coef = make(best.x, dyn.nu);
  } else if (d == Driver::Patton) {
    const auto g = forcing_terms(f, u, v);
    double gbar = 0.0;
    for (double x : g) gbar += x;
    gbar /= static_cast<double>(n);
    const double th = link.forward(x_static);
    const Maker make = [&](std::span<const double> x, std::optional<double> nu) {
      return Coef{PattonCoef{x[0], x[1], x[2], options.patton_q, nu}};
    };
    std::vector<std::vector<double>> starts;
    for (auto [a0, b0] : {std::pair{0.0, 0.0}, std::pair{0.1, 0.5}, std::pair{0.3, -0.3}})
      starts.push_back({x_static - b0 * th - a0 * gbar, a0, b0});
    const std::vector<double> steps{0.1, 0.1, 0.2};
    const auto dyn = profile(make, starts, steps, g, eta_static);
    best = dyn.res;
    if (std::isfinite(best.value)) best_coef = make(best.x, dyn.nu);
  }
  if (!std::isfinite(best.value))
    throw std::runtime_error("fit_pair: every restart failed for " + std::string(copula::family_name(f)) + "/" +
                             std::string(driver_name(d)) + " (likelihood non-finite or path saturated)");

  PairFit out;
  out.family = f;
  out.coef = best_coef;
  out.converged = best.converged;
  // Silent recompute: only the caller knows whether this candidate is kept.
  const copula::PairEvaluator ev(f, coef_nu(out.coef), u, v);
  std::vector<double> g;
  if (std::holds_alternative<PattonCoef>(out.coef)) g = forcing_terms(f, u, v);
  out.loglik = run(f, out.coef, ev, g, true).loglik;
  out.aic = 2.0 * free_params(out.coef) - 2.0 * out.loglik;
  return out;
}

FamilySelection select_family(std::span<const double> u, std::span<const double> v, std::span<const Family> families,
                              Driver d, const PairFitOptions& options) {
  if (families.empty()) throw std::invalid_argument("select_family: empty family list");
  FamilySelection sel;
  const PairFit* best = nullptr;
  for (Family f : families) {
    try {
      sel.fits.push_back(fit_pair(f, d, u, v, options));
    } catch (const std::exception& e) {
      sel.failures.push_back(std::string(copula::family_name(f)) + ": " + e.what());
    }
  }
  for (const auto& fit : sel.fits) {
    if (!best || fit.aic < best->aic || (fit.aic == best->aic && fit.family < best->family)) best = &fit;
  }
  if (!best) {
    std::string msg = "select_family: every candidate failed";
    for (const auto& s : sel.failures) msg += "; " + s;
    throw std::runtime_error(msg);
  }
  sel.best = *best;
  return sel;
}

PairSample simulate_pair(Family f, const Coef& coef, std::size_t n, std::uint64_t seed) {
  validate(f, coef);
  DriverState st(f, coef);
  SplitMix64 rng(seed);
  const auto nu = coef_nu(coef);
  PairSample s;
  s.u.reserve(n);
  s.v.reserve(n);
  s.theta.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const copula::CopulaParam p{st.theta(), nu};
    const double vv = rng.uniform();
    const double w = rng.uniform();
    const double uu = copula::h_inverse(f, p, w, vv);
    s.u.push_back(uu);
    s.v.push_back(vv);
    s.theta.push_back(p.theta);
    const double sc = st.needs_score() ? copula::score(f, p, uu, vv) : 0.0;
    const double g = std::holds_alternative<PattonCoef>(coef) ? patton_term(f, uu, vv) : 0.0;
    st.advance(sc, g);
  }
  return s;
}

}  // namespace tvvine::dynamics

#include "tvvine/paircopula.hpp"

#include "tvvine/distributions.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace tvvine::copula {
namespace {

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

double require_nu(const CopulaParam& p) {
  if (!p.nu) throw std::domain_error("StudentT copula requires nu");
  return *p.nu;
}

struct GumbelTerms {
  double x, y, lx, ly;
};

GumbelTerms gumbel_terms(double u, double v) {
  const double x = -std::log(u);
  const double y = -std::log(v);
  return {x, y, std::log(x), std::log(y)};
}

// h(x|v) for the Gumbel copula evaluated in logs.
double gumbel_h(double theta, double u, double v) {
  const auto g = gumbel_terms(u, v);
  const double log_a = log_add_exp(theta * g.lx, theta * g.ly);
  const double t = std::exp(log_a / theta);
  return std::exp(-t + (1.0 / theta - 1.0) * log_a + (theta - 1.0) * g.ly + g.y);
}

double gumbel_cdf(double theta, double u, double v) {
  const auto g = gumbel_terms(u, v);
  return std::exp(-std::exp(log_add_exp(theta * g.lx, theta * g.ly) / theta));
}

// Inverse of x -> h(x|v) for Gumbel: bisection to a 1e-6 bracket, then
// safeguarded Newton using dh/dx = c(x, v).
double gumbel_h_inverse(double theta, double w, double v) {
  double lo = kUnitClamp;
  double hi = 1.0 - kUnitClamp;
  if (gumbel_h(theta, lo, v) >= w) return lo;
  if (gumbel_h(theta, hi, v) <= w) return hi;
  int iter = 0;
  while (hi - lo > 1e-6) {
    if (++iter > 200) throw std::runtime_error("h_inverse: root finder did not converge");
    const double mid = 0.5 * (lo + hi);
    (gumbel_h(theta, mid, v) < w ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (; iter < 200; ++iter) {
    const double r = gumbel_h(theta, x, v) - w;
    if (std::abs(r) <= 1e-14) return x;
    (r < 0.0 ? lo : hi) = x;
    const auto g = gumbel_terms(x, v);
    const double dens = std::exp(detail::log_density_gumbel(theta, g.x, g.y, g.lx, g.ly));
    double next = x - r / dens;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-16 * std::max(1.0, x) || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * x) {
      return next;
    }
    x = next;
  }
  throw std::runtime_error("h_inverse: root finder did not converge after 200 iterations");
}

// Natural-domain bounds used by the one-sided difference rule.
std::pair<double, double> domain_bounds(Family f) {
  if (is_elliptical(f)) return {-1.0, 1.0};
  return {1.0, std::numeric_limits<double>::infinity()};
}

template <class LogDens>
double finite_difference(Family f, double theta, double step, LogDens&& logc) {
  const auto [lo, hi] = domain_bounds(f);
  if (theta - 2.0 * step < lo) {
    return (-3.0 * logc(theta) + 4.0 * logc(theta + step) - logc(theta + 2.0 * step)) / (2.0 * step);
  }
  if (theta + 2.0 * step > hi) {
    return (3.0 * logc(theta) - 4.0 * logc(theta - step) + logc(theta - 2.0 * step)) / (2.0 * step);
  }
  return (logc(theta + step) - logc(theta - step)) / (2.0 * step);
}

// First and second derivatives from the same stencil as finite_difference.
template <class LogDens>
std::pair<double, double> finite_difference2(Family f, double theta, double step, LogDens&& logc) {
  const auto [lo, hi] = domain_bounds(f);
  const double h2 = step * step;
  if (theta - 2.0 * step < lo) {
    const double f0 = logc(theta), f1 = logc(theta + step), f2 = logc(theta + 2.0 * step);
    return {(-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * step), (f0 - 2.0 * f1 + f2) / h2};
  }
  if (theta + 2.0 * step > hi) {
    const double f0 = logc(theta), f1 = logc(theta - step), f2 = logc(theta - 2.0 * step);
    return {(3.0 * f0 - 4.0 * f1 + f2) / (2.0 * step), (f0 - 2.0 * f1 + f2) / h2};
  }
  const double fp = logc(theta + step), f0 = logc(theta), fm = logc(theta - step);
  return {(fp - fm) / (2.0 * step), (fp - 2.0 * f0 + fm) / h2};
}

double integrate_h(Family f, const CopulaParam& p, double u, double v) {
  // C(u, v) = int_0^v h(u | s) ds for families without a closed-form CDF here.
  auto integrand = [&](double s) { return h_function(f, p, u, std::clamp(s, kUnitClamp, 1.0 - kUnitClamp)); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, v, 12, 1e-12);
}

}  // namespace

namespace detail {

double log_density_gumbel(double theta, double x, double y, double lx, double ly) {
  const double log_a = log_add_exp(theta * lx, theta * ly);
  const double t = std::exp(log_a / theta);
  return -t + (theta - 1.0) * (lx + ly) + x + y + (1.0 / theta - 2.0) * log_a + std::log(t + theta - 1.0);
}

double log_density_gaussian(double rho, double qa, double qb) {
  const double r2 = rho * rho;
  const double one_minus = 1.0 - r2;
  return -0.5 * std::log(one_minus) - (r2 * (qa * qa + qb * qb) - 2.0 * rho * qa * qb) / (2.0 * one_minus);
}

double student_const(double nu) {
  return std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) - 2.0 * std::lgamma(0.5 * (nu + 1.0));
}

double log_density_student(double rho, double nu, double t_const, double qa, double qb, double marginal_terms) {
  const double one_minus = 1.0 - rho * rho;
  const double quad = (qa * qa + qb * qb - 2.0 * rho * qa * qb) / (nu * one_minus);
  return t_const - 0.5 * std::log(one_minus) - 0.5 * (nu + 2.0) * std::log1p(quad) + 0.5 * (nu + 1.0) * marginal_terms;
}

}  // namespace detail

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::StudentT: return "student_t";
    case Family::Gumbel: return "gumbel";
    case Family::RotGumbel: return "rotgumbel";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "gaussian" || s == "normal") return Family::Gaussian;
  if (s == "student_t" || s == "t" || s == "student") return Family::StudentT;
  if (s == "gumbel") return Family::Gumbel;
  if (s == "rotgumbel" || s == "rot_gumbel" || s == "survival_gumbel") return Family::RotGumbel;
  throw std::invalid_argument("unknown copula family '" + std::string(name) + "'");
}

double clamp_unit(double u) {
  if (std::isnan(u)) throw std::domain_error("copula argument is NaN");
  return std::clamp(u, kUnitClamp, 1.0 - kUnitClamp);
}

void validate(Family f, const CopulaParam& p) {
  if (!std::isfinite(p.theta)) throw std::domain_error("copula parameter is not finite");
  if (is_elliptical(f)) {
    if (!(p.theta > -1.0 && p.theta < 1.0)) throw std::domain_error("correlation parameter outside (-1, 1)");
  } else if (!(p.theta >= 1.0)) {
    throw std::domain_error("Gumbel parameter below 1");
  }
  if (f == Family::StudentT) {
    const double nu = require_nu(p);
    if (!(nu > 2.0) || !std::isfinite(nu)) throw std::domain_error("Student-t nu must be finite and > 2");
  } else if (p.nu) {
    throw std::domain_error("nu is only meaningful for the Student-t family");
  }
}

double cdf(Family f, const CopulaParam& p, double u, double v) {
  validate(f, p);
  u = clamp_unit(u);
  v = clamp_unit(v);
  switch (f) {
    case Family::Gumbel: return gumbel_cdf(p.theta, u, v);
    case Family::RotGumbel: return u + v - 1.0 + gumbel_cdf(p.theta, 1.0 - u, 1.0 - v);
    default: return integrate_h(f, p, u, v);
  }
}

double log_density(Family f, const CopulaParam& p, double u, double v) {
  validate(f, p);
  u = clamp_unit(u);
  v = clamp_unit(v);
  switch (f) {
    case Family::Gaussian:
      return detail::log_density_gaussian(p.theta, dist::normal_quantile(u), dist::normal_quantile(v));
    case Family::StudentT: {
      const double nu = *p.nu;
      const double qa = dist::student_t_quantile(u, nu);
      const double qb = dist::student_t_quantile(v, nu);
      const double marg = std::log1p(qa * qa / nu) + std::log1p(qb * qb / nu);
      return detail::log_density_student(p.theta, nu, detail::student_const(nu), qa, qb, marg);
    }
    case Family::Gumbel: {
      const auto g = gumbel_terms(u, v);
      return detail::log_density_gumbel(p.theta, g.x, g.y, g.lx, g.ly);
    }
    case Family::RotGumbel: {
      const auto g = gumbel_terms(1.0 - u, 1.0 - v);
      return detail::log_density_gumbel(p.theta, g.x, g.y, g.lx, g.ly);
    }
  }
  return 0.0;
}

double h_function(Family f, const CopulaParam& p, double x, double v) {
  validate(f, p);
  x = clamp_unit(x);
  v = clamp_unit(v);
  switch (f) {
    case Family::Gaussian: {
      const double rho = p.theta;
      return dist::normal_cdf((dist::normal_quantile(x) - rho * dist::normal_quantile(v)) / std::sqrt(1.0 - rho * rho));
    }
    case Family::StudentT: {
      const double nu = *p.nu;
      const double rho = p.theta;
      const double qx = dist::student_t_quantile(x, nu);
      const double qv = dist::student_t_quantile(v, nu);
      const double scale = std::sqrt((nu + qv * qv) * (1.0 - rho * rho) / (nu + 1.0));
      return dist::student_t_cdf((qx - rho * qv) / scale, nu + 1.0);
    }
    case Family::Gumbel: return gumbel_h(p.theta, x, v);
    case Family::RotGumbel: return 1.0 - gumbel_h(p.theta, 1.0 - x, 1.0 - v);
  }
  return x;
}

double h_inverse(Family f, const CopulaParam& p, double w, double v) {
  validate(f, p);
  w = clamp_unit(w);
  v = clamp_unit(v);
  switch (f) {
    case Family::Gaussian: {
      const double rho = p.theta;
      return dist::normal_cdf(dist::normal_quantile(w) * std::sqrt(1.0 - rho * rho) + rho * dist::normal_quantile(v));
    }
    case Family::StudentT: {
      const double nu = *p.nu;
      const double rho = p.theta;
      const double qv = dist::student_t_quantile(v, nu);
      const double scale = std::sqrt((nu + qv * qv) * (1.0 - rho * rho) / (nu + 1.0));
      return dist::student_t_cdf(dist::student_t_quantile(w, nu + 1.0) * scale + rho * qv, nu);
    }
    case Family::Gumbel: return gumbel_h_inverse(p.theta, w, v);
    case Family::RotGumbel: return 1.0 - gumbel_h_inverse(p.theta, 1.0 - w, 1.0 - v);
  }
  return w;
}

double score_step(double theta) { return std::max(1e-6, 1e-6 * std::abs(theta)); }

double score_with_step(Family f, const CopulaParam& p, double u, double v, double step) {
  validate(f, p);
  auto logc = [&](double th) {
    CopulaParam q = p;
    q.theta = th;
    return log_density(f, q, u, v);
  };
  return finite_difference(f, p.theta, step, logc);
}

double score(Family f, const CopulaParam& p, double u, double v) {
  return score_with_step(f, p, u, v, score_step(p.theta));
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("kendall_tau: need at least 2 observations");
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  std::int64_t tied_x = 0, tied_xy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[idx[j]] == x[idx[i]]) ++j;
    const auto run = static_cast<std::int64_t>(j - i);
    tied_x += run * (run - 1) / 2;
    for (std::size_t k = i; k < j;) {
      std::size_t l = k;
      while (l < j && y[idx[l]] == y[idx[k]]) ++l;
      const auto r2 = static_cast<std::int64_t>(l - k);
      tied_xy += r2 * (r2 - 1) / 2;
      k = l;
    }
    i = j;
  }

  // Count discordant pairs as inversions of y under a bottom-up merge sort.
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n);
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (ys[j] < ys[i]) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[k++] = ys[j++];
        } else {
          buf[k++] = ys[i++];
        }
      }
      while (i < mid) buf[k++] = ys[i++];
      while (j < hi) buf[k++] = ys[j++];
    }
    std::swap(ys, buf);
  }

  std::int64_t tied_y = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && ys[j] == ys[i]) ++j;
    const auto run = static_cast<std::int64_t>(j - i);
    tied_y += run * (run - 1) / 2;
    i = j;
  }

  const auto pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t numerator = pairs - tied_x - tied_y + tied_xy - 2 * swaps;
  const std::int64_t d1 = pairs - tied_x;
  const std::int64_t d2 = pairs - tied_y;
  if (d1 == 0 || d2 == 0) throw std::domain_error("kendall_tau: undefined for an all-tied sample");
  return static_cast<double>(numerator) / std::sqrt(static_cast<double>(d1) * static_cast<double>(d2));
}

CopulaParam tau_to_param(Family f, double tau, double nu) {
  if (!(std::abs(tau) < 1.0)) throw std::domain_error("tau_to_param: |tau| must be < 1");
  switch (f) {
    case Family::Gaussian: return {std::sin(std::numbers::pi * tau / 2.0), std::nullopt};
    case Family::StudentT: return {std::sin(std::numbers::pi * tau / 2.0), nu};
    case Family::Gumbel:
      if (tau < 0.0) throw std::domain_error("tau_to_param: Gumbel cannot represent negative tau");
      return {1.0 / (1.0 - tau), std::nullopt};
    case Family::RotGumbel: return {1.0 / (1.0 - std::abs(tau)), std::nullopt};
  }
  return {};
}

double param_to_tau(Family f, const CopulaParam& p) {
  validate(f, p);
  if (is_elliptical(f)) return 2.0 / std::numbers::pi * std::asin(p.theta);
  return 1.0 - 1.0 / p.theta;
}

PairEvaluator::PairEvaluator(Family f, std::optional<double> nu, std::span<const double> u, std::span<const double> v)
    : family_(f), nu_(nu) {
  if (u.size() != v.size()) throw std::invalid_argument("PairEvaluator: length mismatch");
  if (f == Family::StudentT) {
    if (!nu || !(*nu > 2.0)) throw std::domain_error("PairEvaluator: Student-t needs nu > 2");
    t_const_ = detail::student_const(*nu);
  } else {
    nu_.reset();
  }
  const std::size_t n = u.size();
  a_.resize(n);
  b_.resize(n);
  if (!is_elliptical(f)) {
    la_.resize(n);
    lb_.resize(n);
  } else if (f == Family::StudentT) {
    la_.resize(n);
  }
  for (std::size_t t = 0; t < n; ++t) {
    const double uu = clamp_unit(u[t]);
    const double vv = clamp_unit(v[t]);
    switch (f) {
      case Family::Gaussian:
        a_[t] = dist::normal_quantile(uu);
        b_[t] = dist::normal_quantile(vv);
        break;
      case Family::StudentT:
        a_[t] = dist::student_t_quantile(uu, *nu_);
        b_[t] = dist::student_t_quantile(vv, *nu_);
        la_[t] = std::log1p(a_[t] * a_[t] / *nu_) + std::log1p(b_[t] * b_[t] / *nu_);
        break;
      case Family::Gumbel:
      case Family::RotGumbel: {
        const auto g = f == Family::Gumbel ? gumbel_terms(uu, vv) : gumbel_terms(1.0 - uu, 1.0 - vv);
        a_[t] = g.x;
        b_[t] = g.y;
        la_[t] = g.lx;
        lb_[t] = g.ly;
        break;
      }
    }
  }
}

double PairEvaluator::log_density(std::size_t t, double theta) const {
  switch (family_) {
    case Family::Gaussian: return detail::log_density_gaussian(theta, a_[t], b_[t]);
    case Family::StudentT: return detail::log_density_student(theta, *nu_, t_const_, a_[t], b_[t], la_[t]);
    default: return detail::log_density_gumbel(theta, a_[t], b_[t], la_[t], lb_[t]);
  }
}

double PairEvaluator::score(std::size_t t, double theta) const {
  return finite_difference(family_, theta, score_step(theta), [&](double th) { return log_density(t, th); });
}

std::pair<double, double> PairEvaluator::derivatives(std::size_t t, double theta) const {
  return finite_difference2(family_, theta, score_step(theta), [&](double th) { return log_density(t, th); });
}

}  // namespace tvvine::copula

#include "tvvine/distributions.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tvvine::dist {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_log_pdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi); }

double student_t_cdf(double x, double nu) {
  return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}

double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("student_t_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
}

double student_t_log_pdf(double x, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double chi_squared_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

SkewStudentT::SkewStudentT(double nu, double xi) : nu_(nu), xi_(xi) {
  if (!(nu > 2.0) || !std::isfinite(nu)) throw std::domain_error("SkewStudentT: nu must be finite and > 2");
  if (!(xi > 0.0) || !std::isfinite(xi)) throw std::domain_error("SkewStudentT: xi must be finite and > 0");
  scale_ = std::sqrt(nu / (nu - 2.0));
  log_norm_ = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) +
              std::log(scale_);
  // E|Z| for the unit-variance t.
  const double m1 = 2.0 * std::sqrt(nu - 2.0) / (nu - 1.0) *
                    std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(std::numbers::pi));
  mean_ = m1 * (xi - 1.0 / xi);
  sd_ = std::sqrt((1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0);
  split_ = 1.0 / (1.0 + xi * xi);
  g_ = 2.0 / (xi + 1.0 / xi);
}

double SkewStudentT::base_log_pdf(double z) const {
  const double s = z * scale_;
  return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(s * s / nu_);
}

double SkewStudentT::base_cdf(double z) const { return student_t_cdf(z * scale_, nu_); }

double SkewStudentT::base_quantile(double p) const { return student_t_quantile(p, nu_) / scale_; }

double SkewStudentT::log_pdf(double x) const {
  const double z = x * sd_ + mean_;
  const double arg = z >= 0.0 ? z / xi_ : z * xi_;
  return std::log(g_) + base_log_pdf(arg) + std::log(sd_);
}

double SkewStudentT::cdf(double x) const {
  const double z = x * sd_ + mean_;
  if (z < 0.0) return g_ / xi_ * base_cdf(z * xi_);
  return split_ + g_ * xi_ * (base_cdf(z / xi_) - 0.5);
}

double SkewStudentT::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("SkewStudentT::quantile: p must lie in (0,1)");
  double z;
  if (p < split_) {
    z = base_quantile(p * xi_ / g_) / xi_;
  } else {
    double q = (p - split_) / (g_ * xi_) + 0.5;
    q = std::min(q, std::nextafter(1.0, 0.0));
    z = xi_ * base_quantile(q);
  }
  return (z - mean_) / sd_;
}

}  // namespace tvvine::dist

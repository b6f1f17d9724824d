#pragma once

// Scalar distribution helpers shared by the marginal, copula and test modules.
// Thin wrappers over Boost.Math plus the Fernandez-Steel skewed Student-t.

namespace tvvine::dist {

[[nodiscard]] double normal_cdf(double x);
[[nodiscard]] double normal_quantile(double p);
[[nodiscard]] double normal_log_pdf(double x);

[[nodiscard]] double student_t_cdf(double x, double nu);
[[nodiscard]] double student_t_quantile(double p, double nu);
[[nodiscard]] double student_t_log_pdf(double x, double nu);

/// Upper tail P(X > x) of a chi-square with `df` degrees of freedom.
[[nodiscard]] double chi_squared_sf(double x, double df);

/// Skewed Student-t in the Fernandez-Steel form, standardized to zero mean
/// and unit variance. `nu` > 2 is the tail parameter, `xi` > 0 the skew
/// (xi = 1 is the symmetric unit-variance t).
class SkewStudentT {
 public:
  SkewStudentT(double nu, double xi);

  [[nodiscard]] double log_pdf(double x) const;
  [[nodiscard]] double cdf(double x) const;
  [[nodiscard]] double quantile(double p) const;

  [[nodiscard]] double nu() const { return nu_; }
  [[nodiscard]] double xi() const { return xi_; }

 private:
  // Unit-variance symmetric t: log density, cdf and quantile.
  [[nodiscard]] double base_log_pdf(double z) const;
  [[nodiscard]] double base_cdf(double z) const;
  [[nodiscard]] double base_quantile(double p) const;

  double nu_;
  double xi_;
  double scale_;      // sqrt(nu / (nu - 2))
  double log_norm_;   // log normaliser of the unit-variance t density
  double mean_;       // mean of the un-standardized skewed variable
  double sd_;         // its standard deviation
  double split_;      // cdf at the mode, 1 / (1 + xi^2)
  double g_;          // 2 / (xi + 1/xi)
};

}  // namespace tvvine::dist

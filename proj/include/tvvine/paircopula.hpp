#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tvvine::copula {

enum class Family { Gaussian, StudentT, Gumbel, RotGumbel };

/// Canonical order; also the tie-break order for family selection.
inline constexpr std::array<Family, 4> kAllFamilies{Family::Gaussian, Family::StudentT, Family::Gumbel,
                                                    Family::RotGumbel};

[[nodiscard]] std::string_view family_name(Family f);
[[nodiscard]] Family parse_family(std::string_view name);
[[nodiscard]] inline bool is_elliptical(Family f) { return f == Family::Gaussian || f == Family::StudentT; }

/// Dependence parameter in natural space. `nu` is set only for StudentT.
struct CopulaParam {
  double theta = 0.0;
  std::optional<double> nu;
};

inline constexpr double kUnitClamp = 1e-10;
inline constexpr double kDefaultStudentNu = 8.0;

[[nodiscard]] double clamp_unit(double u);

/// Throws std::domain_error when `p` lies outside the family's parameter domain.
void validate(Family f, const CopulaParam& p);

[[nodiscard]] double cdf(Family f, const CopulaParam& p, double u, double v);
[[nodiscard]] double log_density(Family f, const CopulaParam& p, double u, double v);

/// h(x | v) = dC(x, v)/dv.
[[nodiscard]] double h_function(Family f, const CopulaParam& p, double x, double v);

/// Solves h(x | v) = w for x. Closed form for the elliptical families,
/// bracketed bisection + Newton for the Gumbel families.
[[nodiscard]] double h_inverse(Family f, const CopulaParam& p, double w, double v);

/// d ln c / d theta by central differences with step max(1e-6, 1e-6 |theta|);
/// one-sided (second order) within two steps of a domain boundary.
[[nodiscard]] double score(Family f, const CopulaParam& p, double u, double v);
[[nodiscard]] double score_with_step(Family f, const CopulaParam& p, double u, double v, double step);
[[nodiscard]] double score_step(double theta);

/// Kendall's tau-b with tie correction, O(n log n).
[[nodiscard]] double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Moment-style inversion used for optimizer starting values.
[[nodiscard]] CopulaParam tau_to_param(Family f, double tau, double nu = kDefaultStudentNu);
[[nodiscard]] double param_to_tau(Family f, const CopulaParam& p);

/// Caches per-observation transforms (normal/t quantiles, log terms) so the
/// log density and score can be re-evaluated cheaply at many theta values.
/// The tail parameter is fixed for the lifetime of the evaluator.
class PairEvaluator {
 public:
  PairEvaluator(Family f, std::optional<double> nu, std::span<const double> u, std::span<const double> v);

  [[nodiscard]] std::size_t size() const { return a_.size(); }
  [[nodiscard]] Family family() const { return family_; }
  [[nodiscard]] std::optional<double> nu() const { return nu_; }

  [[nodiscard]] double log_density(std::size_t t, double theta) const;
  [[nodiscard]] double score(std::size_t t, double theta) const;
  /// (score, second derivative) from one stencil; the first equals score().
  [[nodiscard]] std::pair<double, double> derivatives(std::size_t t, double theta) const;

 private:
  Family family_;
  std::optional<double> nu_;
  double t_const_ = 0.0;          // StudentT normalising constant
  std::vector<double> a_, b_;     // quantiles (elliptical) or -log terms (Gumbel)
  std::vector<double> la_, lb_;   // log of a_, b_ (Gumbel) or marginal t log terms (StudentT)
};

namespace detail {
double log_density_gumbel(double theta, double x, double y, double lx, double ly);
double log_density_student(double rho, double nu, double t_const, double qa, double qb, double marginal_terms);
double log_density_gaussian(double rho, double qa, double qb);
double student_const(double nu);
}  // namespace detail

}  // namespace tvvine::copula

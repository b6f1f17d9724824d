#pragma once

#include "tvvine/optim.hpp"
#include "tvvine/paircopula.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tvvine::dynamics {

using copula::Family;

enum class Driver { Gas, Patton, Static };

[[nodiscard]] std::string_view driver_name(Driver d);
[[nodiscard]] Driver parse_driver(std::string_view s);

/// Maps the real line onto the family's natural parameter domain.
/// Elliptical: (1 - e^-x)/(1 + e^-x) = tanh(x/2) onto (-1, 1).
/// Gumbel families: 1 + e^x onto (1, inf).
struct LinkFn {
  Family family;
  [[nodiscard]] double forward(double x) const;
  [[nodiscard]] double inverse(double theta) const;
  [[nodiscard]] double derivative(double x) const;
  [[nodiscard]] double second_derivative(double x) const;
  /// Link-space box that keeps the natural parameter numerically usable.
  [[nodiscard]] double lower() const;
  [[nodiscard]] double upper() const;
};

[[nodiscard]] inline LinkFn link_for(Family f) { return LinkFn{f}; }

struct StaticCoef {
  double theta = 0.0;
  std::optional<double> nu;
};

/// theta~_{t+1} = k + A s~_t + B theta~_t, s~_t = S_t * dlog c/dtheta~.
struct GasCoef {
  double k = 0.0;
  double A = 0.0;
  double B = 0.0;
  double gamma = 0.0;  // scaling exponent, 0 (identity) unless Gaussian
  std::optional<double> nu;
};

/// theta_t = Lambda(omega + beta theta_{t-1} + alpha * mean of the last q forcing terms).
struct PattonCoef {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  int q = 10;
  std::optional<double> nu;
};

using Coef = std::variant<StaticCoef, GasCoef, PattonCoef>;

[[nodiscard]] Driver driver_of(const Coef& c);
[[nodiscard]] std::optional<double> coef_nu(const Coef& c);
/// Number of estimated parameters (used in the AIC).
[[nodiscard]] int free_params(const Coef& c);
void validate(Family f, const Coef& c);

/// Flat serialization: GAS [k, A, B, gamma, (nu)], Patton [omega, alpha, beta, q, (nu)], static [theta, (nu)].
[[nodiscard]] std::vector<double> coef_vector(const Coef& c);
[[nodiscard]] Coef coef_from_vector(Driver d, Family f, std::span<const double> v);

/// Forcing term of the Patton recursion for one observation:
/// Phi^-1(u) Phi^-1(v) for elliptical families, |u - v| otherwise.
[[nodiscard]] double patton_term(Family f, double u, double v);

/// Streaming form of a driver: holds the parameter for the next observation.
class DriverState {
 public:
  DriverState(Family f, const Coef& coef);

  [[nodiscard]] double theta_tilde() const { return x_; }
  [[nodiscard]] double theta() const { return link_.forward(x_); }
  [[nodiscard]] std::size_t saturated() const { return saturated_; }
  [[nodiscard]] bool needs_score() const { return std::holds_alternative<GasCoef>(coef_); }

  /// Consumes one observation given d ln c / d theta at the current theta
  /// (GAS) and its Patton forcing term. With `curvature` (d2 ln c / d theta2)
  /// the GAS state also tracks the log contraction rate of the recursion.
  void advance(double score, double forcing, double curvature = 0.0);

  /// Sample mean of log|d theta~_{t+1} / d theta~_t|; negative for an
  /// invertible (contracting) filter. Zero before any GAS step.
  [[nodiscard]] double lyapunov() const { return steps_ ? log_contraction_ / static_cast<double>(steps_) : 0.0; }

 private:
  double clamp(double x);

  Family family_;
  Coef coef_;
  LinkFn link_;
  double x_ = 0.0;
  std::size_t saturated_ = 0;
  std::deque<double> window_;
  double window_sum_ = 0.0;
  double log_contraction_ = 0.0;
  std::size_t steps_ = 0;
};

struct GasPath {
  std::vector<double> theta_tilde;
  std::vector<double> theta;
  double loglik = 0.0;
  double next_theta_tilde = 0.0;  // one step past the data
  double next_theta = 0.0;
  std::size_t saturated = 0;      // steps whose link value hit the box
  double lyapunov = 0.0;          // GAS only, see DriverState::lyapunov
};

/// Filters with any driver. Throws std::runtime_error on a non-finite score
/// or log density (naming t); warns when the path saturates.
[[nodiscard]] GasPath filter(Family f, const Coef& coef, std::span<const double> u, std::span<const double> v);
[[nodiscard]] GasPath gas_filter(Family f, const GasCoef& coef, std::span<const double> u, std::span<const double> v);
[[nodiscard]] GasPath patton_filter(Family f, const PattonCoef& coef, std::span<const double> u,
                                    std::span<const double> v);
[[nodiscard]] GasPath static_filter(Family f, const StaticCoef& coef, std::span<const double> u,
                                    std::span<const double> v);

[[nodiscard]] double pair_loglik(Driver d, Family f, const Coef& coef, std::span<const double> u,
                                 std::span<const double> v);

struct PairFitOptions {
  optim::NelderMeadOptions nm{.ftol = 1e-7, .xtol = 1e-8, .max_evals = 3000, .initial_step = 0.1, .max_rebuilds = 3};
  double gamma = 0.0;
  int patton_q = 10;
  double max_saturation = 0.10;  // fraction of steps
};

struct PairFit {
  Family family = Family::Gaussian;
  Coef coef;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
};

/// Maximum likelihood for one driver/family. The static fit seeds the
/// dynamic starts. Throws std::runtime_error when every restart fails.
[[nodiscard]] PairFit fit_pair(Family f, Driver d, std::span<const double> u, std::span<const double> v,
                               const PairFitOptions& options = {});

struct FamilySelection {
  PairFit best;
  std::vector<PairFit> fits;              // successful candidates, input order
  std::vector<std::string> failures;      // "family: cause"
};

/// Minimum AIC over `families`; ties go to the earlier family in canonical order.
[[nodiscard]] FamilySelection select_family(std::span<const double> u, std::span<const double> v,
                                            std::span<const Family> families, Driver d,
                                            const PairFitOptions& options = {});

struct PairSample {
  std::vector<double> u, v, theta;
};

/// Draws a path from the driven copula: v ~ U, u = h^-1(w | v; theta_t), then
/// the driver consumes (u_t, v_t).
[[nodiscard]] PairSample simulate_pair(Family f, const Coef& coef, std::size_t n, std::uint64_t seed);

}  // namespace tvvine::dynamics

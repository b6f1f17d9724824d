#include "tvvine/distributions.hpp"
#include "tvvine/paircopula.hpp"
#include "tvvine/rng.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

using namespace tvvine;
using namespace tvvine::copula;

namespace {

std::vector<CopulaParam> grid_params(Family f) {
  switch (f) {
    case Family::Gaussian: return {{-0.9, {}}, {-0.4, {}}, {0.0, {}}, {0.5, {}}, {0.9, {}}};
    case Family::StudentT: return {{-0.8, 4.0}, {-0.3, 10.0}, {0.0, 6.0}, {0.5, 3.0}, {0.9, 20.0}};
    default: return {{1.0, {}}, {1.3, {}}, {2.0, {}}, {3.0, {}}, {5.0, {}}};
  }
}

long brute_tau_numerator(const std::vector<double>& x, const std::vector<double>& y, long& tx, long& ty, long& n0) {
  long s = 0;
  tx = ty = 0;
  const long n = static_cast<long>(x.size());
  n0 = n * (n - 1) / 2;
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0) ++tx;
      if (dy == 0) ++ty;
      if (dx * dy > 0) ++s;
      else if (dx * dy < 0) --s;
    }
  return s;
}

double brute_tau(const std::vector<double>& x, const std::vector<double>& y) {
  long tx, ty, n0;
  const long s = brute_tau_numerator(x, y, tx, ty, n0);
  return static_cast<double>(s) / std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
}

}  // namespace

TEST(LogDensity, Examples) {
  for (double u : {0.1, 0.5, 0.93})
    for (double v : {0.2, 0.77}) {
      EXPECT_NEAR(log_density(Family::Gaussian, {0.0, {}}, u, v), 0.0, 1e-14);
      EXPECT_NEAR(log_density(Family::Gumbel, {1.0, {}}, u, v), 0.0, 1e-12);
    }
  EXPECT_NEAR(log_density(Family::Gaussian, {0.5, {}}, 0.5, 0.5), 0.143841, 1e-6);
  EXPECT_NEAR(log_density(Family::Gaussian, {0.5, {}}, 0.5, 0.5), -0.5 * std::log(0.75), 1e-14);
}

TEST(LogDensity, RotGumbelIsReflectedGumbel) {
  for (double th : {1.0, 1.5, 3.0, 7.0})
    for (double u : {0.05, 0.3, 0.8})
      for (double v : {0.1, 0.6, 0.97})
        EXPECT_EQ(log_density(Family::RotGumbel, {th, {}}, u, v), log_density(Family::Gumbel, {th, {}}, 1 - u, 1 - v));
}

TEST(LogDensity, Exchangeable) {
  for (Family f : kAllFamilies)
    for (const auto& p : grid_params(f))
      for (double u : {0.07, 0.4, 0.9})
        for (double v : {0.2, 0.66})
          EXPECT_NEAR(log_density(f, p, u, v), log_density(f, p, v, u), 1e-10) << family_name(f);
}

TEST(LogDensity, DomainErrors) {
  EXPECT_THROW((void)log_density(Family::Gaussian, {1.2, {}}, 0.5, 0.5), std::domain_error);
  EXPECT_THROW((void)log_density(Family::Gumbel, {0.5, {}}, 0.5, 0.5), std::domain_error);
  EXPECT_THROW((void)log_density(Family::StudentT, {0.5, 1.5}, 0.5, 0.5), std::domain_error);
}

TEST(HFunction, Examples) {
  for (double x : {0.1, 0.45, 0.9}) EXPECT_NEAR(h_function(Family::Gaussian, {0.0, {}}, x, 0.3), x, 1e-14);
  EXPECT_NEAR(h_function(Family::Gaussian, {0.5, {}}, 0.5, 0.5), 0.5, 1e-14);
  // dC/dv by central difference on the Gumbel CDF
  const CopulaParam g{2.0, {}};
  const double e = 1e-5;
  const double fd = (cdf(Family::Gumbel, g, 0.3, 0.7 + e) - cdf(Family::Gumbel, g, 0.3, 0.7 - e)) / (2 * e);
  EXPECT_NEAR(h_function(Family::Gumbel, g, 0.3, 0.7), fd, 1e-5);
}

TEST(HFunction, MatchesCdfDerivativeAllFamilies) {
  const double e = 1e-5;
  for (Family f : kAllFamilies)
    for (const auto& p : grid_params(f))
      for (double x : {0.2, 0.5, 0.8})
        for (double v : {0.25, 0.6}) {
          const double fd = (cdf(f, p, x, v + e) - cdf(f, p, x, v - e)) / (2 * e);
          EXPECT_NEAR(h_function(f, p, x, v), fd, 2e-5) << family_name(f) << " theta=" << p.theta;
        }
}

TEST(HFunction, IncreasingInX) {
  for (Family f : kAllFamilies)
    for (const auto& p : grid_params(f))
      for (double v : {0.05, 0.5, 0.95}) {
        double prev = -1.0;
        for (int i = 1; i < 100; ++i) {
          const double h = h_function(f, p, i / 100.0, v);
          EXPECT_GT(h, prev) << family_name(f);
          prev = h;
        }
      }
}

TEST(HInverse, IndependenceAndGaussianClosedForm) {
  for (double w : {0.1, 0.5, 0.8}) EXPECT_NEAR(h_inverse(Family::Gaussian, {0.0, {}}, w, 0.4), w, 1e-12);
  for (double w : {0.05, 0.3, 0.77})
    for (double v : {0.2, 0.9}) {
      const double x =
          dist::normal_cdf(dist::normal_quantile(w) * std::sqrt(1 - 0.25) + 0.5 * dist::normal_quantile(v));
      EXPECT_NEAR(h_inverse(Family::Gaussian, {0.5, {}}, w, v), x, 1e-12);
    }
  for (double w : {0.1, 0.6}) EXPECT_NEAR(h_inverse(Family::Gumbel, {1.0, {}}, w, 0.3), w, 1e-9);
}

TEST(HInverse, RoundTripGrid) {
  for (Family f : kAllFamilies)
    for (const auto& p : grid_params(f))
      for (int i = 1; i <= 9; ++i)
        for (int j = 1; j <= 9; ++j) {
          const double x = i / 10.0, v = j / 10.0;
          EXPECT_NEAR(h_inverse(f, p, h_function(f, p, x, v), v), x, 1e-8) << family_name(f) << " " << p.theta;
        }
}

TEST(Density, IntegratesToOne) {
  using boost::math::quadrature::gauss_kronrod;
  for (Family f : kAllFamilies)
    for (const auto& p : grid_params(f))
      for (double v : {0.1, 0.5, 0.9}) {
        auto c = [&](double u) { return std::exp(log_density(f, p, u, v)); };
        const double I = gauss_kronrod<double, 61>::integrate(c, 0.0, 1.0, 15, 1e-10);
        EXPECT_NEAR(I, 1.0, 2e-3) << family_name(f) << " theta=" << p.theta << " v=" << v;
        EXPECT_NEAR(h_function(f, p, 1.0 - 1e-12, v), 1.0, 1e-4);
        EXPECT_NEAR(h_function(f, p, 1e-12, v), 0.0, 1e-4);
      }
}

TEST(Score, Examples) {
  EXPECT_NEAR(score(Family::Gaussian, {0.0, {}}, 0.5, 0.5), 0.0, 1e-9);
  const double s = score(Family::Gumbel, {1.0, {}}, 0.3, 0.6);
  EXPECT_TRUE(std::isfinite(s));
}

TEST(Score, MatchesCentralDifference) {
  for (Family f : kAllFamilies) {
    SplitMix64 rng(1000 + static_cast<int>(f));
    for (int k = 0; k < 100; ++k) {
      const double u = 0.02 + 0.96 * rng.uniform(), v = 0.02 + 0.96 * rng.uniform();
      CopulaParam p = is_elliptical(f) ? CopulaParam{-0.9 + 1.8 * rng.uniform(), {}} : CopulaParam{1.05 + 5 * rng.uniform(), {}};
      if (f == Family::StudentT) p.nu = 3 + 20 * rng.uniform();
      const double h = score_step(p.theta);
      const double s = score(f, p, u, v);
      EXPECT_NEAR(s, score_with_step(f, p, u, v, h / 10), 1e-4) << family_name(f);
      const double cd = (log_density(f, {p.theta + h, p.nu}, u, v) - log_density(f, {p.theta - h, p.nu}, u, v)) / (2 * h);
      EXPECT_NEAR(s, cd, 1e-6);
    }
  }
}

TEST(KendallTau, Examples) {
  std::vector<double> a{1, 2, 3}, b{1, 2, 3}, c{3, 2, 1};
  EXPECT_DOUBLE_EQ(kendall_tau(a, b), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(a, c), -1.0);
  std::vector<double> tied{1, 1, 1};
  EXPECT_THROW((void)kendall_tau(tied, a), std::domain_error);
}

TEST(KendallTau, MatchesBruteForceWithTies) {
  for (int s = 0; s < 50; ++s) {
    SplitMix64 rng(s);
    std::vector<double> x(200), y(200);
    for (int i = 0; i < 200; ++i) {
      x[i] = std::floor(rng.uniform() * 40);
      y[i] = std::floor((x[i] + 30 * rng.uniform()) / 2);
    }
    EXPECT_EQ(kendall_tau(x, y), brute_tau(x, y)) << "seed " << s;
  }
}

TEST(KendallTau, InvariantUnderIncreasingMaps) {
  SplitMix64 rng(3);
  std::vector<double> x(300), y(300), gx(300), gy(300);
  for (int i = 0; i < 300; ++i) {
    x[i] = rng.uniform();
    y[i] = x[i] + rng.uniform();
    gx[i] = std::exp(5 * x[i]);
    gy[i] = y[i] * y[i] * y[i];
  }
  EXPECT_EQ(kendall_tau(x, y), kendall_tau(gx, gy));
}

TEST(TauToParam, Examples) {
  EXPECT_NEAR(tau_to_param(Family::Gaussian, 0.0).theta, 0.0, 1e-15);
  EXPECT_NEAR(tau_to_param(Family::Gumbel, 0.0).theta, 1.0, 1e-15);
  EXPECT_NEAR(tau_to_param(Family::Gaussian, 0.5).theta, std::sin(std::numbers::pi / 4), 1e-12);
  EXPECT_NEAR(tau_to_param(Family::Gumbel, 0.5).theta, 2.0, 1e-12);
  EXPECT_NEAR(tau_to_param(Family::RotGumbel, 0.5).theta, 2.0, 1e-12);
  EXPECT_THROW((void)tau_to_param(Family::Gumbel, -0.3), std::domain_error);
  EXPECT_THROW((void)tau_to_param(Family::Gaussian, 1.0), std::domain_error);
}

TEST(TauToParam, SimulatedTauOracle) {
  // Draw from the copula via the inverse h-function and compare sample tau.
  for (Family f : {Family::Gaussian, Family::Gumbel, Family::RotGumbel}) {
    const auto p = tau_to_param(f, 0.5);
    SplitMix64 rng(42);
    std::vector<double> u(20000), v(20000);
    for (int i = 0; i < 20000; ++i) {
      v[i] = rng.uniform();
      u[i] = h_inverse(f, p, rng.uniform(), v[i]);
    }
    EXPECT_NEAR(kendall_tau(u, v), 0.5, 0.02) << family_name(f);
    EXPECT_NEAR(param_to_tau(f, p), 0.5, 1e-12);
  }
}

TEST(Family, NamesRoundTrip) {
  for (Family f : kAllFamilies) EXPECT_EQ(parse_family(family_name(f)), f);
  EXPECT_THROW((void)parse_family("clayton"), std::invalid_argument);
}

#include "tvvine/diag.hpp"
#include "tvvine/distributions.hpp"
#include "tvvine/dynamics.hpp"
#include "tvvine/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tvvine;
using namespace tvvine::dynamics;
using copula::CopulaParam;
using copula::Family;

namespace {

struct Columns {
  std::vector<double> u, v;
};

Columns independent(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Columns c;
  for (std::size_t i = 0; i < n; ++i) {
    c.u.push_back(rng.uniform());
    c.v.push_back(rng.uniform());
  }
  return c;
}

Columns static_sample(Family f, CopulaParam p, std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Columns c;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = rng.uniform();
    c.u.push_back(copula::h_inverse(f, p, rng.uniform(), v));
    c.v.push_back(v);
  }
  return c;
}

std::optional<double> nu_for(Family f) { return f == Family::StudentT ? std::optional<double>(6.0) : std::nullopt; }

double natural_mid(Family f) { return copula::is_elliptical(f) ? 0.4 : 1.7; }

}  // namespace

TEST(LinkFn, RangesAndInverse) {
  for (Family f : copula::kAllFamilies) {
    const auto L = link_for(f);
    for (double x : {-5.0, -1.0, 0.0, 0.7, 3.0}) {
      const double th = L.forward(x);
      if (copula::is_elliptical(f)) {
        EXPECT_GT(th, -1.0);
        EXPECT_LT(th, 1.0);
        EXPECT_NEAR(th, (1 - std::exp(-x)) / (1 + std::exp(-x)), 1e-14);
      } else {
        EXPECT_GT(th, 1.0);
        EXPECT_NEAR(th, 1 + std::exp(x), 1e-12);
      }
      EXPECT_NEAR(L.inverse(th), x, 1e-9);
      const double e = 1e-6;
      EXPECT_NEAR(L.derivative(x), (L.forward(x + e) - L.forward(x - e)) / (2 * e), 1e-7);
    }
  }
}

TEST(GasFilter, CollapsesToStaticWhenAandBVanish) {
  for (Family f : copula::kAllFamilies) {
    const auto c = independent(500, 17);
    const double x = link_for(f).inverse(natural_mid(f));
    GasCoef g{x, 0.0, 0.0, 0.0, nu_for(f)};
    const auto path = gas_filter(f, g, c.u, c.v);
    double ll = 0.0;
    for (std::size_t t = 0; t < c.u.size(); ++t) {
      ll += copula::log_density(f, {link_for(f).forward(x), nu_for(f)}, c.u[t], c.v[t]);
      EXPECT_EQ(path.theta[t], path.theta[0]);
    }
    EXPECT_NEAR(path.loglik, ll, 1e-10) << copula::family_name(f);
    StaticCoef s{link_for(f).forward(x), nu_for(f)};
    EXPECT_NEAR(pair_loglik(Driver::Static, f, s, c.u, c.v), ll, 1e-10);
  }
}

TEST(GasFilter, ZeroScoreLoadingStaysAtLongRunMean) {
  const auto c = independent(100, 2);
  GasCoef g{0.0, 0.0, 0.9, 0.0, {}};
  const auto p = gas_filter(Family::Gaussian, g, c.u, c.v);
  for (std::size_t t = 0; t < p.theta.size(); ++t) {
    EXPECT_EQ(p.theta_tilde[t], 0.0);
    EXPECT_EQ(p.theta[t], 0.0);
  }
  GasCoef h{0.3, 0.0, 0.7, 0.0, {}};
  const auto q = gas_filter(Family::Gumbel, h, c.u, c.v);
  for (double x : q.theta_tilde) EXPECT_NEAR(x, 0.3 / 0.3, 1e-12);
}

TEST(GasFilter, MatchesStepByStepRecursion) {
  for (Family f : copula::kAllFamilies) {
    const auto c = static_sample(f, {natural_mid(f), nu_for(f)}, 10, 5);
    const auto L = link_for(f);
    GasCoef g{0.05, 0.08, 0.9, 0.0, nu_for(f)};
    double x = g.k / (1 - g.B), ll = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
      const CopulaParam p{L.forward(x), nu_for(f)};
      ll += copula::log_density(f, p, c.u[t], c.v[t]);
      // left-to-right product: the finite-difference score amplifies a one-ulp change in x
      x = g.k + g.A * copula::score(f, p, c.u[t], c.v[t]) * L.derivative(x) + g.B * x;
    }
    EXPECT_NEAR(pair_loglik(Driver::Gas, f, g, c.u, c.v), ll, 1e-12) << copula::family_name(f);
  }
}

TEST(GasFilter, IndependenceLoglikZero) {
  const auto c = independent(300, 8);
  EXPECT_NEAR(pair_loglik(Driver::Gas, Family::Gaussian, GasCoef{0.0, 0.0, 0.5, 0.0, {}}, c.u, c.v), 0.0, 1e-12);
}

TEST(GasFilter, SwapInvariantAndInsideDomain) {
  for (Family f : copula::kAllFamilies) {
    const auto c = static_sample(f, {natural_mid(f), nu_for(f)}, 400, 12);
    GasCoef g{0.02, 0.1, 0.95, 0.0, nu_for(f)};
    const auto a = gas_filter(f, g, c.u, c.v);
    const auto b = gas_filter(f, g, c.v, c.u);
    EXPECT_NEAR(a.loglik, b.loglik, 1e-8) << copula::family_name(f);
    for (std::size_t t = 0; t < a.theta.size(); ++t) {
      EXPECT_NEAR(a.theta[t], link_for(f).forward(a.theta_tilde[t]), 1e-15);
      if (copula::is_elliptical(f)) {
        EXPECT_GT(a.theta[t], -1.0);
        EXPECT_LT(a.theta[t], 1.0);
      } else {
        EXPECT_GE(a.theta[t], 1.0);
      }
    }
  }
}

TEST(PattonFilter, ConstantWhenLoadingsVanish) {
  const auto c = independent(100, 4);
  PattonCoef p{0.6, 0.0, 0.0, 10, {}};
  const auto path = patton_filter(Family::Gaussian, p, c.u, c.v);
  for (double th : path.theta) EXPECT_NEAR(th, link_for(Family::Gaussian).forward(0.6), 1e-15);
}

TEST(PattonFilter, WindowOfOneUsesPreviousProduct) {
  const auto c = independent(50, 6);
  PattonCoef p{0.1, 0.4, 0.3, 1, {}};
  const auto path = patton_filter(Family::Gaussian, p, c.u, c.v);
  const auto L = link_for(Family::Gaussian);
  for (std::size_t t = 1; t < 50; ++t) {
    const double g = dist::normal_quantile(c.u[t - 1]) * dist::normal_quantile(c.v[t - 1]);
    EXPECT_NEAR(path.theta_tilde[t], 0.1 + 0.3 * path.theta[t - 1] + 0.4 * g, 1e-12);
  }
  (void)L;
}

TEST(PattonFilter, RhoInsideUnitInterval) {
  SplitMix64 rng(77);
  const auto c = independent(300, 9);
  for (int k = 0; k < 30; ++k) {
    PattonCoef p{-3 + 6 * rng.uniform(), -5 + 10 * rng.uniform(), -3 + 6 * rng.uniform(), 1 + int(rng.uniform() * 10), {}};
    ScopedWarningCapture quiet;
    const auto path = patton_filter(Family::Gaussian, p, c.u, c.v);
    for (double th : path.theta) {
      EXPECT_GT(th, -1.0);
      EXPECT_LT(th, 1.0);
    }
  }
}

TEST(FitPair, ConstantRhoRecovered) {
  const auto c = static_sample(Family::Gaussian, {0.5, {}}, 2000, 31);
  const auto fit = fit_pair(Family::Gaussian, Driver::Gas, c.u, c.v);
  const auto path = filter(Family::Gaussian, fit.coef, c.u, c.v);
  double m = 0;
  for (double r : path.theta) m += r;
  EXPECT_NEAR(m / path.theta.size(), 0.5, 0.07);
  EXPECT_EQ(fit.aic, 2.0 * free_params(fit.coef) - 2.0 * pair_loglik(Driver::Gas, Family::Gaussian, fit.coef, c.u, c.v));
}

TEST(FitPair, StaticGumbelRecovered) {
  const auto c = static_sample(Family::Gumbel, {2.0, {}}, 1500, 3);
  const auto fit = fit_pair(Family::Gumbel, Driver::Static, c.u, c.v);
  EXPECT_NEAR(std::get<StaticCoef>(fit.coef).theta, 2.0, 0.2);
}

TEST(FitPair, IndependenceDataSmallLoglik) {
  const auto c = independent(1000, 99);
  const auto fit = fit_pair(Family::Gaussian, Driver::Gas, c.u, c.v);
  EXPECT_LE(fit.loglik, 3.0);
  EXPECT_GE(fit.aic, -6.0);
}

TEST(FitPair, DegenerateInputDoesNotCrash) {
  const auto c = independent(200, 1);
  ScopedWarningCapture quiet;
  try {
    auto fit = fit_pair(Family::Gumbel, Driver::Gas, c.u, c.u);
    EXPECT_TRUE(std::isfinite(fit.loglik));
  } catch (const std::runtime_error&) {
  }
}

TEST(FitPair, GasGumbelPersistence) {
  // Weakly identified design (long-run theta near 1); see README notes.
  int hits = 0;
  for (int s = 0; s < 20; ++s) {
    const auto sample = simulate_pair(Family::Gumbel, GasCoef{-0.18, 0.05, 0.95, 0.0, {}}, 1500, 700 + s);
    ScopedWarningCapture quiet;
    const auto fit = fit_pair(Family::Gumbel, Driver::Gas, sample.u, sample.v);
    const double B = std::get<GasCoef>(fit.coef).B;
    hits += B >= 0.85 && B <= 0.999;
  }
  EXPECT_GE(hits, 16);
}

TEST(FitPair, StudentNuIsStatic) {
  const auto c = static_sample(Family::StudentT, {0.5, 5.0}, 1500, 21);
  const auto fit = fit_pair(Family::StudentT, Driver::Static, c.u, c.v);
  ASSERT_TRUE(coef_nu(fit.coef).has_value());
  EXPECT_GT(*coef_nu(fit.coef), 2.0);
  EXPECT_NEAR(std::get<StaticCoef>(fit.coef).theta, 0.5, 0.06);
}

TEST(SelectFamily, UpperTailData) {
  int ok = 0;
  for (int s = 0; s < 20; ++s) {
    const auto c = static_sample(Family::Gumbel, {2.0, {}}, 1500, 40 + s);
    ScopedWarningCapture quiet;
    const auto sel = select_family(c.u, c.v, copula::kAllFamilies, Driver::Gas);
    ok += sel.best.family == Family::Gumbel || sel.best.family == Family::StudentT;
    EXPECT_NE(sel.best.family, Family::RotGumbel);
  }
  EXPECT_GE(ok, 18);
}

TEST(SelectFamily, LowerTailData) {
  int ok = 0;
  for (int s = 0; s < 20; ++s) {
    const auto c = static_sample(Family::RotGumbel, {2.0, {}}, 1500, 90 + s);
    ScopedWarningCapture quiet;
    ok += select_family(c.u, c.v, copula::kAllFamilies, Driver::Gas).best.family == Family::RotGumbel;
  }
  EXPECT_GE(ok, 16);
}

TEST(SelectFamily, SingleCandidate) {
  const auto c = static_sample(Family::Gaussian, {0.3, {}}, 500, 5);
  const std::vector<Family> only{Family::RotGumbel};
  EXPECT_EQ(select_family(c.u, c.v, only, Driver::Static).best.family, Family::RotGumbel);
}

TEST(Coef, VectorRoundTrip) {
  Coef g = GasCoef{0.1, 0.2, 0.9, 0.0, 7.0};
  EXPECT_EQ(coef_vector(coef_from_vector(Driver::Gas, Family::StudentT, coef_vector(g))), coef_vector(g));
  Coef p = PattonCoef{0.1, 0.2, 0.3, 10, {}};
  EXPECT_EQ(coef_vector(coef_from_vector(Driver::Patton, Family::Gaussian, coef_vector(p))), coef_vector(p));
  std::vector<double> bad{0.1};
  EXPECT_THROW((void)coef_from_vector(Driver::Gas, Family::Gaussian, bad), std::invalid_argument);
  EXPECT_THROW(validate(Family::Gaussian, Coef{GasCoef{0, 0, 1.0, 0, {}}}), std::domain_error);
}

TEST(SimulatePair, PathMatchesFilter) {
  GasCoef g{0.02, 0.05, 0.95, 0.0, {}};
  const auto s = simulate_pair(Family::Gaussian, g, 500, 7);
  const auto p = gas_filter(Family::Gaussian, g, s.u, s.v);
  for (std::size_t t = 0; t < 500; ++t) EXPECT_NEAR(p.theta[t], s.theta[t], 1e-9);
}

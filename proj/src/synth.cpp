#include "tvvine/synth.hpp"

#include "tvvine/distributions.hpp"
#include "tvvine/rng.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace tvvine::synth {

namespace {

using copula::Family;
using dynamics::GasCoef;

struct EdgeSpec {
  Family family;
  double level;  // natural-scale long-run parameter
  double A, B;
  double nu = 0.0;
};

vine::FittedEdge make_edge(vine::EdgeLabel label, const EdgeSpec& s) {
  vine::FittedEdge e;
  e.label = std::move(label);
  e.fit.family = s.family;
  const double x = dynamics::link_for(s.family).inverse(s.level);
  GasCoef c{(1.0 - s.B) * x, s.A, s.B, 0.0, {}};
  if (s.family == Family::StudentT) c.nu = s.nu;
  e.fit.coef = c;
  e.fit.converged = true;
  return e;
}

std::vector<ingest::Date> business_days(std::size_t n) {
  using namespace std::chrono;
  std::vector<ingest::Date> out;
  sys_days d = sys_days{year{2018} / January / 2};
  while (out.size() < n) {
    const weekday wd{d};
    if (wd != Saturday && wd != Sunday) out.emplace_back(d);
    d += days{1};
  }
  return out;
}

}  // namespace

SynthModel default_model() {
  SynthModel m;
  auto& v = m.vine;
  v.structure.n = 6;
  v.structure.mode = vine::Mode::DVine;
  v.driver = dynamics::Driver::Gas;
  v.pit_mode = marginals::PitMode::Empirical;

  // Tree 1 is strongest, dependence fades with depth.
  const std::vector<std::vector<EdgeSpec>> spec = {
      {{Family::Gaussian, 0.60, 0.05, 0.95},
       {Family::StudentT, 0.50, 0.05, 0.93, 6.0},
       {Family::Gumbel, 1.90, 0.04, 0.93},
       {Family::RotGumbel, 1.60, 0.04, 0.93},
       {Family::Gaussian, 0.45, 0.05, 0.95}},
      {{Family::Gaussian, 0.25, 0.04, 0.90},
       {Family::Gumbel, 1.20, 0.0, 0.0},
       {Family::Gaussian, 0.20, 0.04, 0.90},
       {Family::StudentT, 0.15, 0.0, 0.0, 8.0}},
      {{Family::Gaussian, 0.10, 0.0, 0.0}, {Family::Gaussian, -0.10, 0.0, 0.0}, {Family::Gaussian, 0.12, 0.0, 0.0}},
      {{Family::Gaussian, 0.08, 0.0, 0.0}, {Family::Gaussian, 0.05, 0.0, 0.0}},
      {{Family::Gaussian, 0.05, 0.0, 0.0}},
  };
  for (std::size_t d = 0; d < spec.size(); ++d) {
    std::vector<vine::EdgeLabel> tree;
    std::vector<vine::FittedEdge> edges;
    for (std::size_t i = 0; i < spec[d].size(); ++i) {
      std::vector<int> given;
      for (std::size_t g = i + 1; g <= i + d; ++g) given.push_back(static_cast<int>(g));
      auto label = vine::make_label(static_cast<int>(i), static_cast<int>(i + d + 1), given);
      tree.push_back(label);
      edges.push_back(make_edge(label, spec[d][i]));
    }
    v.structure.trees.push_back(std::move(tree));
    v.edges.push_back(std::move(edges));
  }
  v.structure.validate();
  for (int i = 0; i < 6; ++i) v.names.push_back("X" + std::to_string(i + 1));

  const double persistence[6] = {0.97, 0.96, 0.95, 0.97, 0.94, 0.96};
  const double arch[6] = {0.08, 0.10, 0.07, 0.09, 0.11, 0.06};
  const double sd[6] = {0.012, 0.018, 0.010, 0.015, 0.020, 0.013};
  const double nu[6] = {5.0, 6.0, 4.5, 7.0, 5.5, 6.5};
  const double xi[6] = {1.05, 0.95, 1.10, 1.0, 1.08, 0.97};
  const double phi[6] = {0.10, -0.05, 0.15, 0.0, 0.08, 0.05};
  for (int i = 0; i < 6; ++i) {
    marginals::MarginalFit f;
    f.name = v.names[i];
    f.order = marginals::MarginalOrder{1, 0, false, 1, 1};
    f.mu = 2e-4 * (1.0 - phi[i]);
    f.phi = {phi[i]};
    f.alpha = {arch[i]};
    f.beta = {persistence[i] - arch[i]};
    f.omega = sd[i] * sd[i] * (1.0 - persistence[i]);
    f.nu = nu[i];
    f.xi_skew = xi[i];
    f.validate();
    m.marginals.push_back(std::move(f));
  }
  return m;
}

SynthData generate(const SynthModel& model, const SynthOptions& opt) {
  if (opt.rows < 2) throw std::invalid_argument("synth: need at least 2 rows");
  if (model.marginals.size() != static_cast<std::size_t>(model.vine.structure.n))
    throw std::invalid_argument("synth: marginal count does not match the vine dimension");
  const std::size_t n = opt.rows - 1;
  const std::size_t total = n + opt.burn_in;
  const int dim = model.vine.structure.n;

  auto path = vine::simulate_path(model.vine, total, substream_seed(opt.seed, 1));

  SynthData out;
  out.levels.dates = business_days(opt.rows);
  out.theta.resize(path.theta.size());
  for (std::size_t d = 0; d < path.theta.size(); ++d)
    for (const auto& e : path.theta[d]) out.theta[d].emplace_back(e.begin() + static_cast<std::ptrdiff_t>(opt.burn_in), e.end());

  for (int i = 0; i < dim; ++i) {
    const auto& f = model.marginals[i];
    const dist::SkewStudentT sst(f.nu, f.xi_skew);
    marginals::MarginalRecursion rec(f);
    ingest::NamedSeries s{f.name, {}};
    double level = opt.start_level * (1.0 + 0.2 * i);
    s.values.push_back(level);
    std::vector<double> u;
    for (std::size_t t = 0; t < total; ++t) {
      const double ut = path.panel.columns[i][t];
      const double r = rec.step(sst.quantile(copula::clamp_unit(ut)));
      if (t < opt.burn_in) continue;
      level *= std::exp(r);
      s.values.push_back(level);
      u.push_back(ut);
    }
    out.levels.series.push_back(std::move(s));
    out.uniforms.push_back(std::move(u));
  }
  out.levels.validate();
  return out;
}

}  // namespace tvvine::synth

#include "tvvine/config.hpp"
#include "tvvine/diag.hpp"
#include "tvvine/ingest.hpp"
#include "tvvine/marginals.hpp"
#include "tvvine/parallel.hpp"
#include "tvvine/risk.hpp"
#include "tvvine/rng.hpp"
#include "tvvine/serialize.hpp"
#include "tvvine/synth.hpp"
#include "tvvine/vine.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace tvvine;
namespace fs = std::filesystem;

namespace {

std::string g6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

ingest::IndicatorPanel load_indicator(const RunConfig& cfg) {
  return ingest::compute_indicator(ingest::load_panel(cfg.input, ingest::ColumnSchema{cfg.columns}));
}

// Per-series order selection and fit, in parallel over series.
std::vector<marginals::MarginalFit> fit_marginals(const RunConfig& cfg, const ingest::IndicatorPanel& data,
                                                  std::vector<marginals::OrderSelection>* sel_out = nullptr) {
  const auto grid = marginals::default_grid();
  std::vector<marginals::OrderSelection> sel(data.width());
  parallel_for(data.width(), static_cast<unsigned>(cfg.threads), [&](std::size_t i) {
    try {
      auto opts = cfg.marginal_options();
      opts.seed = substream_seed(cfg.seed, 100 + i);
      sel[i] = marginals::select_order(data.column(i), grid, opts, cfg.lags);
    } catch (const std::exception& e) {
      throw std::runtime_error("series '" + data.series[i].name + "': " + e.what());
    }
    sel[i].fit.name = data.series[i].name;
  });
  std::vector<marginals::MarginalFit> fits;
  for (const auto& s : sel) fits.push_back(s.fit);
  if (sel_out) *sel_out = std::move(sel);
  return fits;
}

void print_marginal_table(const std::vector<marginals::OrderSelection>& sel, std::size_t lag) {
  std::cout << pad("series", 12) << pad("order", 24) << pad("loglik", 14) << pad("aic", 14) << pad("LB_p", 12)
            << "ARCH_p\n";
  for (const auto& s : sel) {
    double lb = 1.0, arch = 1.0;
    if (s.fit.z.size() > lag + 1) {
      lb = ingest::ljung_box(s.fit.z, lag).p_value;
      arch = ingest::arch_lm_test(s.fit.z, lag).p_value;
    }
    std::cout << pad(s.fit.name, 12) << pad(s.order.label(), 24) << pad(g6(s.fit.loglik), 14) << pad(g6(s.fit.aic), 14)
              << pad(g6(lb), 12) << g6(arch) << (s.diagnostics_passed ? "" : "  (diagnostics not passed)") << '\n';
  }
}

void write_uniforms(const std::string& path, const ingest::IndicatorPanel& data, const marginals::UniformPanel& u) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "date";
  for (const auto& s : data.series) out << ',' << s.name;
  out << '\n';
  char buf[40];
  for (std::size_t t = 0; t < u.length(); ++t) {
    out << ingest::format_date(data.dates[t]);
    for (const auto& c : u.columns) {
      std::snprintf(buf, sizeof buf, "%.17g", c[t]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::string coef_text(const dynamics::Coef& c) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        std::string s;
        if constexpr (std::is_same_v<T, dynamics::GasCoef>)
          s = "k=" + g6(x.k) + " A=" + g6(x.A) + " B=" + g6(x.B);
        else if constexpr (std::is_same_v<T, dynamics::PattonCoef>)
          s = "omega=" + g6(x.omega) + " alpha=" + g6(x.alpha) + " beta=" + g6(x.beta);
        else
          s = "theta=" + g6(x.theta);
        if (x.nu) s += " nu=" + g6(*x.nu);
        return s;
      },
      c);
}

void print_edge_table(const vine::FittedTVVine& fv) {
  std::cout << "AIC = 2k - 2 loglik over the full sample\n";
  for (std::size_t d = 0; d < fv.edges.size(); ++d) {
    std::cout << "Tree " << d + 1 << '\n';
    std::cout << "  " << pad("edge", 16) << pad("family", 11) << pad("coefficients", 44) << "AIC\n";
    for (const auto& e : fv.edges[d])
      std::cout << "  " << pad(e.label.str(), 16) << pad(std::string(copula::family_name(e.fit.family)), 11)
                << pad(coef_text(e.fit.coef), 44) << g6(e.fit.aic) << (e.fit.converged ? "" : "  (not converged)")
                << '\n';
  }
  std::cout << "vine loglik " << g6(fv.loglik) << ", AIC " << g6(fv.aic) << '\n';
}

risk::WeightVector load_gdp_weights(const std::string& path, const ingest::IndicatorPanel& data) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gdp file " + path);
  std::map<std::string, double> gdp;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path + " row " + std::to_string(row) + ": expected name,gdp");
    const std::string name = line.substr(0, comma), value = line.substr(comma + 1);
    try {
      gdp[name] = std::stod(value);
    } catch (const std::exception&) {
      if (gdp.empty() && row == 1) continue;  // header
      throw std::runtime_error(path + " row " + std::to_string(row) + ": bad number '" + value + "'");
    }
  }
  std::vector<double> g;
  for (const auto& s : data.series) {
    auto it = gdp.find(s.name);
    if (it == gdp.end()) throw std::runtime_error(path + ": no GDP entry for series '" + s.name + "'");
    g.push_back(it->second);
  }
  return risk::gdp_weights(g);
}

struct Fitted {
  std::vector<marginals::MarginalFit> marginals;
  vine::FittedTVVine vine;
};

Fitted run_fit(const RunConfig& cfg, const ingest::IndicatorPanel& data, bool verbose) {
  if (data.width() < 2) throw std::runtime_error("fit needs at least 2 series");
  std::vector<marginals::OrderSelection> sel;
  Fitted f;
  f.marginals = fit_marginals(cfg, data, &sel);
  if (verbose) print_marginal_table(sel, cfg.lags);
  const auto panel = risk::uniform_panel(f.marginals, cfg.pit);
  f.vine = vine::fit_sequential(panel, cfg.vine_options());
  f.vine.names.clear();
  for (const auto& s : data.series) f.vine.names.push_back(s.name);
  ensure_dir(cfg.out);
  io::save_marginals(cfg.marginals_path(), f.marginals, cfg.lags);
  io::save_vine(cfg.vine_path(), f.vine);
  if (verbose) {
    print_edge_table(f.vine);
    std::vector<double> ml;
    for (const auto& m : f.marginals) ml.push_back(m.loglik);
    std::cout << "total loglik " << g6(vine::total_loglik(f.vine, ml)) << '\n';
    std::cout << "wrote " << cfg.marginals_path() << " and " << cfg.vine_path() << '\n';
  }
  return f;
}

// Loads stage artifacts and rebuilds residual and parameter paths on `data`.
Fitted load_fitted(const RunConfig& cfg, const ingest::IndicatorPanel& data) {
  for (const auto& p : {cfg.marginals_path(), cfg.vine_path()})
    if (!fs::exists(p)) throw std::runtime_error("missing artifact " + p + " (run `tvvine fit` first or pass --fit)");
  Fitted f;
  f.marginals = io::load_marginals(cfg.marginals_path());
  f.vine = io::load_vine(cfg.vine_path());
  if (f.marginals.size() != data.width())
    throw std::runtime_error("marginals artifact has " + std::to_string(f.marginals.size()) + " series, data has " +
                             std::to_string(data.width()));
  for (std::size_t i = 0; i < data.width(); ++i) {
    if (f.marginals[i].name != data.series[i].name)
      throw std::runtime_error("artifact series '" + f.marginals[i].name + "' does not match data column '" +
                               data.series[i].name + "'");
    marginals::refresh_paths(f.marginals[i], data.column(i));
  }
  f.vine = vine::refilter(f.vine, risk::uniform_panel(f.marginals, f.vine.pit_mode));
  return f;
}

void cmd_synth(const RunConfig& cfg, std::size_t rows) {
  synth::SynthOptions opt;
  opt.rows = rows;
  opt.seed = cfg.seed;
  const auto data = synth::generate(synth::default_model(), opt);
  ensure_dir(cfg.out);
  const auto path = (fs::path(cfg.out) / "synthetic_levels.csv").string();
  ingest::write_panel(path, data.levels.dates, data.levels.series);
  std::cout << "wrote " << path << " (" << data.levels.width() << " series x " << data.levels.length() << " rows)\n";
}

void cmd_stats(const RunConfig& cfg) {
  const auto data = load_indicator(cfg);
  ensure_dir(cfg.out);
  const auto path = (fs::path(cfg.out) / "stats.csv").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "series,n,mean,sd,skewness,kurtosis,ljung_box_p,arch_lm_p\n";
  std::cout << pad("series", 12) << pad("n", 7) << pad("mean", 14) << pad("sd", 14) << pad("skewness", 14)
            << pad("kurtosis", 14) << pad("LB_p", 14) << "ARCH_p\n";
  for (const auto& s : data.series) {
    const auto d = ingest::describe(s.values, cfg.lags);
    out << s.name << ',' << s.values.size() << ',' << g6(d.mean) << ',' << g6(d.sd) << ',' << g6(d.skewness) << ','
        << g6(d.kurtosis) << ',' << g6(d.ljung_box_p) << ',' << g6(d.arch_lm_p) << '\n';
    std::cout << pad(s.name, 12) << pad(std::to_string(s.values.size()), 7) << pad(g6(d.mean), 14) << pad(g6(d.sd), 14)
              << pad(g6(d.skewness), 14) << pad(g6(d.kurtosis), 14) << pad(g6(d.ljung_box_p), 14) << g6(d.arch_lm_p)
              << '\n';
  }
  std::cout << "wrote " << path << '\n';
}

void cmd_filter(const RunConfig& cfg) {
  const auto data = load_indicator(cfg);
  std::vector<marginals::OrderSelection> sel;
  const auto fits = fit_marginals(cfg, data, &sel);
  print_marginal_table(sel, cfg.lags);
  ensure_dir(cfg.out);
  io::save_marginals(cfg.marginals_path(), fits, cfg.lags);
  const auto upath = (fs::path(cfg.out) / "uniforms.csv").string();
  write_uniforms(upath, data, risk::uniform_panel(fits, cfg.pit));
  std::cout << "wrote " << cfg.marginals_path() << " and " << upath << '\n';
}

void cmd_simulate(const RunConfig& cfg, std::size_t draws, long at) {
  const auto data = load_indicator(cfg);
  const auto f = load_fitted(cfg, data);
  const std::size_t t = at < 0 ? data.length() : static_cast<std::size_t>(at);
  if (t > data.length()) throw std::runtime_error("--at beyond the data (max " + std::to_string(data.length()) + ")");
  const auto u = vine::simulate(f.vine, t, draws, cfg.seed, cfg.threads);
  // One-step-ahead moments at t.
  std::vector<double> mean(data.width()), sd(data.width());
  for (std::size_t i = 0; i < data.width(); ++i) {
    marginals::MarginalRecursion rec(f.marginals[i]);
    for (std::size_t s = 0; s < t; ++s) rec.observe(data.column(i)[s]);
    mean[i] = rec.next_mean();
    sd[i] = rec.next_sigma();
  }
  std::size_t clamped = 0;
  std::vector<std::vector<double>> r(data.width());
  for (std::size_t i = 0; i < data.width(); ++i) {
    const auto z = marginals::inverse_pit(u.columns[i], f.marginals[i], f.vine.pit_mode, &clamped);
    for (double x : z) r[i].push_back(mean[i] + sd[i] * x);
  }
  if (clamped) warn("simulate: " + std::to_string(clamped) + " draws clamped to the empirical residual hull");
  ensure_dir(cfg.out);
  const auto path = (fs::path(cfg.out) / "simulated.csv").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < data.width(); ++i) out << (i ? "," : "") << "u_" << data.series[i].name;
  for (std::size_t i = 0; i < data.width(); ++i) out << ",r_" << data.series[i].name;
  out << '\n';
  char buf[40];
  for (std::size_t k = 0; k < draws; ++k) {
    for (std::size_t i = 0; i < data.width(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", u.columns[i][k]);
      out << (i ? "," : "") << buf;
    }
    for (std::size_t i = 0; i < data.width(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r[i][k]);
      out << ',' << buf;
    }
    out << '\n';
  }
  std::cout << "wrote " << draws << " joint draws at t=" << t << " to " << path << '\n';
}

void cmd_backtest(const RunConfig& cfg, bool inline_fit) {
  const auto data = load_indicator(cfg);
  Fitted f = inline_fit ? run_fit(cfg, data, false) : load_fitted(cfg, data);
  risk::BacktestOptions opt;
  opt.window = cfg.window;
  opt.n_sims = cfg.sims;
  opt.alphas = cfg.alphas;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.refit_every = cfg.refit_every;
  opt.refit = cfg.vine_options();
  if (cfg.weights == WeightSource::Gdp) opt.weights = load_gdp_weights(cfg.gdp_file, data);
  const auto rep = risk::run_backtest(f.vine, f.marginals, data, opt);
  risk::emit_report(rep, cfg.out);
  std::cout << "# " << risk::kLossFormula << "\n# " << risk::kMadFormula << '\n';
  std::cout << pad("alpha", 9) << pad("fail_times", 12) << pad("fail_rate", 12) << pad("p_value", 12) << pad("LR", 12)
            << pad("loss", 14) << "mad\n";
  for (std::size_t a = 0; a < rep.series.size(); ++a) {
    const auto& k = rep.kupiec[a];
    std::cout << pad(g6(k.alpha), 9) << pad(std::to_string(k.N), 12) << pad(g6(k.fail_rate), 12)
              << pad(g6(k.p_value), 12) << pad(g6(k.LR), 12) << pad(g6(rep.loss[a].loss), 14) << g6(rep.loss[a].mad)
              << (rep.loss[a].no_exceedances ? "  (no exceedances)" : "") << '\n';
  }
  std::cout << "wrote reports to " << cfg.out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-varying vine copula fitting, simulation and VaR backtesting"};
  app.require_subcommand(1);
  app.fallthrough();

  // Flag name -> config key. Values are applied on top of --config.
  const std::vector<std::pair<std::string, std::string>> flags = {
      {"--input", "input"},       {"--columns", "columns"},         {"--pit", "pit"},
      {"--mode", "mode"},         {"--criterion", "criterion"},     {"--families", "families"},
      {"--driver", "driver"},     {"--gamma", "gamma"},             {"--lags", "lags"},
      {"--window", "window"},     {"--sims", "sims"},               {"--alphas", "alphas"},
      {"--weights", "weights"},   {"--gdp-file", "gdp_file"},       {"--refit-every", "refit_every"},
      {"--seed", "seed"},         {"--threads", "threads"},         {"--out", "out"},
      {"--marginals", "marginals_file"}, {"--vine", "vine_file"},
  };
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> opts;
  for (const auto& [flag, key] : flags) opts.emplace_back(app.add_option(flag, values[key], "config key " + key), key);
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value file; flags override it");
  bool dump_config = false;
  app.add_flag("--print-config", dump_config, "print the effective configuration");

  auto* synth_cmd = app.add_subcommand("synth", "write the bundled synthetic level panel");
  std::size_t rows = 1093;
  synth_cmd->add_option("--rows", rows, "level rows");
  app.add_subcommand("stats", "descriptive statistics of the log-difference indicators");
  app.add_subcommand("filter", "fit marginal models and write pseudo-observations");
  app.add_subcommand("fit", "fit marginals and the time-varying vine");
  auto* sim_cmd = app.add_subcommand("simulate", "joint draws from the fitted vine");
  std::size_t draws = 1000;
  long at = -1;
  sim_cmd->add_option("--draws", draws, "number of joint draws");
  sim_cmd->add_option("--at", at, "date index for the edge parameters (default: one step past the data)");
  auto* bt_cmd = app.add_subcommand("backtest", "rolling Monte Carlo VaR and Kupiec tests");
  bool inline_fit = false;
  bt_cmd->add_flag("--fit", inline_fit, "fit before backtesting instead of loading artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& [opt, key] : opts)
      if (opt->count() > 0) cfg.set(key, values[key]);
    cfg.validate();
    if (dump_config) std::cout << config_to_string(cfg);

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synth") {
      if (!app.get_option("--out")->count() && config_path.empty()) cfg.out = "data";
      cmd_synth(cfg, rows);
    } else if (name == "stats") {
      cmd_stats(cfg);
    } else if (name == "filter") {
      cmd_filter(cfg);
    } else if (name == "fit") {
      const auto data = load_indicator(cfg);
      (void)run_fit(cfg, data, true);
    } else if (name == "simulate") {
      cmd_simulate(cfg, draws, at);
    } else if (name == "backtest") {
      cmd_backtest(cfg, inline_fit);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 0;
}

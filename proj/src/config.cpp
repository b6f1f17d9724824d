#include "tvvine/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tvvine {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double to_double(const std::string& k, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("config: " + k + " expects a number, got '" + v + "'");
  return x;
}

unsigned long long to_unsigned(const std::string& k, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("config: " + k + " expects a non-negative integer, got '" + v + "'");
  return x;
}

int to_int(const std::string& k, const std::string& v) {
  const auto x = to_unsigned(k, v);
  if (x > 1000000000ULL) throw ConfigError("config: " + k + " out of range");
  return static_cast<int>(x);
}

template <class F>
auto parse_enum(const std::string& k, const std::string& v, F&& f) {
  try {
    return f(v);
  } catch (const std::exception& e) {
    throw ConfigError("config: " + k + ": " + e.what());
  }
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

}  // namespace

std::string_view weight_source_name(WeightSource w) { return w == WeightSource::Gdp ? "gdp" : "equal"; }

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string k = trim(key), v = trim(raw);
  if (k == "input") input = v;
  else if (k == "columns") columns = split_list(v);
  else if (k == "pit") pit = parse_enum(k, v, [](const std::string& s) { return marginals::parse_pit_mode(s); });
  else if (k == "mode") mode = parse_enum(k, v, [](const std::string& s) { return vine::parse_mode(s); });
  else if (k == "criterion") criterion = parse_enum(k, v, [](const std::string& s) { return vine::parse_criterion(s); });
  else if (k == "families") {
    families.clear();
    for (const auto& f : split_list(v))
      families.push_back(parse_enum(k, f, [](const std::string& s) { return copula::parse_family(s); }));
  } else if (k == "driver") driver = parse_enum(k, v, [](const std::string& s) { return dynamics::parse_driver(s); });
  else if (k == "gamma") gamma = to_double(k, v);
  else if (k == "patton_q") patton_q = to_int(k, v);
  else if (k == "pair_max_evals") pair_max_evals = to_int(k, v);
  else if (k == "pair_ftol") pair_ftol = to_double(k, v);
  else if (k == "marginal_restarts") marginal_restarts = to_int(k, v);
  else if (k == "marginal_max_evals") marginal_max_evals = to_int(k, v);
  else if (k == "lags") lags = to_unsigned(k, v);
  else if (k == "window") window = to_unsigned(k, v);
  else if (k == "sims") sims = to_unsigned(k, v);
  else if (k == "alphas") {
    alphas.clear();
    for (const auto& a : split_list(v)) alphas.push_back(to_double(k, a));
  } else if (k == "weights") {
    if (v == "equal") weights = WeightSource::Equal;
    else if (v == "gdp") weights = WeightSource::Gdp;
    else throw ConfigError("config: weights must be equal or gdp, got '" + v + "'");
  } else if (k == "gdp_file") gdp_file = v;
  else if (k == "refit_every") refit_every = to_unsigned(k, v);
  else if (k == "seed") seed = to_unsigned(k, v);
  else if (k == "threads") threads = to_int(k, v);
  else if (k == "out") out = v;
  else if (k == "marginals_file") marginals_file = v;
  else if (k == "vine_file") vine_file = v;
  else throw ConfigError("config: unknown key '" + k + "'");
}

void RunConfig::validate() const {
  if (families.empty()) throw ConfigError("config: families must not be empty");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("config: alphas must lie in (0, 1)");
  if (window == 0) throw ConfigError("config: window must be positive");
  if (sims == 0) throw ConfigError("config: sims must be positive");
  if (threads < 1) throw ConfigError("config: threads must be at least 1");
  if (patton_q < 1) throw ConfigError("config: patton_q must be at least 1");
  if (weights == WeightSource::Gdp && gdp_file.empty()) throw ConfigError("config: weights = gdp needs gdp_file");
}

std::string RunConfig::marginals_path() const {
  return marginals_file.empty() ? (std::filesystem::path(out) / "marginals.json").string() : marginals_file;
}

std::string RunConfig::vine_path() const {
  return vine_file.empty() ? (std::filesystem::path(out) / "vine.json").string() : vine_file;
}

vine::VineFitOptions RunConfig::vine_options() const {
  vine::VineFitOptions o;
  o.mode = mode;
  o.criterion = criterion;
  o.families = families;
  o.driver = driver;
  o.pair.gamma = gamma;
  o.pair.patton_q = patton_q;
  o.pair.nm.max_evals = pair_max_evals;
  o.pair.nm.ftol = pair_ftol;
  o.threads = threads;
  return o;
}

marginals::MarginalFitOptions RunConfig::marginal_options() const {
  marginals::MarginalFitOptions o;
  o.restarts = marginal_restarts;
  o.nm.max_evals = marginal_max_evals;
  o.seed = seed;
  return o;
}

std::string config_to_string(const RunConfig& c) {
  std::vector<std::string> fam, al;
  for (auto f : c.families) fam.emplace_back(copula::family_name(f));
  for (double a : c.alphas) al.push_back(full(a));
  std::ostringstream os;
  os << "input = " << c.input << '\n'
     << "columns = " << join(c.columns) << '\n'
     << "pit = " << marginals::pit_mode_name(c.pit) << '\n'
     << "mode = " << vine::mode_name(c.mode) << '\n'
     << "criterion = " << vine::criterion_name(c.criterion) << '\n'
     << "families = " << join(fam) << '\n'
     << "driver = " << dynamics::driver_name(c.driver) << '\n'
     << "gamma = " << full(c.gamma) << '\n'
     << "patton_q = " << c.patton_q << '\n'
     << "pair_max_evals = " << c.pair_max_evals << '\n'
     << "pair_ftol = " << full(c.pair_ftol) << '\n'
     << "marginal_restarts = " << c.marginal_restarts << '\n'
     << "marginal_max_evals = " << c.marginal_max_evals << '\n'
     << "lags = " << c.lags << '\n'
     << "window = " << c.window << '\n'
     << "sims = " << c.sims << '\n'
     << "alphas = " << join(al) << '\n'
     << "weights = " << weight_source_name(c.weights) << '\n'
     << "gdp_file = " << c.gdp_file << '\n'
     << "refit_every = " << c.refit_every << '\n'
     << "seed = " << c.seed << '\n'
     << "threads = " << c.threads << '\n'
     << "out = " << c.out << '\n'
     << "marginals_file = " << c.marginals_file << '\n'
     << "vine_file = " << c.vine_file << '\n';
  return os.str();
}

RunConfig parse_config(const std::string& text, RunConfig c) {
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(row) + ": expected key = value");
    try {
      c.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(row) + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace tvvine

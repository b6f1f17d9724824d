#pragma once

#include "tvvine/dynamics.hpp"
#include "tvvine/marginals.hpp"
#include "tvvine/paircopula.hpp"
#include "tvvine/vine.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvvine {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WeightSource { Equal, Gdp };

/// Settings shared by the pipeline stages. File form: one `key = value` per
/// line, `#` comments, lists comma separated. Defaults are the member
/// initializers below.
struct RunConfig {
  std::string input = "data/synthetic_levels.csv";
  std::vector<std::string> columns;  // empty: every value column
  marginals::PitMode pit = marginals::PitMode::Empirical;
  vine::Mode mode = vine::Mode::RVine;
  vine::TreeCriterion criterion = vine::TreeCriterion::MaxAbsTau;
  std::vector<copula::Family> families{copula::kAllFamilies.begin(), copula::kAllFamilies.end()};
  dynamics::Driver driver = dynamics::Driver::Gas;
  double gamma = 0.0;
  int patton_q = 10;
  int pair_max_evals = 3000;
  double pair_ftol = 1e-7;
  int marginal_restarts = 3;
  int marginal_max_evals = 6000;
  std::size_t lags = 10;
  std::size_t window = 400;
  std::size_t sims = 1000;
  std::vector<double> alphas{0.90, 0.95, 0.99, 0.995};
  WeightSource weights = WeightSource::Equal;
  std::string gdp_file;
  std::size_t refit_every = 0;
  std::uint64_t seed = 42;
  int threads = 1;
  std::string out = "out";
  std::string marginals_file;  // default: <out>/marginals.json
  std::string vine_file;       // default: <out>/vine.json

  /// Sets one field from its text form. Throws ConfigError on an unknown key or bad value.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  [[nodiscard]] std::string marginals_path() const;
  [[nodiscard]] std::string vine_path() const;
  [[nodiscard]] vine::VineFitOptions vine_options() const;
  [[nodiscard]] marginals::MarginalFitOptions marginal_options() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

[[nodiscard]] std::string_view weight_source_name(WeightSource w);
[[nodiscard]] std::string config_to_string(const RunConfig& c);
[[nodiscard]] RunConfig parse_config(const std::string& text, RunConfig base = {});
[[nodiscard]] RunConfig load_config(const std::string& path, RunConfig base = {});

}  // namespace tvvine

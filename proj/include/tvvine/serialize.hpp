#pragma once

#include "tvvine/marginals.hpp"
#include "tvvine/vine.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace tvvine::io {

inline constexpr int kFormatVersion = 1;

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Marginal records: orders, coefficients, likelihood and residual diagnostics.
// Residual paths are not stored; refresh them against the data after loading.
[[nodiscard]] std::string marginals_to_string(const std::vector<marginals::MarginalFit>& fits,
                                              std::size_t diagnostic_lag = 10);
[[nodiscard]] std::vector<marginals::MarginalFit> marginals_from_string(const std::string& text);
void save_marginals(const std::string& path, const std::vector<marginals::MarginalFit>& fits,
                    std::size_t diagnostic_lag = 10);
[[nodiscard]] std::vector<marginals::MarginalFit> load_marginals(const std::string& path);

// Vine: dimension, mode, R-vine matrix, per-edge family/driver/coefficients.
// Loaded vines carry no parameter paths (length 0); refilter before sampling.
[[nodiscard]] std::string vine_to_string(const vine::FittedTVVine& fitted);
[[nodiscard]] vine::FittedTVVine vine_from_string(const std::string& text);
void save_vine(const std::string& path, const vine::FittedTVVine& fitted);
[[nodiscard]] vine::FittedTVVine load_vine(const std::string& path);

[[nodiscard]] std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace tvvine::io

#pragma once

#include "tvvine/ingest.hpp"
#include "tvvine/marginals.hpp"
#include "tvvine/vine.hpp"

#include <cstdint>
#include <vector>

namespace tvvine::synth {

struct SynthOptions {
  std::size_t rows = 1093;  // level rows; the indicator panel has one fewer
  std::uint64_t seed = 42;
  std::size_t burn_in = 500;
  double start_level = 2.5;
};

/// The data-generating process behind the bundled dataset: a 6-variable
/// D-vine (order 1..6) with GAS edges in the first two trees and constant
/// edges above, and AR(1)-GARCH(1,1) skew-t marginals.
struct SynthModel {
  vine::FittedTVVine vine;  // coefficients only, no paths
  std::vector<marginals::MarginalFit> marginals;
};

[[nodiscard]] SynthModel default_model();

struct SynthData {
  ingest::RawPanel levels;
  std::vector<std::vector<double>> uniforms;                // [series][t], on indicator dates
  std::vector<std::vector<std::vector<double>>> theta;      // [tree][edge][t]
};

/// Business days from 2018-01-02; L_t = L_{t-1} exp(r_t).
[[nodiscard]] SynthData generate(const SynthModel& model, const SynthOptions& options = {});

}  // namespace tvvine::synth

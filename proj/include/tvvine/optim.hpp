#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tvvine::optim {

using Objective = std::function<double(std::span<const double>)>;

struct NelderMeadOptions {
  double ftol = 1e-7;            // simplex spread in f, relative to max(1, |f_best|)
  double xtol = 1e-9;            // simplex diameter
  std::size_t max_evals = 4000;
  double initial_step = 0.1;     // per-coordinate simplex offset (absolute)
  int max_rebuilds = 4;          // simplex restarts from the incumbent after convergence
};

struct OptimResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Minimizes `f` with an adaptive Nelder-Mead simplex (Gao-Han coefficients).
/// Non-finite objective values are treated as +infinity. After the simplex
/// collapses it is rebuilt around the best vertex; the run stops when a
/// rebuild no longer improves the objective by more than ftol.
[[nodiscard]] OptimResult nelder_mead(const Objective& f, std::vector<double> x0,
                                      const NelderMeadOptions& options = {});

/// Per-coordinate step variant.
[[nodiscard]] OptimResult nelder_mead(const Objective& f, std::vector<double> x0, std::span<const double> steps,
                                      const NelderMeadOptions& options = {});

}  // namespace tvvine::optim

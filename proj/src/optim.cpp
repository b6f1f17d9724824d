#include "tvvine/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tvvine::optim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Simplex {
  std::vector<std::vector<double>> points;
  std::vector<double> values;
};

class CountingObjective {
 public:
  CountingObjective(const Objective& f, std::size_t budget) : f_(f), budget_(budget) {}

  double operator()(std::span<const double> x) {
    ++count_;
    const double v = f_(x);
    return std::isfinite(v) ? v : kInf;
  }
  [[nodiscard]] bool exhausted() const { return count_ >= budget_; }
  [[nodiscard]] std::size_t count() const { return count_; }

 private:
  const Objective& f_;
  std::size_t budget_;
  std::size_t count_ = 0;
};

Simplex build_simplex(CountingObjective& f, const std::vector<double>& x0, std::span<const double> steps) {
  const std::size_t n = x0.size();
  Simplex s;
  s.points.assign(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) s.points[i + 1][i] += steps[i];
  s.values.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) s.values[i] = f(s.points[i]);
  return s;
}

void sort_simplex(Simplex& s) {
  std::vector<std::size_t> idx(s.points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
  Simplex sorted;
  for (auto i : idx) {
    sorted.points.push_back(std::move(s.points[i]));
    sorted.values.push_back(s.values[i]);
  }
  s = std::move(sorted);
}

double diameter(const Simplex& s) {
  double d = 0.0;
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    for (std::size_t k = 0; k < s.points[0].size(); ++k) {
      d = std::max(d, std::abs(s.points[i][k] - s.points[0][k]));
    }
  }
  return d;
}

// One Nelder-Mead descent from a fresh simplex. Returns true on tolerance convergence.
bool descend(CountingObjective& f, Simplex& s, const NelderMeadOptions& opt) {
  const std::size_t n = s.points[0].size();
  const double dn = static_cast<double>(n);
  const double alpha = 1.0;
  const double beta = 1.0 + 2.0 / dn;
  const double gamma = 0.75 - 1.0 / (2.0 * dn);
  const double delta = 1.0 - 1.0 / dn;

  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  while (true) {
    sort_simplex(s);
    const double fbest = s.values.front();
    const double fworst = s.values.back();
    if (std::isfinite(fworst) && fworst - fbest <= opt.ftol * std::max(1.0, std::abs(fbest))) return true;
    if (diameter(s) <= opt.xtol) return std::isfinite(fbest);
    if (f.exhausted()) return false;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += s.points[i][k] / dn;

    const auto& worst = s.points[n];
    for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + alpha * (centroid[k] - worst[k]);
    const double fr = f(xr);

    if (fr < s.values[0]) {
      for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + beta * (xr[k] - centroid[k]);
      const double fe = f(xe);
      if (fe < fr) {
        s.points[n] = xe;
        s.values[n] = fe;
      } else {
        s.points[n] = xr;
        s.values[n] = fr;
      }
      continue;
    }
    if (fr < s.values[n - 1]) {
      s.points[n] = xr;
      s.values[n] = fr;
      continue;
    }
    const bool outside = fr < s.values[n];
    for (std::size_t k = 0; k < n; ++k) {
      xc[k] = outside ? centroid[k] + gamma * (xr[k] - centroid[k]) : centroid[k] - gamma * (centroid[k] - worst[k]);
    }
    const double fc = f(xc);
    if (fc < (outside ? fr : s.values[n])) {
      s.points[n] = xc;
      s.values[n] = fc;
      continue;
    }
    // Shrink towards the best vertex.
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) s.points[i][k] = s.points[0][k] + delta * (s.points[i][k] - s.points[0][k]);
      s.values[i] = f(s.points[i]);
    }
  }
}

}  // namespace

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, std::span<const double> steps,
                        const NelderMeadOptions& options) {
  if (x0.empty()) throw std::invalid_argument("nelder_mead: empty starting point");
  if (steps.size() != x0.size()) throw std::invalid_argument("nelder_mead: step size mismatch");

  CountingObjective counted(f, options.max_evals);
  Simplex s = build_simplex(counted, x0, steps);
  bool converged = descend(counted, s, options);
  sort_simplex(s);

  for (int r = 0; r < options.max_rebuilds && !counted.exhausted(); ++r) {
    const double before = s.values.front();
    if (!std::isfinite(before)) break;
    std::vector<double> scaled(steps.begin(), steps.end());
    for (auto& v : scaled) v *= 0.5;
    Simplex fresh = build_simplex(counted, s.points.front(), scaled);
    fresh.points[0] = s.points.front();
    fresh.values[0] = before;
    converged = descend(counted, fresh, options);
    sort_simplex(fresh);
    s = std::move(fresh);
    if (before - s.values.front() <= options.ftol * std::max(1.0, std::abs(before))) break;
  }

  OptimResult out;
  out.x = s.points.front();
  out.value = s.values.front();
  out.evaluations = counted.count();
  out.converged = converged && std::isfinite(out.value);
  return out;
}

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& options) {
  std::vector<double> steps(x0.size(), options.initial_step);
  return nelder_mead(f, std::move(x0), steps, options);
}

}  // namespace tvvine::optim

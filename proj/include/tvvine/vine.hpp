#pragma once

#include "tvvine/dynamics.hpp"
#include "tvvine/marginals.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tvvine::vine {

using copula::Family;
using dynamics::Driver;

enum class Mode { RVine, CVine, DVine };
enum class TreeCriterion { MaxAbsTau, MinAbsTau };

[[nodiscard]] std::string_view mode_name(Mode m);
[[nodiscard]] Mode parse_mode(std::string_view s);
[[nodiscard]] std::string_view criterion_name(TreeCriterion c);
[[nodiscard]] TreeCriterion parse_criterion(std::string_view s);

/// Conditioned pair (a < b, 0-based variable indices) given a sorted set.
struct EdgeLabel {
  int a = 0;
  int b = 1;
  std::vector<int> given;

  [[nodiscard]] std::string str() const;  // 1-based, e.g. "1,3|2"
  [[nodiscard]] std::vector<int> complete() const;  // sorted {a, b} u given
  friend auto operator<=>(const EdgeLabel&, const EdgeLabel&) = default;
  friend bool operator==(const EdgeLabel&, const EdgeLabel&) = default;
};

/// Builds a canonical label from an unordered pair and an unsorted set.
[[nodiscard]] EdgeLabel make_label(int x, int y, std::vector<int> given);

struct VineStructure {
  int n = 0;
  Mode mode = Mode::RVine;
  std::vector<std::vector<EdgeLabel>> trees;  // trees[d] has n - 1 - d edges

  [[nodiscard]] std::size_t edge_count() const;
  /// Edge counts, label consistency, tree-1 spanning, proximity and
  /// per-level spanning. Throws std::invalid_argument.
  void validate() const;
  /// For an edge at level d >= 1, the indices of its two parents in trees[d-1].
  [[nodiscard]] std::pair<std::size_t, std::size_t> parents(std::size_t level, std::size_t index) const;
};

/// Candidate edge between nodes i and j (node = variable in tree 1, edge of
/// the previous tree otherwise).
struct CandidateEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  EdgeLabel label;
  double weight = 0.0;  // |tau|
};

/// Spanning tree over `n_nodes` restricted to `candidates`. Returns indices
/// into `candidates`. RVine: Prim growth from the node with the extreme
/// weight sum; CVine: star at that node; DVine: greedy chaining (first tree)
/// or the forced path (deeper trees). Ties resolved by label order.
[[nodiscard]] std::vector<std::size_t> select_tree(std::size_t n_nodes, std::span<const CandidateEdge> candidates,
                                                   Mode mode, TreeCriterion criterion, bool first_tree);

/// Pairs of previous-tree edges sharing all but one element of their
/// complete sets (for tree 1 edges: one common variable). Weights are zero.
[[nodiscard]] std::vector<CandidateEdge> proximity_candidates(std::span<const EdgeLabel> prev_tree);

/// h-columns of an edge along a filtered path: out_u = h(u | v; theta_t),
/// out_v = h(v | u; theta_t).
struct ConditionalPair {
  std::vector<double> out_u;
  std::vector<double> out_v;
};
[[nodiscard]] ConditionalPair conditional_series(Family f, std::span<const double> theta, std::optional<double> nu,
                                                 std::span<const double> u, std::span<const double> v);

struct FittedEdge {
  EdgeLabel label;
  dynamics::PairFit fit;
  dynamics::GasPath path;
};

struct FittedTVVine {
  VineStructure structure;
  std::vector<std::vector<FittedEdge>> edges;  // parallel to structure.trees
  Driver driver = Driver::Gas;
  marginals::PitMode pit_mode = marginals::PitMode::Empirical;
  std::vector<std::string> names;
  std::size_t length = 0;
  double loglik = 0.0;
  double aic = 0.0;

  [[nodiscard]] const FittedEdge& edge(const EdgeLabel& label) const;
};

struct VineFitOptions {
  Mode mode = Mode::RVine;
  TreeCriterion criterion = TreeCriterion::MaxAbsTau;
  std::vector<Family> families{copula::kAllFamilies.begin(), copula::kAllFamilies.end()};
  Driver driver = Driver::Gas;
  dynamics::PairFitOptions pair;
  int threads = 1;
};

/// Tree-by-tree structure selection and edge fitting. Throws
/// std::runtime_error naming the edge when an edge cannot be fitted.
[[nodiscard]] FittedTVVine fit_sequential(const marginals::UniformPanel& panel, const VineFitOptions& options);

/// Re-runs every edge filter with fixed coefficients on new pseudo-data
/// (same dimension), refreshing paths, logliks and AIC.
[[nodiscard]] FittedTVVine refilter(const FittedTVVine& fitted, const marginals::UniformPanel& panel);

/// Sum of marginal and copula log-likelihoods.
[[nodiscard]] double total_loglik(const FittedTVVine& fitted, std::span<const double> marginal_logliks);

using RVineMatrix = std::vector<std::vector<int>>;  // 1-based labels, 0 above the diagonal

/// Column j holds the edges (m_jj, m_ij | m_{i+1,j}, ..., m_{n,j}); the last
/// row is the first tree.
[[nodiscard]] RVineMatrix to_rvine_matrix(const VineStructure& s);
[[nodiscard]] VineStructure from_rvine_matrix(const RVineMatrix& m, Mode mode = Mode::RVine);

/// Draws from the vine with edge parameters taken at `t_index`; t_index ==
/// length uses the one-step-ahead parameters. Deterministic given seed.
[[nodiscard]] marginals::UniformPanel simulate(const FittedTVVine& fitted, std::size_t t_index, std::size_t n_draws,
                                               std::uint64_t seed, int threads = 1);

/// A path from the driven vine itself: at each t the edge parameters come
/// from the drivers, one joint draw is taken, and the drivers then consume
/// the conditional pairs of that draw. Only structure, families and
/// coefficients of `spec` are used.
struct PathSimulation {
  marginals::UniformPanel panel;
  std::vector<std::vector<std::vector<double>>> theta;  // [tree][edge][t]
};
[[nodiscard]] PathSimulation simulate_path(const FittedTVVine& spec, std::size_t n, std::uint64_t seed);

/// Compiled sampling recipe for a fixed structure; reused across dates.
class Sampler {
 public:
  explicit Sampler(const FittedTVVine& fitted);

  /// Per-edge parameters at t_index (see simulate).
  void set_time(std::size_t t_index);
  /// One joint draw from independent uniforms `w` (size n); writes the
  /// dependent uniforms to `out` (size n, variable order).
  void draw(std::span<const double> w, std::span<double> out, std::vector<double>& scratch) const;
  [[nodiscard]] int dimension() const { return n_; }

 private:
  struct Op {
    enum Kind { Inverse, Forward } kind;
    std::size_t edge;
    std::size_t out, arg, cond;
  };
  const FittedTVVine* fitted_;
  int n_ = 0;
  std::vector<const FittedEdge*> edges_;
  std::vector<copula::CopulaParam> params_;
  std::vector<std::size_t> draw_slots_;  // slot receiving w_k for each column
  std::vector<std::size_t> var_slots_;   // slot of F(x_v) per variable
  std::vector<Op> ops_;
  std::size_t n_slots_ = 0;
};

}  // namespace tvvine::vine

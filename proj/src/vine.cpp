#include "tvvine/vine.hpp"

#include "tvvine/diag.hpp"
#include "tvvine/parallel.hpp"
#include "tvvine/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tvvine::vine {

namespace {

using Mask = std::uint64_t;
using Key = std::pair<int, Mask>;

Mask mask_of(const std::vector<int>& vars) {
  Mask m = 0;
  for (int v : vars) m |= Mask{1} << v;
  return m;
}

std::vector<int> set_intersection(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<int> set_symdiff(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// Strictly better weight under the criterion, ties broken by label.
bool better(const CandidateEdge& x, const CandidateEdge& y, TreeCriterion c) {
  if (x.weight != y.weight) return c == TreeCriterion::MaxAbsTau ? x.weight > y.weight : x.weight < y.weight;
  return x.label < y.label;
}

bool better_sum(double x, double y, TreeCriterion c) { return c == TreeCriterion::MaxAbsTau ? x > y : x < y; }

using Store = std::map<Key, std::vector<double>>;

const std::vector<double>& lookup(const Store& s, int var, const std::vector<int>& given) {
  auto it = s.find({var, mask_of(given)});
  if (it == s.end()) throw std::logic_error("vine: missing conditional series");
  return it->second;
}

double abs_tau(std::span<const double> x, std::span<const double> y) {
  try {
    return std::abs(copula::kendall_tau(x, y));
  } catch (const std::exception&) {
    return 0.0;
  }
}

void store_outputs(Store& store, const FittedEdge& e, const std::vector<double>& u, const std::vector<double>& v) {
  auto cp = conditional_series(e.fit.family, e.path.theta, dynamics::coef_nu(e.fit.coef), u, v);
  auto ga = e.label.given;
  ga.push_back(e.label.b);
  auto gb = e.label.given;
  gb.push_back(e.label.a);
  store[{e.label.a, mask_of(ga)}] = std::move(cp.out_u);
  store[{e.label.b, mask_of(gb)}] = std::move(cp.out_v);
}

Store initial_store(const marginals::UniformPanel& panel) {
  Store s;
  for (std::size_t i = 0; i < panel.width(); ++i) {
    auto col = panel.columns[i];
    for (auto& x : col) x = copula::clamp_unit(x);
    s[{static_cast<int>(i), 0}] = std::move(col);
  }
  return s;
}

}  // namespace

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::RVine: return "rvine";
    case Mode::CVine: return "cvine";
    case Mode::DVine: return "dvine";
  }
  return "?";
}

Mode parse_mode(std::string_view s) {
  if (s == "rvine") return Mode::RVine;
  if (s == "cvine") return Mode::CVine;
  if (s == "dvine") return Mode::DVine;
  throw std::invalid_argument("unknown vine mode '" + std::string(s) + "'");
}

std::string_view criterion_name(TreeCriterion c) { return c == TreeCriterion::MaxAbsTau ? "max_abs_tau" : "min_abs_tau"; }

TreeCriterion parse_criterion(std::string_view s) {
  if (s == "max_abs_tau") return TreeCriterion::MaxAbsTau;
  if (s == "min_abs_tau") return TreeCriterion::MinAbsTau;
  throw std::invalid_argument("unknown tree criterion '" + std::string(s) + "'");
}

std::string EdgeLabel::str() const {
  std::ostringstream os;
  os << a + 1 << ',' << b + 1;
  if (!given.empty()) {
    os << '|';
    for (std::size_t i = 0; i < given.size(); ++i) os << (i ? "," : "") << given[i] + 1;
  }
  return os.str();
}

std::vector<int> EdgeLabel::complete() const {
  std::vector<int> c = given;
  c.push_back(a);
  c.push_back(b);
  std::sort(c.begin(), c.end());
  return c;
}

EdgeLabel make_label(int x, int y, std::vector<int> given) {
  if (x == y) throw std::invalid_argument("edge label: conditioned variables must differ");
  std::sort(given.begin(), given.end());
  return EdgeLabel{std::min(x, y), std::max(x, y), std::move(given)};
}

std::size_t VineStructure::edge_count() const {
  std::size_t c = 0;
  for (const auto& t : trees) c += t.size();
  return c;
}

std::pair<std::size_t, std::size_t> VineStructure::parents(std::size_t level, std::size_t index) const {
  if (level == 0 || level >= trees.size() || index >= trees[level].size())
    throw std::invalid_argument("vine structure: no parents for this edge");
  const auto& e = trees[level][index];
  const auto full = e.complete();
  const auto& prev = trees[level - 1];
  for (std::size_t i = 0; i < prev.size(); ++i) {
    const auto ci = prev[i].complete();
    if (!std::includes(full.begin(), full.end(), ci.begin(), ci.end())) continue;
    for (std::size_t j = i + 1; j < prev.size(); ++j) {
      const auto cj = prev[j].complete();
      if (!std::includes(full.begin(), full.end(), cj.begin(), cj.end())) continue;
      const auto common = set_intersection(ci, cj);
      if (common != e.given) continue;
      const auto sd = set_symdiff(ci, cj);
      if (sd.size() == 2 && sd[0] == e.a && sd[1] == e.b) return {i, j};
    }
  }
  throw std::invalid_argument("vine structure: edge " + e.str() + " violates the proximity condition");
}

void VineStructure::validate() const {
  if (n < 2) throw std::invalid_argument("vine structure: dimension must be at least 2");
  if (n > 62) throw std::invalid_argument("vine structure: dimension above 62 is not supported");
  if (trees.size() != static_cast<std::size_t>(n - 1))
    throw std::invalid_argument("vine structure: expected " + std::to_string(n - 1) + " trees");
  for (std::size_t d = 0; d < trees.size(); ++d) {
    const auto& t = trees[d];
    if (t.size() != static_cast<std::size_t>(n) - 1 - d)
      throw std::invalid_argument("vine structure: tree " + std::to_string(d + 1) + " has " +
                                  std::to_string(t.size()) + " edges, expected " + std::to_string(n - 1 - d));
    for (const auto& e : t) {
      if (e.a < 0 || e.b >= n || e.a >= e.b) throw std::invalid_argument("vine structure: bad conditioned pair");
      if (e.given.size() != d) throw std::invalid_argument("vine structure: edge " + e.str() + " has wrong level");
      if (!std::is_sorted(e.given.begin(), e.given.end()) ||
          std::adjacent_find(e.given.begin(), e.given.end()) != e.given.end())
        throw std::invalid_argument("vine structure: conditioning set of " + e.str() + " is not a sorted set");
      for (int g : e.given)
        if (g < 0 || g >= n || g == e.a || g == e.b)
          throw std::invalid_argument("vine structure: bad conditioning variable in " + e.str());
    }
    if (d == 0) {
      UnionFind uf(static_cast<std::size_t>(n));
      for (const auto& e : t)
        if (!uf.unite(e.a, e.b)) throw std::invalid_argument("vine structure: first tree contains a cycle");
    } else {
      UnionFind uf(trees[d - 1].size());
      for (std::size_t k = 0; k < t.size(); ++k) {
        const auto [i, j] = parents(d, k);
        if (!uf.unite(i, j)) throw std::invalid_argument("vine structure: tree " + std::to_string(d + 1) + " contains a cycle");
      }
    }
  }
}

std::vector<std::size_t> select_tree(std::size_t n_nodes, std::span<const CandidateEdge> cands, Mode mode,
                                     TreeCriterion criterion, bool first_tree) {
  std::vector<std::size_t> chosen;
  if (n_nodes <= 1) return chosen;
  for (const auto& c : cands)
    if (c.i >= n_nodes || c.j >= n_nodes || c.i == c.j) throw std::invalid_argument("select_tree: bad candidate edge");
  auto disconnected = [] { return std::invalid_argument("select_tree: allowed edges do not connect all nodes"); };

  std::vector<double> sums(n_nodes, 0.0);
  std::vector<std::vector<std::size_t>> incident(n_nodes);
  for (std::size_t k = 0; k < cands.size(); ++k) {
    sums[cands[k].i] += cands[k].weight;
    sums[cands[k].j] += cands[k].weight;
    incident[cands[k].i].push_back(k);
    incident[cands[k].j].push_back(k);
  }

  if (mode == Mode::DVine && !first_tree) {
    // Forced by the previous path.
    UnionFind uf(n_nodes);
    for (std::size_t k = 0; k < cands.size(); ++k)
      if (uf.unite(cands[k].i, cands[k].j)) chosen.push_back(k);
    if (chosen.size() != n_nodes - 1) throw disconnected();
    if (chosen.size() != cands.size()) throw std::invalid_argument("select_tree: D-vine candidates do not form a path");
    return chosen;
  }

  if (mode == Mode::CVine) {
    std::size_t root = n_nodes;
    for (std::size_t v = 0; v < n_nodes; ++v) {
      std::vector<std::size_t> nb;
      for (auto k : incident[v]) nb.push_back(cands[k].i == v ? cands[k].j : cands[k].i);
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      if (nb.size() != n_nodes - 1) continue;
      if (root == n_nodes || better_sum(sums[v], sums[root], criterion)) root = v;
    }
    if (root == n_nodes) throw std::invalid_argument("select_tree: no node is adjacent to all others (C-vine root)");
    std::vector<std::size_t> best_to(n_nodes, cands.size());
    for (auto k : incident[root]) {
      const std::size_t other = cands[k].i == root ? cands[k].j : cands[k].i;
      if (best_to[other] == cands.size() || better(cands[k], cands[best_to[other]], criterion)) best_to[other] = k;
    }
    for (std::size_t v = 0; v < n_nodes; ++v)
      if (v != root) chosen.push_back(best_to[v]);
    return chosen;
  }

  std::vector<bool> in(n_nodes, false);
  if (mode == Mode::DVine) {
    // Greedy chaining from the best edge, extending either end.
    if (cands.empty()) throw disconnected();
    std::size_t best = 0;
    for (std::size_t k = 1; k < cands.size(); ++k)
      if (better(cands[k], cands[best], criterion)) best = k;
    chosen.push_back(best);
    std::size_t end1 = cands[best].i, end2 = cands[best].j;
    in[end1] = in[end2] = true;
    while (chosen.size() < n_nodes - 1) {
      std::size_t pick = cands.size();
      for (std::size_t k = 0; k < cands.size(); ++k) {
        const auto& c = cands[k];
        const bool touches = c.i == end1 || c.i == end2 || c.j == end1 || c.j == end2;
        if (!touches || in[c.i] == in[c.j]) continue;
        if (pick == cands.size() || better(c, cands[pick], criterion)) pick = k;
      }
      if (pick == cands.size()) throw disconnected();
      const auto& c = cands[pick];
      const std::size_t fresh = in[c.i] ? c.j : c.i;
      const std::size_t old = in[c.i] ? c.i : c.j;
      if (old == end1) end1 = fresh;
      else end2 = fresh;
      in[fresh] = true;
      chosen.push_back(pick);
    }
    return chosen;
  }

  // R-vine: Prim growth.
  std::size_t start = 0;
  for (std::size_t v = 1; v < n_nodes; ++v)
    if (better_sum(sums[v], sums[start], criterion)) start = v;
  in[start] = true;
  while (chosen.size() < n_nodes - 1) {
    std::size_t pick = cands.size();
    for (std::size_t k = 0; k < cands.size(); ++k) {
      const auto& c = cands[k];
      if (in[c.i] == in[c.j]) continue;
      if (pick == cands.size() || better(c, cands[pick], criterion)) pick = k;
    }
    if (pick == cands.size()) throw disconnected();
    in[cands[pick].i] = in[cands[pick].j] = true;
    chosen.push_back(pick);
  }
  return chosen;
}

std::vector<CandidateEdge> proximity_candidates(std::span<const EdgeLabel> prev) {
  std::vector<CandidateEdge> out;
  std::vector<std::vector<int>> full(prev.size());
  for (std::size_t i = 0; i < prev.size(); ++i) full[i] = prev[i].complete();
  for (std::size_t i = 0; i < prev.size(); ++i) {
    for (std::size_t j = i + 1; j < prev.size(); ++j) {
      auto common = set_intersection(full[i], full[j]);
      if (common.size() + 1 != full[i].size()) continue;
      const auto sd = set_symdiff(full[i], full[j]);
      out.push_back(CandidateEdge{i, j, make_label(sd[0], sd[1], std::move(common)), 0.0});
    }
  }
  return out;
}

ConditionalPair conditional_series(Family f, std::span<const double> theta, std::optional<double> nu,
                                   std::span<const double> u, std::span<const double> v) {
  if (theta.size() != u.size() || u.size() != v.size())
    throw std::invalid_argument("conditional_series: path length mismatch");
  ConditionalPair out;
  out.out_u.resize(u.size());
  out.out_v.resize(u.size());
  for (std::size_t t = 0; t < u.size(); ++t) {
    const copula::CopulaParam p{theta[t], nu};
    out.out_u[t] = copula::clamp_unit(copula::h_function(f, p, u[t], v[t]));
    out.out_v[t] = copula::clamp_unit(copula::h_function(f, p, v[t], u[t]));
  }
  return out;
}

const FittedEdge& FittedTVVine::edge(const EdgeLabel& label) const {
  for (const auto& t : edges)
    for (const auto& e : t)
      if (e.label == label) return e;
  throw std::out_of_range("fitted vine: no edge " + label.str());
}

FittedTVVine fit_sequential(const marginals::UniformPanel& panel, const VineFitOptions& options) {
  panel.validate();
  const int n = static_cast<int>(panel.width());
  if (n < 2) throw std::invalid_argument("fit_sequential: need at least 2 variables");
  if (n > 62) throw std::invalid_argument("fit_sequential: dimension above 62 is not supported");
  if (options.families.empty()) throw std::invalid_argument("fit_sequential: empty family list");

  FittedTVVine fv;
  fv.structure.n = n;
  fv.structure.mode = options.mode;
  fv.driver = options.driver;
  fv.pit_mode = panel.mode;
  fv.length = panel.length();
  Store store = initial_store(panel);

  for (int d = 0; d < n - 1; ++d) {
    std::vector<CandidateEdge> cands;
    std::size_t n_nodes;
    if (d == 0) {
      n_nodes = static_cast<std::size_t>(n);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) cands.push_back(CandidateEdge{std::size_t(i), std::size_t(j), make_label(i, j, {}), 0.0});
    } else {
      n_nodes = fv.structure.trees.back().size();
      cands = proximity_candidates(fv.structure.trees.back());
    }
    for (auto& c : cands)
      c.weight = abs_tau(lookup(store, c.label.a, c.label.given), lookup(store, c.label.b, c.label.given));
    const auto chosen = select_tree(n_nodes, cands, options.mode, options.criterion, d == 0);
    std::vector<EdgeLabel> labels;
    for (auto k : chosen) labels.push_back(cands[k].label);
    std::sort(labels.begin(), labels.end());

    std::vector<FittedEdge> level(labels.size());
    parallel_for(labels.size(), static_cast<unsigned>(std::max(1, options.threads)), [&](std::size_t k) {
      const auto& lab = labels[k];
      const auto& u = lookup(store, lab.a, lab.given);
      const auto& v = lookup(store, lab.b, lab.given);
      try {
        auto sel = dynamics::select_family(u, v, options.families, options.driver, options.pair);
        FittedEdge e{lab, sel.best, {}};
        e.path = dynamics::filter(e.fit.family, e.fit.coef, u, v);
        level[k] = std::move(e);
      } catch (const std::exception& ex) {
        throw std::runtime_error("edge " + lab.str() + ": " + ex.what());
      }
    });
    for (const auto& e : level) {
      store_outputs(store, e, lookup(store, e.label.a, e.label.given), lookup(store, e.label.b, e.label.given));
      fv.loglik += e.fit.loglik;
      fv.aic += e.fit.aic;
    }
    fv.structure.trees.push_back(std::move(labels));
    fv.edges.push_back(std::move(level));
  }
  fv.structure.validate();
  return fv;
}

FittedTVVine refilter(const FittedTVVine& fitted, const marginals::UniformPanel& panel) {
  panel.validate();
  if (static_cast<int>(panel.width()) != fitted.structure.n)
    throw std::invalid_argument("refilter: panel width does not match the vine dimension");
  FittedTVVine fv = fitted;
  fv.length = panel.length();
  fv.pit_mode = panel.mode;
  fv.loglik = 0.0;
  fv.aic = 0.0;
  Store store = initial_store(panel);
  for (auto& level : fv.edges) {
    for (auto& e : level) {
      const auto& u = lookup(store, e.label.a, e.label.given);
      const auto& v = lookup(store, e.label.b, e.label.given);
      e.path = dynamics::filter(e.fit.family, e.fit.coef, u, v);
      e.fit.loglik = e.path.loglik;
      e.fit.aic = 2.0 * dynamics::free_params(e.fit.coef) - 2.0 * e.fit.loglik;
      fv.loglik += e.fit.loglik;
      fv.aic += e.fit.aic;
    }
    for (const auto& e : level)
      store_outputs(store, e, lookup(store, e.label.a, e.label.given), lookup(store, e.label.b, e.label.given));
  }
  return fv;
}

double total_loglik(const FittedTVVine& fitted, std::span<const double> marginal_logliks) {
  if (marginal_logliks.size() != static_cast<std::size_t>(fitted.structure.n))
    throw std::invalid_argument("total_loglik: one marginal log-likelihood per variable required");
  double s = std::accumulate(marginal_logliks.begin(), marginal_logliks.end(), 0.0);
  for (const auto& level : fitted.edges)
    for (const auto& e : level) s += e.fit.loglik;
  return s;
}

RVineMatrix to_rvine_matrix(const VineStructure& s) {
  s.validate();
  const int n = s.n;
  RVineMatrix m(n, std::vector<int>(n, 0));
  auto remaining = s.trees;
  for (int j = 0; j < n - 1; ++j) {
    const int top = n - 2 - j;
    if (remaining[top].size() != 1) throw std::invalid_argument("to_rvine_matrix: invalid structure");
    const int x = remaining[top][0].b;
    m[j][j] = x + 1;
    std::vector<int> full = remaining[top][0].complete();
    for (int level = top; level >= 0; --level) {
      auto& t = remaining[level];
      auto it = std::find_if(t.begin(), t.end(), [&](const EdgeLabel& e) {
        if (e.a != x && e.b != x) return false;
        const auto c = e.complete();
        return std::includes(full.begin(), full.end(), c.begin(), c.end());
      });
      if (it == t.end()) throw std::invalid_argument("to_rvine_matrix: invalid structure");
      const int y = it->a == x ? it->b : it->a;
      m[n - 1 - level][j] = y + 1;
      full = it->given;
      full.push_back(x);
      std::sort(full.begin(), full.end());
      t.erase(it);
    }
  }
  // Last remaining variable.
  std::vector<bool> used(n, false);
  for (int j = 0; j < n - 1; ++j) used[m[j][j] - 1] = true;
  for (int v = 0; v < n; ++v)
    if (!used[v]) m[n - 1][n - 1] = v + 1;
  return m;
}

VineStructure from_rvine_matrix(const RVineMatrix& m, Mode mode) {
  const int n = static_cast<int>(m.size());
  if (n < 2) throw std::invalid_argument("from_rvine_matrix: dimension must be at least 2");
  for (const auto& row : m)
    if (static_cast<int>(row.size()) != n) throw std::invalid_argument("from_rvine_matrix: matrix is not square");
  std::vector<bool> seen(n, false);
  for (int j = 0; j < n; ++j) {
    const int x = m[j][j];
    if (x < 1 || x > n || seen[x - 1]) throw std::invalid_argument("from_rvine_matrix: diagonal is not a permutation");
    seen[x - 1] = true;
    for (int i = 0; i < j; ++i)
      if (m[i][j] != 0) throw std::invalid_argument("from_rvine_matrix: entries above the diagonal");
  }
  VineStructure s;
  s.n = n;
  s.mode = mode;
  s.trees.assign(n - 1, {});
  for (int j = 0; j < n - 1; ++j) {
    const int x = m[j][j] - 1;
    for (int i = j + 1; i < n; ++i) {
      const int y = m[i][j] - 1;
      if (y < 0 || y >= n) throw std::invalid_argument("from_rvine_matrix: entry out of range");
      std::vector<int> given;
      for (int k = i + 1; k < n; ++k) given.push_back(m[k][j] - 1);
      s.trees[n - 1 - i].push_back(make_label(x, y, given));
    }
  }
  for (auto& t : s.trees) std::sort(t.begin(), t.end());
  s.validate();
  return s;
}

Sampler::Sampler(const FittedTVVine& fitted) : fitted_(&fitted), n_(fitted.structure.n) {
  const auto m = to_rvine_matrix(fitted.structure);
  std::map<Key, std::size_t> slot;
  auto slot_of = [&](int var, const std::vector<int>& given) {
    const Key k{var, mask_of(given)};
    auto it = slot.find(k);
    if (it != slot.end()) return it->second;
    const std::size_t id = slot.size();
    slot.emplace(k, id);
    return id;
  };
  std::map<EdgeLabel, std::size_t> edge_index;
  for (const auto& level : fitted.edges)
    for (const auto& e : level) {
      edge_index.emplace(e.label, edges_.size());
      edges_.push_back(&e);
    }
  params_.resize(edges_.size());

  const int n = n_;
  draw_slots_.assign(n, 0);
  draw_slots_[n - 1] = slot_of(m[n - 1][n - 1] - 1, {});
  std::vector<Op> ops;
  for (int j = n - 2; j >= 0; --j) {
    const int x = m[j][j] - 1;
    std::vector<int> partners;
    for (int i = j + 1; i < n; ++i) partners.push_back(m[i][j] - 1);
    draw_slots_[j] = slot_of(x, partners);
    // Inverse pass from the deepest edge down to the first tree.
    for (int i = j + 1; i < n; ++i) {
      const int y = m[i][j] - 1;
      std::vector<int> given(partners.begin() + (i - j), partners.end());
      std::vector<int> with_y = given;
      with_y.push_back(y);
      const auto e = edge_index.at(make_label(x, y, given));
      ops.push_back(Op{Op::Inverse, e, slot_of(x, given), slot_of(x, with_y), slot_of(y, given)});
    }
    // Forward pass producing the partners' conditionals given x.
    for (int i = n - 1; i > j; --i) {
      const int y = m[i][j] - 1;
      std::vector<int> given(partners.begin() + (i - j), partners.end());
      std::vector<int> with_x = given;
      with_x.push_back(x);
      const auto e = edge_index.at(make_label(x, y, given));
      ops.push_back(Op{Op::Forward, e, slot_of(y, with_x), slot_of(y, given), slot_of(x, given)});
    }
  }
  var_slots_.resize(n);
  for (int v = 0; v < n; ++v) var_slots_[v] = slot_of(v, {});
  n_slots_ = slot.size();

  // Drop forward steps whose outputs are never read.
  std::vector<bool> needed(n_slots_, false);
  for (auto s : var_slots_) needed[s] = true;
  std::vector<Op> kept;
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    if (!needed[it->out]) continue;
    needed[it->arg] = needed[it->cond] = true;
    kept.push_back(*it);
  }
  ops_.assign(kept.rbegin(), kept.rend());
}

void Sampler::set_time(std::size_t t) {
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const auto& e = *edges_[k];
    double theta;
    if (t < e.path.theta.size()) theta = e.path.theta[t];
    else if (t == e.path.theta.size()) theta = e.path.next_theta;
    else throw std::out_of_range("simulate: t_index " + std::to_string(t) + " beyond the filtered path");
    params_[k] = copula::CopulaParam{theta, dynamics::coef_nu(e.fit.coef)};
  }
}

void Sampler::draw(std::span<const double> w, std::span<double> out, std::vector<double>& s) const {
  s.assign(n_slots_, 0.0);
  for (int k = 0; k < n_; ++k) s[draw_slots_[k]] = copula::clamp_unit(w[k]);
  for (const auto& op : ops_) {
    const auto& e = *edges_[op.edge];
    if (op.kind == Op::Inverse) {
      try {
        s[op.out] = copula::clamp_unit(copula::h_inverse(e.fit.family, params_[op.edge], s[op.arg], s[op.cond]));
      } catch (const std::exception& ex) {
        throw std::runtime_error("simulate: inverse h failed on edge " + e.label.str() + ": " + ex.what());
      }
    } else {
      s[op.out] = copula::clamp_unit(copula::h_function(e.fit.family, params_[op.edge], s[op.arg], s[op.cond]));
    }
  }
  for (int v = 0; v < n_; ++v) out[v] = s[var_slots_[v]];
}

marginals::UniformPanel simulate(const FittedTVVine& fitted, std::size_t t_index, std::size_t n_draws,
                                 std::uint64_t seed, int threads) {
  if (n_draws == 0) throw std::invalid_argument("simulate: n_draws must be positive");
  Sampler sampler(fitted);
  sampler.set_time(t_index);
  const int n = fitted.structure.n;
  marginals::UniformPanel panel;
  panel.mode = fitted.pit_mode;
  panel.columns.assign(n, std::vector<double>(n_draws));
  parallel_for(n_draws, static_cast<unsigned>(std::max(1, threads)), [&](std::size_t k) {
    SplitMix64 rng(substream_seed(seed, k));
    std::vector<double> w(n), x(n), scratch;
    for (auto& wi : w) wi = rng.uniform();
    try {
      sampler.draw(w, x, scratch);
    } catch (const std::exception& ex) {
      throw std::runtime_error(std::string(ex.what()) + " (draw " + std::to_string(k) + ")");
    }
    for (int v = 0; v < n; ++v) panel.columns[v][k] = x[v];
  });
  return panel;
}

PathSimulation simulate_path(const FittedTVVine& spec, std::size_t n, std::uint64_t seed) {
  spec.structure.validate();
  const int dim = spec.structure.n;
  FittedTVVine work = spec;
  std::vector<std::vector<dynamics::DriverState>> states(work.edges.size());
  for (std::size_t d = 0; d < work.edges.size(); ++d)
    for (auto& e : work.edges[d]) {
      states[d].emplace_back(e.fit.family, e.fit.coef);
      e.path = dynamics::GasPath{};
      e.path.theta.assign(1, 0.0);
    }
  Sampler sampler(work);

  PathSimulation out;
  out.panel.columns.assign(dim, std::vector<double>(n));
  out.theta.resize(work.edges.size());
  for (std::size_t d = 0; d < work.edges.size(); ++d)
    out.theta[d].assign(work.edges[d].size(), std::vector<double>(n));

  SplitMix64 rng(seed);
  std::vector<double> w(dim), u(dim), scratch;
  marginals::UniformPanel one;
  one.columns.assign(dim, std::vector<double>(1));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < work.edges.size(); ++d)
      for (std::size_t k = 0; k < work.edges[d].size(); ++k) {
        work.edges[d][k].path.theta[0] = states[d][k].theta();
        out.theta[d][k][t] = states[d][k].theta();
      }
    sampler.set_time(0);
    for (auto& x : w) x = rng.uniform();
    sampler.draw(w, u, scratch);
    for (int i = 0; i < dim; ++i) {
      out.panel.columns[i][t] = u[i];
      one.columns[i][0] = u[i];
    }
    Store store = initial_store(one);
    for (std::size_t d = 0; d < work.edges.size(); ++d) {
      for (std::size_t k = 0; k < work.edges[d].size(); ++k) {
        const auto& e = work.edges[d][k];
        const double uu = lookup(store, e.label.a, e.label.given)[0];
        const double vv = lookup(store, e.label.b, e.label.given)[0];
        auto& st = states[d][k];
        const copula::CopulaParam p{st.theta(), dynamics::coef_nu(e.fit.coef)};
        const double sc = st.needs_score() ? copula::score(e.fit.family, p, uu, vv) : 0.0;
        st.advance(sc, dynamics::patton_term(e.fit.family, uu, vv));
      }
      for (const auto& e : work.edges[d])
        store_outputs(store, e, lookup(store, e.label.a, e.label.given), lookup(store, e.label.b, e.label.given));
    }
  }
  return out;
}

}  // namespace tvvine::vine

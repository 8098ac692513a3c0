#include "prefdb/matching.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <unordered_set>

#include "prefdb/error.hpp"

namespace prefdb {

namespace {

// Backtracking search over node -> position assignments.  Nodes are placed
// in ascending candidate-count order; edge constraints are checked as soon
// as both endpoints are placed.
struct EmbeddingSearch {
  const LabelPattern& g;
  std::vector<std::vector<int>> candidates;      // per node, 1-based positions
  std::vector<std::vector<std::pair<int, bool>>> adj;  // node -> (other, other_is_successor)
  std::vector<int> order;                        // placement order
  std::vector<int> pos;                          // node -> assigned position, 0 = unset

  EmbeddingSearch(const Ranking& t, const LabelingFunction& lam, const LabelPattern& g)
      : g(g), candidates(g.size()), adj(g.size()), pos(g.size(), 0) {
    for (int v = 0; v < g.size(); ++v)
      for (int p = 1; p <= t.size(); ++p)
        if (lam.carries_all(t.at(p), g.nodes()[v].labels)) candidates[v].push_back(p);
    for (auto [a, b] : g.edges()) {
      adj[a].emplace_back(b, true);
      adj[b].emplace_back(a, false);
    }
    order.resize(g.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return candidates[a].size() < candidates[b].size();
    });
  }

  bool place(std::size_t k) {
    if (k == order.size()) return true;
    int v = order[k];
    for (int p : candidates[v]) {
      bool ok = true;
      for (auto [w, w_after] : adj[v]) {
        if (pos[w] == 0) continue;
        if (w_after ? (p >= pos[w]) : (pos[w] >= p)) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      pos[v] = p;
      if (place(k + 1)) return true;
      pos[v] = 0;
    }
    return false;
  }
};

}  // namespace

std::optional<std::vector<int>> find_embedding(const Ranking& t,
                                               const LabelingFunction& lam,
                                               const LabelPattern& g) {
  EmbeddingSearch search(t, lam, g);
  if (!search.place(0)) return std::nullopt;
  return search.pos;
}

bool matches(const Ranking& t, const LabelingFunction& lam, const LabelPattern& g) {
  EmbeddingSearch search(t, lam, g);
  return search.place(0);
}

bool matches_union(const Ranking& t, const LabelingFunction& lam,
                   const PatternUnion& g) {
  for (const auto& p : g.patterns)
    if (matches(t, lam, p)) return true;
  return false;
}

std::vector<PartialOrder> decompose_to_partial_orders(
    const LabelPattern& g, const LabelingFunction& lam,
    const std::vector<ItemId>& universe, const DecomposeLimits& limits) {
  int q = g.size();
  std::vector<std::vector<const ItemId*>> candidates(q);
  for (int v = 0; v < q; ++v) {
    for (const auto& item : universe)
      if (lam.carries_all(item, g.nodes()[v].labels)) candidates[v].push_back(&item);
    if (candidates[v].empty()) return {};  // unsatisfiable node
  }

  std::set<PartialOrder> seen;
  std::vector<PartialOrder> result;
  std::vector<const ItemId*> chosen(q, nullptr);
  std::function<void(int)> rec = [&](int v) {
    if (v == q) {
      std::vector<std::pair<ItemId, ItemId>> pairs;
      pairs.reserve(g.edges().size());
      for (auto [a, b] : g.edges()) {
        if (*chosen[a] == *chosen[b]) return;  // edge endpoints must differ
        pairs.emplace_back(*chosen[a], *chosen[b]);
      }
      PartialOrder po;
      try {
        po = PartialOrder(std::move(pairs));
      } catch (const Error&) {
        return;  // induced item digraph cyclic: no ranking realizes it
      }
      if (seen.insert(po).second) {
        result.push_back(std::move(po));
        if (result.size() > limits.max_partial_orders)
          throw GuardError("pattern decomposition exceeds partial order cap of " +
                           std::to_string(limits.max_partial_orders));
      }
      return;
    }
    for (const ItemId* item : candidates[v]) {
      chosen[v] = item;
      rec(v + 1);
    }
  };
  rec(0);
  return result;
}

std::vector<SubRanking> decompose_to_subrankings(
    const PatternUnion& g, const LabelingFunction& lam,
    const std::vector<ItemId>& universe, const DecomposeLimits& limits) {
  std::unordered_set<Ranking, RankingHash> seen;
  std::vector<SubRanking> result;
  for (const auto& p : g.patterns) {
    for (const auto& po : decompose_to_partial_orders(p, lam, universe, limits)) {
      for (auto& ext : linear_extensions(po, limits.linear_extension_guard)) {
        if (!seen.insert(ext).second) continue;
        result.push_back(std::move(ext));
        if (result.size() > limits.max_subrankings)
          throw GuardError("pattern decomposition exceeds sub-ranking cap of " +
                           std::to_string(limits.max_subrankings));
      }
    }
  }
  return result;
}

}  // namespace prefdb

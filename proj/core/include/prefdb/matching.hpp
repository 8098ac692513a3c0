#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "prefdb/pattern.hpp"
#include "prefdb/ranking.hpp"

namespace prefdb {

// An embedding maps each pattern node to a 1-based position of a ranking
// such that the item at that position carries all node labels and every
// edge (l, r) has position(l) < position(r).  Nodes not related by edges
// may share a position.

// First embedding found (nodes with fewer candidate positions are placed
// first, candidate positions tried in ascending order), or nullopt.
std::optional<std::vector<int>> find_embedding(const Ranking& t,
                                               const LabelingFunction& lam,
                                               const LabelPattern& g);

bool matches(const Ranking& t, const LabelingFunction& lam, const LabelPattern& g);

// True when t matches at least one pattern of g.
bool matches_union(const Ranking& t, const LabelingFunction& lam,
                   const PatternUnion& g);

struct DecomposeLimits {
  std::size_t max_partial_orders = 100000;
  std::size_t max_subrankings = 100000;
  int linear_extension_guard = 12;
};

// All item-level partial orders a pattern can induce: every assignment of
// nodes to label-matching items whose induced item digraph is acyclic
// yields the partial order of its edge pairs.  Deduplicated.  A ranking
// over `universe` matches g iff it is consistent with at least one result.
std::vector<PartialOrder> decompose_to_partial_orders(
    const LabelPattern& g, const LabelingFunction& lam,
    const std::vector<ItemId>& universe, const DecomposeLimits& limits = {});

// Linearizes every partial order of every pattern: the deduplicated set of
// sub-rankings whose extension sets cover exactly the rankings matching g.
std::vector<SubRanking> decompose_to_subrankings(
    const PatternUnion& g, const LabelingFunction& lam,
    const std::vector<ItemId>& universe, const DecomposeLimits& limits = {});

}  // namespace prefdb

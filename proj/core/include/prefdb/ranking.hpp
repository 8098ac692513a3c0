#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prefdb/error.hpp"

namespace prefdb {

// Items are opaque string tokens.  Positions and ranks are 1-based
// throughout: position 1 is the most preferred slot.
using ItemId = std::string;

// A strict total order over a finite set of items.  Immutable after
// construction.  A Ranking over a subset of some larger universe plays the
// role of a sub-ranking; the type does not distinguish the two.
class Ranking {
 public:
  Ranking() = default;
  explicit Ranking(std::vector<ItemId> order);

  int size() const { return static_cast<int>(order_.size()); }
  bool empty() const { return order_.empty(); }

  // 1-based access; rank must be in [1, size()].
  const ItemId& at(int rank) const;
  // 1-based rank of item, 0 when absent.
  int rank_of(const ItemId& item) const;
  bool contains(const ItemId& item) const { return rank_of(item) != 0; }

  // Prefix of the first k items (k <= size()).
  Ranking truncated(int k) const;

  const std::vector<ItemId>& order() const { return order_; }

  bool operator==(const Ranking& other) const { return order_ == other.order_; }
  bool operator!=(const Ranking& other) const { return !(*this == other); }
  bool operator<(const Ranking& other) const { return order_ < other.order_; }

 private:
  std::vector<ItemId> order_;
  std::unordered_map<ItemId, int> index_;  // item -> 1-based rank
};

using SubRanking = Ranking;

struct RankingHash {
  std::size_t operator()(const Ranking& r) const;
};

// A set of strict preference pairs (a ≻ b), acyclic by construction.
// Pairs are stored deduplicated in sorted order, so equal partial orders
// compare equal.
class PartialOrder {
 public:
  PartialOrder() = default;
  explicit PartialOrder(std::vector<std::pair<ItemId, ItemId>> pairs);
  PartialOrder(std::initializer_list<std::pair<ItemId, ItemId>> pairs)
      : PartialOrder(std::vector<std::pair<ItemId, ItemId>>(pairs)) {}

  // Chain of consecutive pairs of a sub-ranking: ⟨a,b,c⟩ -> {a≻b, b≻c}.
  static PartialOrder chain_of(const Ranking& psi);

  const std::vector<std::pair<ItemId, ItemId>>& pairs() const { return pairs_; }

  bool operator<(const PartialOrder& o) const { return pairs_ < o.pairs_; }
  // Sorted list of items appearing in at least one pair.
  const std::vector<ItemId>& items() const { return items_; }
  bool empty() const { return pairs_.empty(); }

  bool operator==(const PartialOrder& other) const { return pairs_ == other.pairs_; }

 private:
  std::vector<std::pair<ItemId, ItemId>> pairs_;
  std::vector<ItemId> items_;
};

// Number of item pairs ordered differently by a and b.  Both rankings must
// cover the same item set.
int kendall_tau(const Ranking& a, const Ranking& b);

// Pairwise disagreements between a sub-ranking and a reference ranking,
// counted over the sub-ranking's items only.  Every item of psi must occur
// in sigma.
int subranking_distance(const SubRanking& psi, const Ranking& sigma);

// Smallest transitively closed superset of u.  Rejects orders whose closure
// would relate an item to itself.
PartialOrder transitive_closure(const PartialOrder& u);

// All linear extensions of u over its own item set, i.e. every total order
// of u.items() consistent with u.  Guarded: throws GuardError when u spans
// more than guard items.
std::vector<Ranking> linear_extensions(const PartialOrder& u, int guard = 12);

// True when t orders every pair of u as required.  All items of u must be
// present in t.
bool is_consistent(const Ranking& t, const PartialOrder& u);

}  // namespace prefdb

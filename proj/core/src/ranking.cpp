#include "prefdb/ranking.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace prefdb {

Ranking::Ranking(std::vector<ItemId> order) : order_(std::move(order)) {
  index_.reserve(order_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) {
    auto [it, fresh] = index_.emplace(order_[i], static_cast<int>(i) + 1);
    if (!fresh) throw Error("duplicate item in ranking: " + order_[i]);
  }
}

const ItemId& Ranking::at(int rank) const {
  if (rank < 1 || rank > size())
    throw Error("ranking position out of range: " + std::to_string(rank));
  return order_[static_cast<std::size_t>(rank) - 1];
}

int Ranking::rank_of(const ItemId& item) const {
  auto it = index_.find(item);
  return it == index_.end() ? 0 : it->second;
}

Ranking Ranking::truncated(int k) const {
  if (k < 0 || k > size())
    throw Error("truncation length out of range: " + std::to_string(k));
  return Ranking(std::vector<ItemId>(order_.begin(), order_.begin() + k));
}

std::size_t RankingHash::operator()(const Ranking& r) const {
  std::size_t h = 1469598103934665603ull;  // FNV offset basis
  for (const auto& item : r.order()) {
    h ^= std::hash<std::string>{}(item);
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

// Kahn toposort; returns false when the item digraph has a cycle.
bool acyclic(const std::vector<std::pair<ItemId, ItemId>>& pairs) {
  std::map<ItemId, int> indeg;
  std::map<ItemId, std::vector<const ItemId*>> out;
  for (const auto& [a, b] : pairs) {
    indeg.emplace(a, 0);
    indeg[b]++;
    out[a].push_back(&b);
  }
  std::vector<const ItemId*> ready;
  for (auto& [item, d] : indeg)
    if (d == 0) ready.push_back(&item);
  std::size_t seen = 0;
  while (!ready.empty()) {
    const ItemId* cur = ready.back();
    ready.pop_back();
    ++seen;
    auto it = out.find(*cur);
    if (it == out.end()) continue;
    for (const ItemId* nxt : it->second)
      if (--indeg[*nxt] == 0) ready.push_back(&indeg.find(*nxt)->first);
  }
  return seen == indeg.size();
}

}  // namespace

PartialOrder::PartialOrder(std::vector<std::pair<ItemId, ItemId>> pairs) {
  for (const auto& [a, b] : pairs)
    if (a == b) throw Error("preference relates item to itself: " + a);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  if (!acyclic(pairs)) throw Error("preference pairs contain a cycle");
  std::set<ItemId> items;
  for (const auto& [a, b] : pairs) {
    items.insert(a);
    items.insert(b);
  }
  pairs_ = std::move(pairs);
  items_.assign(items.begin(), items.end());
}

PartialOrder PartialOrder::chain_of(const Ranking& psi) {
  std::vector<std::pair<ItemId, ItemId>> pairs;
  for (int i = 1; i < psi.size(); ++i) pairs.emplace_back(psi.at(i), psi.at(i + 1));
  return PartialOrder(std::move(pairs));
}

int kendall_tau(const Ranking& a, const Ranking& b) {
  if (a.size() != b.size()) throw Error("kendall_tau: item sets differ in size");
  int m = a.size();
  int d = 0;
  for (int i = 1; i <= m; ++i) {
    int rb_i = b.rank_of(a.at(i));
    if (rb_i == 0) throw Error("kendall_tau: item missing from second ranking: " + a.at(i));
    for (int j = i + 1; j <= m; ++j) {
      // a orders a.at(i) before a.at(j); count when b disagrees.
      if (rb_i > b.rank_of(a.at(j))) ++d;
    }
  }
  return d;
}

int subranking_distance(const SubRanking& psi, const Ranking& sigma) {
  int k = psi.size();
  int d = 0;
  for (int i = 1; i <= k; ++i) {
    int rs_i = sigma.rank_of(psi.at(i));
    if (rs_i == 0)
      throw Error("subranking_distance: item missing from reference: " + psi.at(i));
    for (int j = i + 1; j <= k; ++j)
      if (rs_i > sigma.rank_of(psi.at(j))) ++d;
  }
  return d;
}

PartialOrder transitive_closure(const PartialOrder& u) {
  const auto& items = u.items();
  int n = static_cast<int>(items.size());
  std::map<ItemId, int> id;
  for (int i = 0; i < n; ++i) id[items[i]] = i;
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (const auto& [a, b] : u.pairs()) reach[id[a]][id[b]] = true;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      if (!reach[i][k]) continue;
      for (int j = 0; j < n; ++j)
        if (reach[k][j]) reach[i][j] = true;
    }
  std::vector<std::pair<ItemId, ItemId>> pairs;
  for (int i = 0; i < n; ++i) {
    if (reach[i][i]) throw Error("preference pairs contain a cycle");
    for (int j = 0; j < n; ++j)
      if (reach[i][j]) pairs.emplace_back(items[i], items[j]);
  }
  return PartialOrder(std::move(pairs));
}

std::vector<Ranking> linear_extensions(const PartialOrder& u, int guard) {
  const auto& items = u.items();
  int n = static_cast<int>(items.size());
  if (n > guard)
    throw GuardError("linear extension enumeration over " + std::to_string(n) +
                     " items exceeds guard of " + std::to_string(guard));
  std::map<ItemId, int> id;
  for (int i = 0; i < n; ++i) id[items[i]] = i;
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> out(n);
  for (const auto& [a, b] : u.pairs()) {
    out[id[a]].push_back(id[b]);
    indeg[id[b]]++;
  }

  std::vector<Ranking> result;
  std::vector<ItemId> prefix;
  std::vector<bool> used(n, false);
  std::function<void()> rec = [&] {
    if (static_cast<int>(prefix.size()) == n) {
      result.emplace_back(prefix);
      return;
    }
    for (int v = 0; v < n; ++v) {
      if (used[v] || indeg[v] != 0) continue;
      used[v] = true;
      for (int w : out[v]) --indeg[w];
      prefix.push_back(items[v]);
      rec();
      prefix.pop_back();
      for (int w : out[v]) ++indeg[w];
      used[v] = false;
    }
  };
  rec();
  return result;
}

bool is_consistent(const Ranking& t, const PartialOrder& u) {
  for (const auto& [a, b] : u.pairs()) {
    int ra = t.rank_of(a);
    int rb = t.rank_of(b);
    if (ra == 0) throw Error("is_consistent: item missing from ranking: " + a);
    if (rb == 0) throw Error("is_consistent: item missing from ranking: " + b);
    if (ra > rb) return false;
  }
  return true;
}

}  // namespace prefdb

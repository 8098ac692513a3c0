#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "prefdb/ranking.hpp"

namespace prefdb {

using Label = std::string;

// Assigns each item a finite set of labels.  Items never mentioned carry
// the empty label set.
class LabelingFunction {
 public:
  LabelingFunction() = default;

  void add(const ItemId& item, const Label& label) { map_[item].insert(label); }

  void add_all(const ItemId& item, const std::vector<Label>& labels) {
    map_[item].insert(labels.begin(), labels.end());
  }

  void merge(const LabelingFunction& other) {
    for (const auto& [item, labels] : other.map_)
      map_[item].insert(labels.begin(), labels.end());
  }

  const std::set<Label>& labels_of(const ItemId& item) const {
    auto it = map_.find(item);
    return it == map_.end() ? empty_ : it->second;
  }

  bool has(const ItemId& item, const Label& label) const {
    return labels_of(item).count(label) != 0;
  }

  // True when every label in `labels` (sorted or not) is carried by `item`.
  bool carries_all(const ItemId& item, const std::vector<Label>& labels) const {
    const auto& have = labels_of(item);
    return std::all_of(labels.begin(), labels.end(),
                       [&](const Label& l) { return have.count(l) != 0; });
  }

  // Items of `universe` carrying every label in `labels`, in universe order.
  std::vector<ItemId> items_with(const std::vector<Label>& labels,
                                 const std::vector<ItemId>& universe) const {
    std::vector<ItemId> out;
    for (const auto& item : universe)
      if (carries_all(item, labels)) out.push_back(item);
    return out;
  }

  const std::map<ItemId, std::set<Label>>& entries() const { return map_; }

 private:
  std::map<ItemId, std::set<Label>> map_;
  inline static const std::set<Label> empty_{};
};

}  // namespace prefdb

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefdb/labels.hpp"

namespace prefdb {

// A node of a label pattern: a nonempty set of labels, all of which an item
// must carry for the node to map onto it.  Labels are kept sorted and
// deduplicated, so structurally equal nodes compare equal.
struct PatternNode {
  std::vector<Label> labels;

  explicit PatternNode(std::vector<Label> ls);
  PatternNode() = default;

  bool operator==(const PatternNode& other) const { return labels == other.labels; }
  bool operator<(const PatternNode& other) const { return labels < other.labels; }

  // Canonical text: single label bare, multiple wrapped in braces.
  std::string text() const;
};

// A DAG over label-set nodes.  An edge (l, r) demands that the item chosen
// for l precede the item chosen for r.
class LabelPattern {
 public:
  LabelPattern() = default;
  LabelPattern(std::vector<PatternNode> nodes, std::vector<std::pair<int, int>> edges);

  const std::vector<PatternNode>& nodes() const { return nodes_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  bool empty() const { return nodes_.empty(); }

 private:
  std::vector<PatternNode> nodes_;
  std::vector<std::pair<int, int>> edges_;  // indices into nodes_
};

// Disjunction of patterns: a ranking matches the union when it matches at
// least one member.
struct PatternUnion {
  std::vector<LabelPattern> patterns;

  int size() const { return static_cast<int>(patterns.size()); }
};

enum class PatternClass { TwoLabel, Bipartite, General };

// Most specific class every member of G falls into.  Two-label: exactly one
// edge between two nodes.  Bipartite: every node touches at least one edge
// and no node has both incoming and outgoing edges.
PatternClass classify(const PatternUnion& g);

// Conjunction of patterns as one pattern: the disjoint union of their node
// and edge sets.  Nodes are never merged, so the result has sum-of-sizes
// many nodes.
LabelPattern conjoin(std::span<const LabelPattern> gs);

// Text format, one pattern per line (lines are OR-ed):
//   {M,JD}>BS & F>M
// Each `&`-separated clause is an edge; a node is either a bare label or a
// brace-wrapped label set.  Within one line, clauses naming the same label
// set refer to the same node.  `#` starts a comment.
PatternUnion parse_pattern_union(std::string_view text);

std::string to_string(const LabelPattern& g);
std::string to_string(const PatternUnion& g);

}  // namespace prefdb

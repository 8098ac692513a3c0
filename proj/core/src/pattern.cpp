#include "prefdb/pattern.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "prefdb/error.hpp"

namespace prefdb {

PatternNode::PatternNode(std::vector<Label> ls) : labels(std::move(ls)) {
  if (labels.empty()) throw Error("pattern node needs at least one label");
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
}

std::string PatternNode::text() const {
  if (labels.size() == 1) return labels.front();
  std::string out = "{";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ",";
    out += labels[i];
  }
  return out + "}";
}

namespace {

bool edges_acyclic(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> out(n);
  for (auto [a, b] : edges) {
    out[a].push_back(b);
    indeg[b]++;
  }
  std::vector<int> ready;
  for (int v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push_back(v);
  int seen = 0;
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    ++seen;
    for (int w : out[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  return seen == n;
}

}  // namespace

LabelPattern::LabelPattern(std::vector<PatternNode> nodes,
                           std::vector<std::pair<int, int>> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  int n = static_cast<int>(nodes_.size());
  for (auto [a, b] : edges_) {
    if (a < 0 || a >= n || b < 0 || b >= n)
      throw Error("pattern edge references a node out of range");
    if (a == b) throw Error("pattern edge relates a node to itself");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  if (!edges_acyclic(n, edges_)) throw Error("pattern edges contain a cycle");
}

PatternClass classify(const PatternUnion& g) {
  bool two_label = !g.patterns.empty();
  bool bipartite = !g.patterns.empty();
  for (const auto& p : g.patterns) {
    if (!(p.size() == 2 && p.edges().size() == 1)) two_label = false;
    std::vector<bool> has_out(p.size(), false), has_in(p.size(), false);
    for (auto [a, b] : p.edges()) {
      has_out[a] = true;
      has_in[b] = true;
    }
    for (int v = 0; v < p.size(); ++v)
      if ((has_in[v] && has_out[v]) || (!has_in[v] && !has_out[v])) bipartite = false;
  }
  if (two_label) return PatternClass::TwoLabel;
  if (bipartite) return PatternClass::Bipartite;
  return PatternClass::General;
}

LabelPattern conjoin(std::span<const LabelPattern> gs) {
  std::vector<PatternNode> nodes;
  std::vector<std::pair<int, int>> edges;
  for (const auto& g : gs) {
    int base = static_cast<int>(nodes.size());
    nodes.insert(nodes.end(), g.nodes().begin(), g.nodes().end());
    for (auto [a, b] : g.edges()) edges.emplace_back(base + a, base + b);
  }
  return LabelPattern(std::move(nodes), std::move(edges));
}

namespace {

// Parses one node spec: `label` or `{l1,l2,...}`.  `col` is 1-based and
// advanced past the consumed text.
PatternNode parse_node(const std::string& text, int line_no, int& col) {
  std::size_t pos = static_cast<std::size_t>(col) - 1;
  auto skip_ws = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  };
  skip_ws();
  if (pos >= text.size())
    throw ParseError("expected pattern node", line_no, static_cast<int>(pos) + 1);
  std::vector<Label> labels;
  auto read_label = [&]() -> Label {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() && text[pos] != '>' && text[pos] != '&' &&
           text[pos] != ',' && text[pos] != '{' && text[pos] != '}')
      ++pos;
    std::size_t end = pos;
    while (end > start && (text[end - 1] == ' ' || text[end - 1] == '\t')) --end;
    if (end == start)
      throw ParseError("empty label", line_no, static_cast<int>(start) + 1);
    return text.substr(start, end - start);
  };
  if (text[pos] == '{') {
    ++pos;
    while (true) {
      labels.push_back(read_label());
      skip_ws();
      if (pos < text.size() && text[pos] == ',') {
        ++pos;
        continue;
      }
      if (pos < text.size() && text[pos] == '}') {
        ++pos;
        break;
      }
      throw ParseError("expected ',' or '}' in label set", line_no,
                       static_cast<int>(pos) + 1);
    }
  } else {
    labels.push_back(read_label());
  }
  col = static_cast<int>(pos) + 1;
  return PatternNode(std::move(labels));
}

}  // namespace

PatternUnion parse_pattern_union(std::string_view text) {
  PatternUnion result;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
    if (blank) continue;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();

    std::vector<PatternNode> nodes;
    std::map<PatternNode, int> node_id;  // same label set = same node
    std::vector<std::pair<int, int>> edges;
    auto intern = [&](PatternNode n) {
      auto it = node_id.find(n);
      if (it != node_id.end()) return it->second;
      int id = static_cast<int>(nodes.size());
      node_id.emplace(n, id);
      nodes.push_back(std::move(n));
      return id;
    };

    int col = 1;
    while (true) {
      PatternNode from = parse_node(line, line_no, col);
      std::size_t gt = static_cast<std::size_t>(col) - 1;
      while (gt < line.size() && (line[gt] == ' ' || line[gt] == '\t')) ++gt;
      if (gt >= line.size() || line[gt] != '>')
        throw ParseError("expected '>' after pattern node", line_no,
                         static_cast<int>(gt) + 1);
      col = static_cast<int>(gt) + 2;
      PatternNode to = parse_node(line, line_no, col);
      int a = intern(std::move(from));
      int b = intern(std::move(to));
      edges.emplace_back(a, b);
      std::size_t pos = static_cast<std::size_t>(col) - 1;
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (pos >= line.size()) break;
      if (line[pos] != '&')
        throw ParseError("expected '&' between edges", line_no,
                         static_cast<int>(pos) + 1);
      col = static_cast<int>(pos) + 2;
    }
    try {
      result.patterns.emplace_back(std::move(nodes), std::move(edges));
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no, 1);
    }
  }
  return result;
}

std::string to_string(const LabelPattern& g) {
  if (g.edges().empty()) {
    // Edge-free patterns have no clause syntax; list nodes for diagnostics.
    std::string out;
    for (int v = 0; v < g.size(); ++v) {
      if (v) out += " ";
      out += g.nodes()[v].text();
    }
    return out;
  }
  std::string out;
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    if (i) out += " & ";
    auto [a, b] = g.edges()[i];
    out += g.nodes()[a].text() + ">" + g.nodes()[b].text();
  }
  return out;
}

std::string to_string(const PatternUnion& g) {
  std::string out;
  for (const auto& p : g.patterns) {
    out += to_string(p);
    out += "\n";
  }
  return out;
}

}  // namespace prefdb

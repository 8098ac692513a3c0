#include "prefdb/exact.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>

#include "prefdb/error.hpp"
#include "prefdb/matching.hpp"

namespace prefdb {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
};

// ---------------------------------------------------------------------------
// Oracle: exhaustive enumeration over index permutations.

// Pattern matcher over reference-index permutations; reusable across
// permutations of one instance.
struct IndexEmbed {
  int m = 0;
  std::vector<std::vector<char>> node_match;  // node -> per reference index 1..m
  std::vector<std::pair<int, int>> edges;
  std::vector<int> order;                             // placement order
  std::vector<std::vector<std::pair<int, bool>>> adj; // node -> (other, other_is_after)
  std::vector<int> pos;

  IndexEmbed(const LabelPattern& g, const LabeledModel& model) : m(model.size()) {
    int q = g.size();
    node_match.assign(q, std::vector<char>(m + 1, 0));
    std::vector<int> count(q, 0);
    for (int v = 0; v < q; ++v)
      for (int i = 1; i <= m; ++i)
        if (model.labeling().carries_all(model.sigma().at(i), g.nodes()[v].labels)) {
          node_match[v][i] = 1;
          ++count[v];
        }
    edges = g.edges();
    adj.resize(q);
    for (auto [a, b] : edges) {
      adj[a].emplace_back(b, true);
      adj[b].emplace_back(a, false);
    }
    order.resize(q);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return count[a] < count[b]; });
    pos.assign(q, 0);
  }

  // item_at[p-1] = reference index occupying position p.
  bool embeds(const std::vector<int>& item_at) {
    // a successful place() leaves pos populated; start each query clean
    std::fill(pos.begin(), pos.end(), 0);
    return place(0, item_at);
  }

 private:
  bool place(std::size_t k, const std::vector<int>& item_at) {
    if (k == order.size()) return true;
    int v = order[k];
    for (int p = 1; p <= m; ++p) {
      if (!node_match[v][item_at[p - 1]]) continue;
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
      if (place(k + 1, item_at)) return true;
      pos[v] = 0;
    }
    return false;
  }
};

}  // namespace

double oracle_marginal(const PatternUnion& g, const LabeledModel& model,
                       int item_guard) {
  int m = model.size();
  if (m > item_guard)
    throw GuardError("oracle enumeration over " + std::to_string(m) +
                     " items exceeds guard of " + std::to_string(item_guard));
  for (const auto& p : g.patterns)
    if (p.empty()) return 1.0;  // the empty pattern matches every ranking

  std::vector<IndexEmbed> matchers;
  matchers.reserve(g.patterns.size());
  for (const auto& p : g.patterns) matchers.emplace_back(p, model);

  const InsertionMatrix& pi = model.rim().pi;
  std::vector<int> item_at(m);
  std::iota(item_at.begin(), item_at.end(), 1);
  std::vector<int> pos_of(m + 1, 0);
  KahanSum sum;
  do {
    bool hit = false;
    for (auto& matcher : matchers)
      if (matcher.embeds(item_at)) {
        hit = true;
        break;
      }
    if (!hit) continue;
    for (int p = 1; p <= m; ++p) pos_of[item_at[p - 1]] = p;
    double prob = 1.0;
    for (int i = 1; i <= m && prob > 0.0; ++i) {
      int j = 1;
      for (int k = 1; k < i; ++k)
        if (pos_of[k] < pos_of[i]) ++j;
      prob *= pi.at(i, j);
    }
    sum.add(prob);
  } while (std::next_permutation(item_at.begin(), item_at.end()));
  return sum.s;
}

namespace {

// ---------------------------------------------------------------------------
// Insertion DP over min/max position constraints.
//
// Both DP solvers reduce pattern nodes to "slots": canonical (role, label
// set) pairs.  A min slot tracks the smallest position among items carrying
// its labels, a max slot the largest.  Every edge becomes the constraint
// min(left) < max(right).

constexpr std::uint16_t kNoMin = 0xFFFE;  // above any real position
constexpr std::uint16_t kNoMax = 0;

// Position update when the step-i item lands at position j.  Previously
// inserted items at positions >= j move one slot down; a matching item then
// competes for the tracked extremum.
std::uint16_t step_min(std::uint16_t v, int j, bool match) {
  if (v == kNoMin) return match ? static_cast<std::uint16_t>(j) : kNoMin;
  std::uint16_t shifted = v >= j ? static_cast<std::uint16_t>(v + 1) : v;
  if (match && j < shifted) return static_cast<std::uint16_t>(j);
  return shifted;
}

std::uint16_t step_max(std::uint16_t v, int j, bool match) {
  if (v == kNoMax) return match ? static_cast<std::uint16_t>(j) : kNoMax;
  std::uint16_t shifted = v >= j ? static_cast<std::uint16_t>(v + 1) : v;
  if (match && j > shifted) return static_cast<std::uint16_t>(j);
  return shifted;
}

struct MinMaxInstance {
  int m = 0;
  int u = 0;
  struct Slot {
    bool is_min = true;
    std::string text;
    std::vector<char> match;  // per reference index 1..m
    int last_match = 0;       // 0 when no item ever matches
  };
  std::vector<Slot> slots;
  // per pattern, deduplicated constraints (min slot, max slot)
  std::vector<std::vector<std::pair<int, int>>> pattern_edges;
  const InsertionMatrix* pi = nullptr;
};

MinMaxInstance build_minmax(const PatternUnion& g, const LabeledModel& model) {
  MinMaxInstance inst;
  inst.m = model.size();
  inst.u = g.size();
  inst.pi = &model.rim().pi;
  std::map<std::pair<bool, std::vector<Label>>, int> ids;
  auto intern = [&](bool is_min, const PatternNode& n) {
    auto key = std::make_pair(is_min, n.labels);
    if (auto it = ids.find(key); it != ids.end()) return it->second;
    MinMaxInstance::Slot s;
    s.is_min = is_min;
    s.text = n.text();
    s.match.assign(inst.m + 1, 0);
    for (int i = 1; i <= inst.m; ++i)
      if (model.labeling().carries_all(model.sigma().at(i), n.labels)) {
        s.match[i] = 1;
        s.last_match = i;
      }
    int id = static_cast<int>(inst.slots.size());
    ids.emplace(std::move(key), id);
    inst.slots.push_back(std::move(s));
    return id;
  };
  for (const auto& p : g.patterns) {
    std::vector<std::pair<int, int>> es;
    for (auto [a, b] : p.edges())
      es.emplace_back(intern(true, p.nodes()[a]), intern(false, p.nodes()[b]));
    std::sort(es.begin(), es.end());
    es.erase(std::unique(es.begin(), es.end()), es.end());
    if (es.empty()) throw Error("insertion DP needs at least one edge per pattern");
    if (es.size() > 16)
      throw GuardError("pattern exceeds 16 distinct constraints for the insertion DP");
    inst.pattern_edges.push_back(std::move(es));
  }
  return inst;
}

std::uint16_t role_sentinel(const MinMaxInstance::Slot& s) {
  return s.is_min ? kNoMin : kNoMax;
}

// DP state maps; the key is the flat char16 encoding of a state.
using StateMap = std::unordered_map<std::u16string, double>;

void check_state_budget(const StateMap& states, const DpLimits& limits) {
  if (states.size() > limits.max_states)
    throw GuardError("insertion DP exceeds state budget of " +
                     std::to_string(limits.max_states));
}

// ---------------------------------------------------------------------------
// Two-label DP: states are full slot-position vectors; a state is dropped
// the moment any pattern's constraint holds, so the surviving final mass is
// the probability that no pattern is ever satisfied.

MarginalResult two_label_dp(const PatternUnion& g, const LabeledModel& model,
                            const DpLimits& limits) {
  auto start = Clock::now();
  MinMaxInstance inst = build_minmax(g, model);
  int n_slots = static_cast<int>(inst.slots.size());

  std::u16string init(n_slots, 0);
  for (int s = 0; s < n_slots; ++s) init[s] = role_sentinel(inst.slots[s]);

  MarginalResult res;
  res.solver = "two-label";
  StateMap cur;
  cur.emplace(init, 1.0);
  res.states_explored = 1;

  std::u16string next_key(n_slots, 0);
  for (int i = 1; i <= inst.m; ++i) {
    StateMap next;
    for (const auto& [key, mass] : cur) {
      for (int j = 1; j <= i; ++j) {
        double p = inst.pi->at(i, j);
        if (p == 0.0) continue;
        for (int s = 0; s < n_slots; ++s) {
          bool match = inst.slots[s].match[i] != 0;
          next_key[s] = inst.slots[s].is_min ? step_min(key[s], j, match)
                                             : step_max(key[s], j, match);
        }
        bool satisfied = false;
        for (const auto& edges : inst.pattern_edges) {
          // two-label patterns carry exactly one constraint
          auto [l, r] = edges.front();
          if (next_key[l] < next_key[r]) {
            satisfied = true;
            break;
          }
        }
        if (satisfied) continue;  // no longer violating: pruned
        next[next_key] += mass * p;
      }
    }
    check_state_budget(next, limits);
    res.states_explored += next.size();
    cur = std::move(next);
  }

  KahanSum violating;
  for (const auto& [key, mass] : cur) violating.add(mass);
  res.probability = 1.0 - violating.s;
  res.wall_seconds = seconds_since(start);
  return res;
}

// ---------------------------------------------------------------------------
// Bipartite DP (min/max constraint form).  In pruned mode each state keeps,
// per pattern, the set of still-undecided constraints; satisfied patterns
// retire the state into the accumulated probability, violated patterns are
// dropped, and only slots appearing in an undecided constraint keep their
// position in the state key.

struct MinMaxOutcome {
  double probability = 0.0;
  std::uint64_t states_explored = 0;
};

std::vector<int> tracked_slots(const MinMaxInstance& inst,
                               const std::u16string& masks) {
  std::vector<char> used(inst.slots.size(), 0);
  for (int p = 0; p < inst.u; ++p) {
    std::uint16_t mask = masks[p];
    const auto& edges = inst.pattern_edges[p];
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (mask & (1u << e)) {
        used[edges[e].first] = 1;
        used[edges[e].second] = 1;
      }
  }
  std::vector<int> out;
  for (std::size_t s = 0; s < used.size(); ++s)
    if (used[s]) out.push_back(static_cast<int>(s));
  return out;
}

MinMaxOutcome minmax_marginal(const PatternUnion& g, const LabeledModel& model,
                              const DpLimits& limits, BipartiteMode mode,
                              BipartiteTrace* trace) {
  MinMaxInstance inst = build_minmax(g, model);
  int n_slots = static_cast<int>(inst.slots.size());
  MinMaxOutcome out;
  KahanSum accepted;

  // Decide the fate of every pattern's constraints once positions are
  // updated for step i.  Returns +1 when some pattern is fully satisfied,
  // -1 when every pattern is violated, 0 otherwise.
  auto update_masks = [&](std::u16string& masks, const std::vector<std::uint16_t>& vals,
                          int i) -> int {
    bool any_alive = false;
    for (int p = 0; p < inst.u; ++p) {
      std::uint16_t mask = masks[p];
      if (mask == 0) continue;  // already violated
      const auto& edges = inst.pattern_edges[p];
      std::uint16_t next_mask = 0;
      bool dead = false;
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!(mask & (1u << e))) continue;
        auto [l, r] = edges[e];
        if (vals[l] < vals[r]) continue;  // satisfied for good
        bool exhausted =
            inst.slots[l].last_match <= i && inst.slots[r].last_match <= i;
        if (exhausted) {
          dead = true;  // min >= max with no relevant items left
          break;
        }
        next_mask |= static_cast<std::uint16_t>(1u << e);
      }
      if (dead) {
        masks[p] = 0;
        continue;
      }
      if (next_mask == 0) return +1;  // pattern satisfied, union satisfied
      masks[p] = next_mask;
      any_alive = true;
    }
    return any_alive ? 0 : -1;
  };

  auto encode = [&](const std::u16string& masks, const std::vector<std::uint16_t>& vals) {
    std::u16string key = masks;
    for (int s : tracked_slots(inst, masks)) key.push_back(vals[s]);
    return key;
  };
  auto decode_vals = [&](const std::u16string& key, std::vector<std::uint16_t>& vals) {
    for (int s = 0; s < n_slots; ++s) vals[s] = role_sentinel(inst.slots[s]);
    std::size_t at = static_cast<std::size_t>(inst.u);
    for (int s : tracked_slots(inst, key.substr(0, inst.u))) vals[s] = key[at++];
  };

  bool pruned = mode == BipartiteMode::Pruned;
  StateMap cur;
  std::vector<std::uint16_t> vals(n_slots), nv(n_slots);

  if (pruned) {
    std::u16string masks(inst.u, 0);
    for (int p = 0; p < inst.u; ++p)
      masks[p] = static_cast<char16_t>((1u << inst.pattern_edges[p].size()) - 1);
    for (int s = 0; s < n_slots; ++s) vals[s] = role_sentinel(inst.slots[s]);
    int fate = update_masks(masks, vals, 0);
    if (fate > 0) return {1.0, 1};  // vacuously satisfied (cannot happen for real input)
    if (fate < 0) return {0.0, 1};
    cur.emplace(encode(masks, vals), 1.0);
  } else {
    std::u16string init(n_slots, 0);
    for (int s = 0; s < n_slots; ++s) init[s] = role_sentinel(inst.slots[s]);
    cur.emplace(init, 1.0);
  }
  out.states_explored = 1;

  for (int i = 1; i <= inst.m; ++i) {
    StateMap next;
    for (const auto& [key, mass] : cur) {
      std::u16string cur_masks;
      if (pruned) {
        decode_vals(key, vals);
        cur_masks = key.substr(0, inst.u);
      } else {
        for (int s = 0; s < n_slots; ++s) vals[s] = key[s];
      }
      for (int j = 1; j <= i; ++j) {
        double p = inst.pi->at(i, j);
        if (p == 0.0) continue;
        for (int s = 0; s < n_slots; ++s) {
          bool match = inst.slots[s].match[i] != 0;
          nv[s] = inst.slots[s].is_min ? step_min(vals[s], j, match)
                                       : step_max(vals[s], j, match);
        }
        if (pruned) {
          std::u16string masks = cur_masks;
          int fate = update_masks(masks, nv, i);
          if (fate > 0) {
            accepted.add(mass * p);
            continue;
          }
          if (fate < 0) continue;  // every pattern violated
          next[encode(masks, nv)] += mass * p;
        } else {
          std::u16string nk(nv.begin(), nv.end());
          next[nk] += mass * p;
        }
      }
    }
    check_state_budget(next, limits);
    out.states_explored += next.size();
    cur = std::move(next);

    if (trace) {
      trace->steps.emplace_back();
      for (const auto& [key, mass] : cur) {
        BipartiteTrace::State st;
        st.mass = mass;
        std::vector<std::uint16_t> tv(n_slots);
        if (pruned) {
          decode_vals(key, tv);
          for (int p = 0; p < inst.u; ++p) {
            std::uint16_t mask = key[p];
            const auto& edges = inst.pattern_edges[p];
            for (std::size_t e = 0; e < edges.size(); ++e)
              if (mask & (1u << e))
                st.uncertain.emplace_back(p, inst.slots[edges[e].first].text,
                                          inst.slots[edges[e].second].text);
          }
          for (int s : tracked_slots(inst, key.substr(0, inst.u))) {
            auto& side = inst.slots[s].is_min ? st.alpha : st.beta;
            side.emplace_back(inst.slots[s].text, tv[s]);
          }
        } else {
          for (int s = 0; s < n_slots; ++s) {
            auto& side = inst.slots[s].is_min ? st.alpha : st.beta;
            side.emplace_back(inst.slots[s].text, key[s]);
          }
        }
        trace->steps.back().push_back(std::move(st));
      }
      trace->satisfied_mass.push_back(accepted.s);
    }
  }

  if (pruned) {
    out.probability = accepted.s;
  } else {
    KahanSum sat;
    for (const auto& [key, mass] : cur) {
      bool any = false;
      for (const auto& edges : inst.pattern_edges) {
        bool all = true;
        for (auto [l, r] : edges)
          if (!(key[l] < key[r])) {
            all = false;
            break;
          }
        if (all) {
          any = true;
          break;
        }
      }
      if (any) sat.add(mass);
    }
    out.probability = sat.s;
  }
  return out;
}

}  // namespace

MarginalResult two_label_solver(const PatternUnion& g, const LabeledModel& model,
                                const DpLimits& limits) {
  if (classify(g) != PatternClass::TwoLabel)
    throw Error("two-label solver requires single-edge patterns over two nodes");
  return two_label_dp(g, model, limits);
}

MarginalResult bipartite_solver(const PatternUnion& g, const LabeledModel& model,
                                const DpLimits& limits, BipartiteMode mode,
                                BipartiteTrace* trace) {
  PatternClass cls = classify(g);
  if (cls == PatternClass::General)
    throw Error("bipartite solver requires source/target-separated patterns; "
                "use the general solver");
  auto start = Clock::now();
  MinMaxOutcome dp = minmax_marginal(g, model, limits, mode, trace);
  MarginalResult res;
  res.probability = dp.probability;
  res.solver = "bipartite";
  res.states_explored = dp.states_explored;
  res.wall_seconds = seconds_since(start);
  return res;
}

MarginalResult general_solver(const PatternUnion& g, const LabeledModel& model,
                              int subset_guard, int oracle_item_guard,
                              const DpLimits& limits) {
  auto start = Clock::now();
  MarginalResult res;
  res.solver = "general";
  int u = g.size();
  if (u == 0) {
    res.wall_seconds = seconds_since(start);
    return res;
  }
  if (u > subset_guard)
    throw GuardError("inclusion-exclusion over " + std::to_string(u) +
                     " patterns exceeds guard of " + std::to_string(subset_guard));

  KahanSum total;
  for (std::uint32_t mask = 1; mask < (1u << u); ++mask) {
    std::vector<LabelPattern> members;
    std::string label;
    for (int p = 0; p < u; ++p)
      if (mask & (1u << p)) {
        members.push_back(g.patterns[p]);
        if (!label.empty()) label += "&";
        label += "g" + std::to_string(p + 1);
      }
    LabelPattern conj = conjoin(members);
    PatternUnion single;
    single.patterns.push_back(std::move(conj));

    double value;
    PatternClass cls = classify(single);
    if (single.patterns.front().empty()) {
      value = 1.0;
    } else if (cls != PatternClass::General) {
      MinMaxOutcome dp = minmax_marginal(single, model, limits,
                                         BipartiteMode::Pruned, nullptr);
      res.states_explored += dp.states_explored;
      value = dp.probability;
    } else if (model.size() <= oracle_item_guard) {
      value = oracle_marginal(single, model, oracle_item_guard);
    } else {
      throw GuardError(
          "conjunction of patterns is not bipartite and the item count "
          "exceeds the oracle guard; use a sampling estimator");
    }
    double sign = (std::popcount(mask) % 2 == 1) ? 1.0 : -1.0;
    total.add(sign * value);
    res.terms.emplace_back((sign > 0 ? "+" : "-") + label, sign * value);
  }
  res.probability = std::clamp(total.s, 0.0, 1.0);
  res.wall_seconds = seconds_since(start);
  return res;
}

int edge_ease(const Ranking& sigma, const LabelingFunction& lam,
              const PatternNode& from, const PatternNode& to) {
  int min_from = 0, max_to = 0;
  for (int p = 1; p <= sigma.size(); ++p) {
    if (min_from == 0 && lam.carries_all(sigma.at(p), from.labels)) min_from = p;
    if (lam.carries_all(sigma.at(p), to.labels)) max_to = p;
  }
  if (min_from == 0) throw Error("no item carries the labels of " + from.text());
  if (max_to == 0) throw Error("no item carries the labels of " + to.text());
  return max_to - min_from;
}

double upper_bound_solver(const PatternUnion& g, const LabeledModel& model,
                          UpperBoundEdges edges, const DpLimits& limits) {
  const auto& lam = model.labeling();
  const auto& sigma = model.sigma();
  PatternUnion relaxed;

  for (const auto& p : g.patterns) {
    if (p.empty()) return 1.0;  // matches everything: no better bound exists
    int q = p.size();
    // min/max reference positions per node; 0 marks an unmatchable node
    std::vector<int> min_pos(q, 0), max_pos(q, 0);
    bool satisfiable = true;
    for (int v = 0; v < q && satisfiable; ++v) {
      for (int pp = 1; pp <= sigma.size(); ++pp)
        if (lam.carries_all(sigma.at(pp), p.nodes()[v].labels)) {
          if (min_pos[v] == 0) min_pos[v] = pp;
          max_pos[v] = pp;
        }
      if (min_pos[v] == 0) satisfiable = false;
    }
    if (!satisfiable) continue;  // pattern probability is zero: drop it
    if (p.edges().empty()) return 1.0;

    // transitive closure over the node DAG
    std::vector<std::vector<bool>> reach(q, std::vector<bool>(q, false));
    for (auto [a, b] : p.edges()) reach[a][b] = true;
    for (int k = 0; k < q; ++k)
      for (int a = 0; a < q; ++a) {
        if (!reach[a][k]) continue;
        for (int b = 0; b < q; ++b)
          if (reach[k][b]) reach[a][b] = true;
      }

    struct Candidate {
      int ease;
      std::string from_text, to_text;
      int a, b;
    };
    std::vector<Candidate> cands;
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b)
        if (reach[a][b])
          cands.push_back({max_pos[b] - min_pos[a], p.nodes()[a].text(),
                           p.nodes()[b].text(), a, b});
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
      return std::tie(x.ease, x.from_text, x.to_text) <
             std::tie(y.ease, y.from_text, y.to_text);
    });
    std::size_t keep = edges == UpperBoundEdges::All
                           ? cands.size()
                           : std::min<std::size_t>(static_cast<int>(edges), cands.size());

    // rebuild a pattern over just the selected endpoints
    std::vector<PatternNode> nodes;
    std::map<int, int> remap;
    std::vector<std::pair<int, int>> new_edges;
    for (std::size_t e = 0; e < keep; ++e) {
      for (int end : {cands[e].a, cands[e].b})
        if (!remap.count(end)) {
          remap[end] = static_cast<int>(nodes.size());
          nodes.push_back(p.nodes()[end]);
        }
      new_edges.emplace_back(remap[cands[e].a], remap[cands[e].b]);
    }
    relaxed.patterns.emplace_back(std::move(nodes), std::move(new_edges));
  }

  if (relaxed.patterns.empty()) return 0.0;
  if (edges == UpperBoundEdges::One) return two_label_dp(relaxed, model, limits).probability;
  return minmax_marginal(relaxed, model, limits, BipartiteMode::Pruned, nullptr)
      .probability;
}

}  // namespace prefdb

#include "prefdb/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "prefdb/error.hpp"

namespace prefdb {

namespace {

struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
};

bool looks_numeric(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

// numeric-aware deterministic ordering for domain values
bool value_less(const std::string& a, const std::string& b) {
  if (looks_numeric(a) && looks_numeric(b)) {
    double x = std::strtod(a.c_str(), nullptr);
    double y = std::strtod(b.c_str(), nullptr);
    if (x != y) return x < y;
  }
  return a < b;
}

// ---------------------------------------------------------------------------
// Query shape analysis shared by classification, grounding and reduction.

struct Analysis {
  std::vector<Term> session_terms;  // the shared session term list
  std::vector<std::pair<std::string, int>> session_var_positions;
  std::set<std::string> session_vars;
  std::vector<Term> item_terms;  // distinct, in order of first appearance
  std::set<std::string> item_vars;
  std::vector<std::pair<int, int>> edges_by_atom;   // node indices per p-atom
  std::vector<std::vector<const OAtom*>> node_atoms;  // o-atoms per item node
  std::vector<const OAtom*> filter_atoms;  // o-atoms without item variables
  std::vector<int> atom_node;  // per o-atom: its item node or -1
  std::vector<bool> atom_has_session;
};

Analysis analyze(const Query& q, const PreferenceDatabase& db) {
  Analysis a;

  for (const auto& p : q.p_atoms) {
    if (p.relation != db.p_relation)
      throw Error("preference atom uses relation '" + p.relation +
                  "' but the database's session relation is '" +
                  db.p_relation + "'");
    if (p.session.size() != db.session_columns.size())
      throw Error("session atom lists " + std::to_string(p.session.size()) +
                  " key terms; relation '" + db.p_relation + "' has " +
                  std::to_string(db.session_columns.size()));
  }
  if (!q.p_atoms.empty()) {
    a.session_terms = q.p_atoms.front().session;
    for (const auto& p : q.p_atoms)
      for (std::size_t k = 0; k < p.session.size(); ++k) {
        const Term& t = p.session[k];
        Term& merged = a.session_terms[k];
        // a wildcard leaves the key unconstrained, so it unifies with
        // whatever another atom says about the same position
        if (t.is_variable() && t.anonymous) continue;
        if (merged.is_variable() && merged.anonymous) {
          merged = t;
          continue;
        }
        if (!(t == merged))
          throw Error("all preference atoms must describe one session; "
                      "found differing session terms");
      }
    for (std::size_t k = 0; k < a.session_terms.size(); ++k)
      if (a.session_terms[k].is_variable()) {
        a.session_var_positions.emplace_back(a.session_terms[k].text,
                                             static_cast<int>(k));
        a.session_vars.insert(a.session_terms[k].text);
      }
  }

  auto node_of = [&](const Term& t) {
    for (std::size_t i = 0; i < a.item_terms.size(); ++i)
      if (a.item_terms[i] == t) return static_cast<int>(i);
    a.item_terms.push_back(t);
    if (t.is_variable()) {
      if (a.session_vars.count(t.text))
        throw Error("variable '" + t.text +
                    "' is used as both a session key and an item");
      a.item_vars.insert(t.text);
    }
    return static_cast<int>(a.item_terms.size() - 1);
  };
  for (const auto& p : q.p_atoms) {
    // left before right: argument evaluation order is unspecified, and the
    // node numbering must not depend on the compiler
    int from = node_of(p.left);
    int to = node_of(p.right);
    a.edges_by_atom.emplace_back(from, to);
  }
  a.node_atoms.resize(a.item_terms.size());

  for (const auto& o : q.o_atoms) {
    const Relation& rel = db.relation(o.relation);
    if (o.args.size() != rel.columns.size())
      throw Error("relation '" + o.relation + "' has " +
                  std::to_string(rel.columns.size()) + " attributes; atom has " +
                  std::to_string(o.args.size()));
    std::set<std::string> atom_item_vars;
    bool has_session = false;
    for (const auto& t : o.args) {
      if (!t.is_variable()) continue;
      if (a.item_vars.count(t.text)) atom_item_vars.insert(t.text);
      if (a.session_vars.count(t.text)) has_session = true;
    }
    if (atom_item_vars.size() > 1) {
      auto it = atom_item_vars.begin();
      std::string first = *it++;
      throw Error("atom over '" + o.relation + "' couples item variables '" +
                  first + "' and '" + *it +
                  "'; such joins cannot be reduced to label patterns");
    }
    a.atom_has_session.push_back(has_session);
    if (!atom_item_vars.empty()) {
      int node = -1;
      for (std::size_t i = 0; i < a.item_terms.size(); ++i)
        if (a.item_terms[i].is_variable() &&
            a.item_terms[i].text == *atom_item_vars.begin())
          node = static_cast<int>(i);
      a.atom_node.push_back(node);
      a.node_atoms[node].push_back(&o);
    } else {
      a.atom_node.push_back(-1);
      a.filter_atoms.push_back(&o);
    }
  }

  // every compared variable must be bound somewhere
  for (const auto& c : q.comparisons) {
    if (!c.lhs.is_variable()) continue;
    const std::string& v = c.lhs.text;
    bool bound = a.session_vars.count(v) || a.item_vars.count(v);
    for (const auto& o : q.o_atoms)
      for (const auto& t : o.args)
        if (t.is_variable() && t.text == v) bound = true;
    if (!bound)
      throw Error("comparison references unbound variable '" + v + "'");
  }
  return a;
}

// comparisons whose left side is the given variable
bool var_comparisons_hold(const std::string& var, const std::string& value,
                          const std::vector<Comparison>& comps) {
  for (const auto& c : comps)
    if (c.lhs.is_variable() && c.lhs.text == var)
      if (!compare_values(value, c.op, c.rhs.text)) return false;
  return true;
}

// Joint satisfiability of o-atoms under bindings, by backtracking over rows.
bool atoms_satisfiable(const std::vector<const OAtom*>& atoms, std::size_t idx,
                       std::map<std::string, std::string>& bindings,
                       const std::vector<Comparison>& comps,
                       const PreferenceDatabase& db) {
  if (idx == atoms.size()) return true;
  const OAtom& oa = *atoms[idx];
  const Relation& rel = db.relation(oa.relation);
  for (const auto& row : rel.rows) {
    std::vector<std::string> newly;
    bool ok = true;
    for (std::size_t c = 0; c < oa.args.size() && ok; ++c) {
      const Term& t = oa.args[c];
      if (t.is_constant()) {
        ok = compare_values(row[c], "=", t.text);
        continue;
      }
      auto it = bindings.find(t.text);
      if (it != bindings.end()) {
        ok = row[c] == it->second;
        continue;
      }
      ok = var_comparisons_hold(t.text, row[c], comps);
      if (ok) {
        bindings.emplace(t.text, row[c]);
        newly.push_back(t.text);
      }
    }
    if (ok && atoms_satisfiable(atoms, idx + 1, bindings, comps, db)) {
      for (const auto& v : newly) bindings.erase(v);
      return true;
    }
    for (const auto& v : newly) bindings.erase(v);
  }
  return false;
}

bool atoms_satisfiable(const std::vector<const OAtom*>& atoms,
                       std::map<std::string, std::string> bindings,
                       const std::vector<Comparison>& comps,
                       const PreferenceDatabase& db) {
  return atoms_satisfiable(atoms, 0, bindings, comps, db);
}

// ---------------------------------------------------------------------------
// Pattern construction for one itemwise query and one session.

struct BuiltPattern {
  LabelPattern pattern;
  LabelingFunction labeling;
};

std::optional<BuiltPattern> build_pattern(const Analysis& a, const Query& q,
                                          const PreferenceDatabase& db,
                                          const std::vector<ItemId>& universe,
                                          const Session& s,
                                          const std::string& label_suffix) {
  // session bindings and constant key filters
  std::map<std::string, std::string> bindings;
  for (std::size_t k = 0; k < a.session_terms.size(); ++k) {
    const Term& t = a.session_terms[k];
    if (t.is_constant()) {
      if (!compare_values(s.key[k], "=", t.text)) return std::nullopt;
    } else {
      auto it = bindings.find(t.text);
      if (it != bindings.end()) {
        if (it->second != s.key[k]) return std::nullopt;
      } else {
        bindings.emplace(t.text, s.key[k]);
      }
    }
  }

  // comparisons decidable now: constant left sides and session variables
  for (const auto& c : q.comparisons) {
    if (c.lhs.is_constant()) {
      if (!compare_values(c.lhs.text, c.op, c.rhs.text)) return std::nullopt;
    } else if (auto it = bindings.find(c.lhs.text); it != bindings.end()) {
      if (!compare_values(it->second, c.op, c.rhs.text)) return std::nullopt;
    }
  }

  if (!atoms_satisfiable(a.filter_atoms, bindings, q.comparisons, db))
    return std::nullopt;

  // candidate items per node
  std::set<ItemId> universe_set(universe.begin(), universe.end());
  std::vector<std::vector<ItemId>> candidates(a.item_terms.size());
  for (std::size_t n = 0; n < a.item_terms.size(); ++n) {
    const Term& t = a.item_terms[n];
    if (t.is_constant()) {
      if (universe_set.count(t.text)) candidates[n].push_back(t.text);
      continue;
    }
    for (const ItemId& item : universe) {
      if (!var_comparisons_hold(t.text, item, q.comparisons)) continue;
      std::map<std::string, std::string> b = bindings;
      b.emplace(t.text, item);
      if (atoms_satisfiable(a.node_atoms[n], std::move(b), q.comparisons, db))
        candidates[n].push_back(item);
    }
  }

  // synthetic labels named after the terms
  std::vector<PatternNode> nodes;
  LabelingFunction lam;
  std::map<std::string, int> used;
  for (std::size_t n = 0; n < a.item_terms.size(); ++n) {
    std::string label = a.item_terms[n].text + label_suffix;
    int& count = used[label];
    if (++count > 1) label += "~" + std::to_string(count);
    for (const ItemId& item : candidates[n]) lam.add(item, label);
    nodes.push_back(PatternNode{{label}});
  }

  std::vector<std::pair<int, int>> edges;
  for (auto [l, r] : a.edges_by_atom) {
    if (l == r) return std::nullopt;  // an item preferred to itself
    edges.emplace_back(l, r);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  try {
    BuiltPattern out{LabelPattern(std::move(nodes), std::move(edges)),
                     std::move(lam)};
    return out;
  } catch (const Error&) {
    return std::nullopt;  // cyclic preference requirement
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Classification and grounding.

Classification classify_query(const Query& q, const PreferenceDatabase& db) {
  Analysis a = analyze(q, db);

  // ground candidates: o-atom variables that are neither item nor session
  auto is_candidate = [&](const Term& t) {
    return t.is_variable() && !a.item_vars.count(t.text) &&
           !a.session_vars.count(t.text);
  };

  // anchors per variable: item nodes (>= 0) and the session side (-1)
  std::map<std::string, std::set<int>> anchors;
  for (std::size_t i = 0; i < q.o_atoms.size(); ++i) {
    for (const auto& t : q.o_atoms[i].args) {
      if (!is_candidate(t)) continue;
      if (a.atom_node[i] >= 0) anchors[t.text].insert(a.atom_node[i]);
      if (a.atom_has_session[i]) anchors[t.text].insert(-1);
    }
  }
  std::set<std::string> vplus;
  for (const auto& [v, anch] : anchors)
    if (anch.size() >= 2) vplus.insert(v);

  // chains of atoms joined by remaining shared variables may still couple
  // two anchors; ground every variable on such a chain
  bool changed = true;
  while (changed) {
    changed = false;
    // connected components of o-atoms sharing a non-grounded candidate var
    std::vector<int> comp(q.o_atoms.size(), -1);
    int n_comp = 0;
    std::map<std::string, std::vector<std::size_t>> var_atoms;
    for (std::size_t i = 0; i < q.o_atoms.size(); ++i)
      for (const auto& t : q.o_atoms[i].args)
        if (is_candidate(t) && !vplus.count(t.text))
          var_atoms[t.text].push_back(i);
    std::function<void(std::size_t, int)> mark = [&](std::size_t i, int c) {
      if (comp[i] != -1) return;
      comp[i] = c;
      for (const auto& t : q.o_atoms[i].args)
        if (is_candidate(t) && !vplus.count(t.text))
          for (std::size_t j : var_atoms[t.text]) mark(j, c);
    };
    for (std::size_t i = 0; i < q.o_atoms.size(); ++i)
      if (comp[i] == -1) mark(i, n_comp++);

    for (int c = 0; c < n_comp; ++c) {
      std::set<int> comp_anchors;
      std::set<std::string> comp_vars;
      for (std::size_t i = 0; i < q.o_atoms.size(); ++i) {
        if (comp[i] != c) continue;
        if (a.atom_node[i] >= 0) comp_anchors.insert(a.atom_node[i]);
        if (a.atom_has_session[i]) comp_anchors.insert(-1);
        for (const auto& t : q.o_atoms[i].args)
          if (is_candidate(t) && !vplus.count(t.text)) comp_vars.insert(t.text);
      }
      if (comp_anchors.size() >= 2 && !comp_vars.empty()) {
        vplus.insert(comp_vars.begin(), comp_vars.end());
        changed = true;
      }
    }
  }

  Classification out;
  out.itemwise = vplus.empty();
  out.ground_variables.assign(vplus.begin(), vplus.end());
  return out;
}

std::vector<Query> decompose_query(const Query& q, const PreferenceDatabase& db,
                                   const DecomposeOptions& opts) {
  Classification cls = classify_query(q, db);
  if (cls.ground_variables.empty()) return {q};

  // active domain per variable: intersection over the columns it occurs in,
  // filtered by its comparisons
  std::vector<std::vector<std::string>> domains;
  for (const auto& v : cls.ground_variables) {
    std::optional<std::set<std::string>> dom;
    for (const auto& o : q.o_atoms) {
      const Relation& rel = db.relation(o.relation);
      for (std::size_t c = 0; c < o.args.size(); ++c) {
        if (!o.args[c].is_variable() || o.args[c].text != v) continue;
        std::set<std::string> col;
        for (const auto& row : rel.rows) col.insert(row[c]);
        if (!dom) {
          dom = std::move(col);
        } else {
          std::set<std::string> inter;
          for (const auto& x : *dom)
            if (col.count(x)) inter.insert(x);
          dom = std::move(inter);
        }
      }
    }
    if (!dom) return {};
    std::vector<std::string> vals(dom->begin(), dom->end());
    vals.erase(std::remove_if(vals.begin(), vals.end(),
                              [&](const std::string& x) {
                                return !var_comparisons_hold(v, x, q.comparisons);
                              }),
               vals.end());
    std::sort(vals.begin(), vals.end(), value_less);
    if (vals.empty()) return {};
    domains.push_back(std::move(vals));
  }

  double product = 1.0;
  for (const auto& d : domains) product *= static_cast<double>(d.size());
  if (product > static_cast<double>(opts.max_product))
    throw GuardError("grounding produces " + std::to_string(product) +
                     " queries, above the guard of " +
                     std::to_string(opts.max_product));

  std::vector<Query> out;
  std::vector<std::size_t> pick(domains.size(), 0);
  while (true) {
    Query inst = q;
    for (std::size_t i = 0; i < pick.size(); ++i) {
      const std::string& var = cls.ground_variables[i];
      const std::string& val = domains[i][pick[i]];
      Term repl = Term::constant(val, looks_numeric(val));
      for (auto& o : inst.o_atoms)
        for (auto& t : o.args)
          if (t.is_variable() && t.text == var) t = repl;
      for (auto& c : inst.comparisons)
        if (c.lhs.is_variable() && c.lhs.text == var) c.lhs = repl;
    }
    out.push_back(std::move(inst));
    std::size_t at = 0;
    for (; at < pick.size(); ++at) {
      if (++pick[at] < domains[at].size()) break;
      pick[at] = 0;
    }
    if (at == pick.size()) break;
  }
  return out;
}

std::optional<PatternWithLabels> query_to_pattern(const Query& q,
                                                  const PreferenceDatabase& db,
                                                  const Session& s) {
  Classification cls = classify_query(q, db);
  if (!cls.itemwise)
    throw Error("query is not itemwise; decompose it before reduction");
  Analysis a = analyze(q, db);
  auto built = build_pattern(a, q, db, db.items(), s, "");
  if (!built) return std::nullopt;
  return PatternWithLabels{std::move(built->pattern), std::move(built->labeling)};
}

// ---------------------------------------------------------------------------
// Worker pool.

int effective_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PREFDB_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn) {
  int workers = effective_threads(threads);
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  workers = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Inference routing and grouping.

namespace {

std::size_t minmax_slot_count(const PatternUnion& g) {
  std::set<std::pair<bool, std::vector<Label>>> slots;
  for (const auto& p : g.patterns)
    for (auto [a, b] : p.edges()) {
      slots.emplace(true, p.nodes()[a].labels);
      slots.emplace(false, p.nodes()[b].labels);
    }
  return slots.size();
}

std::string canonical_request_key(const Ranking& sigma, double phi,
                                  const PatternUnion& g,
                                  const LabelingFunction& lam) {
  std::string key;
  std::vector<ItemId> universe = sigma.order();
  for (const auto& item : universe) key += item + ">";
  char buf[40];
  std::snprintf(buf, sizeof buf, "|%a|", phi);
  key += buf;
  std::vector<std::string> pats;
  for (const auto& p : g.patterns) {
    std::string s;
    for (const auto& node : p.nodes()) {
      s += "[";
      for (const auto& item : lam.items_with(node.labels, universe))
        s += item + ",";
      s += "]";
    }
    s += "|";
    for (auto [a, b] : p.edges())
      s += std::to_string(a) + ">" + std::to_string(b) + ";";
    pats.push_back(std::move(s));
  }
  std::sort(pats.begin(), pats.end());
  for (const auto& p : pats) key += p + "||";
  return key;
}

}  // namespace

std::vector<std::vector<std::size_t>> group_sessions(
    const std::vector<SessionRequest>& requests) {
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const SessionRequest& r = requests[i];
    std::string key = canonical_request_key(*r.sigma, r.phi, *r.pattern,
                                            *r.labeling);
    auto [it, inserted] = index.emplace(std::move(key), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

InferenceAnswer infer_marginal(const PatternUnion& g, const LabeledModel& model,
                               const SolverConfig& cfg, std::uint64_t seed_salt) {
  SolverKind kind = cfg.kind;
  if (kind == SolverKind::Auto) {
    PatternClass cls = classify(g);
    int m = model.size();
    double states = std::pow(static_cast<double>(m + 1),
                             static_cast<double>(minmax_slot_count(g)));
    if (cls == PatternClass::TwoLabel && states <= cfg.state_budget)
      kind = SolverKind::TwoLabel;
    else if ((cls == PatternClass::TwoLabel || cls == PatternClass::Bipartite) &&
             states <= cfg.state_budget)
      kind = SolverKind::Bipartite;
    else if (g.size() <= 3 && m <= cfg.oracle_item_guard)
      kind = SolverKind::General;
    else
      kind = SolverKind::MisAdaptive;
  }

  InferenceAnswer out;
  switch (kind) {
    case SolverKind::TwoLabel: {
      MarginalResult r = two_label_solver(g, model, cfg.dp);
      out.value = r.probability;
      out.solver = r.solver;
      out.states = r.states_explored;
      break;
    }
    case SolverKind::Bipartite: {
      MarginalResult r = bipartite_solver(g, model, cfg.dp);
      out.value = r.probability;
      out.solver = r.solver;
      out.states = r.states_explored;
      break;
    }
    case SolverKind::General: {
      MarginalResult r = general_solver(g, model, cfg.subset_guard,
                                        cfg.oracle_item_guard, cfg.dp);
      out.value = r.probability;
      out.solver = r.solver;
      out.states = r.states_explored;
      out.terms = r.terms;
      break;
    }
    case SolverKind::Oracle: {
      out.value = oracle_marginal(g, model, cfg.oracle_item_guard);
      out.solver = "oracle";
      break;
    }
    case SolverKind::Rejection: {
      std::mt19937_64 rng(derive_seed(cfg.seed, seed_salt));
      Estimate e = rejection_estimate(g, model, cfg.samples, rng);
      out.value = e.value;
      out.solver = "rejection";
      out.exact = false;
      out.samples = e.samples_used;
      break;
    }
    case SolverKind::MisLite: {
      std::mt19937_64 rng(derive_seed(cfg.seed, seed_salt));
      Estimate e = mis_amp_lite(g, model, cfg.proposals, cfg.samples, rng,
                                cfg.mis);
      out.value = e.value;
      out.solver = "mis-lite";
      out.exact = false;
      out.samples = e.samples_used;
      break;
    }
    case SolverKind::MisAdaptive: {
      std::mt19937_64 rng(derive_seed(cfg.seed, seed_salt));
      Estimate e = mis_amp_adaptive(g, model, cfg.proposal_step, cfg.epsilon,
                                    cfg.samples, rng, cfg.mis);
      out.value = e.value;
      out.solver = "mis-adaptive";
      out.exact = false;
      out.samples = e.samples_used;
      break;
    }
    case SolverKind::Auto:
      throw Error("solver routing failed");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation pipeline.

namespace {

struct SessionWork {
  PatternUnion g;
  LabelingFunction lam;
  bool certain = false;  // satisfied with no preference constraint
};

struct Pipeline {
  std::vector<Query> grounded;
  std::vector<Analysis> analyses;
  std::vector<ItemId> universe;
  bool certain_without_sessions = false;  // a p-atom-free grounding holds
};

Pipeline prepare(const Query& q, const PreferenceDatabase& db,
                 const SolverConfig& cfg) {
  Pipeline pl;
  pl.universe = db.items();
  Classification cls = classify_query(q, db);
  pl.grounded = cls.itemwise ? std::vector<Query>{q}
                             : decompose_query(q, db, cfg.grounding);
  pl.analyses.reserve(pl.grounded.size());
  for (const auto& gq : pl.grounded) pl.analyses.push_back(analyze(gq, db));

  for (std::size_t i = 0; i < pl.grounded.size(); ++i) {
    if (!pl.grounded[i].p_atoms.empty()) continue;
    // no preference atom: the query is a plain existence check
    bool ok = true;
    for (const auto& c : pl.grounded[i].comparisons)
      if (c.lhs.is_constant() && !compare_values(c.lhs.text, c.op, c.rhs.text))
        ok = false;
    if (ok)
      ok = atoms_satisfiable(pl.analyses[i].filter_atoms, {},
                             pl.grounded[i].comparisons, db);
    if (ok) pl.certain_without_sessions = true;
  }
  return pl;
}

SessionWork build_session_work(const Pipeline& pl, const PreferenceDatabase& db,
                               const Session& s) {
  SessionWork work;
  for (std::size_t i = 0; i < pl.grounded.size(); ++i) {
    std::string suffix =
        pl.grounded.size() > 1 ? "@" + std::to_string(i + 1) : "";
    auto built =
        build_pattern(pl.analyses[i], pl.grounded[i], db, pl.universe, s, suffix);
    if (!built) continue;
    if (built->pattern.empty()) {
      work.certain = true;
      work.g.patterns.clear();
      return work;
    }
    work.g.patterns.push_back(std::move(built->pattern));
    work.lam.merge(built->labeling);
  }
  return work;
}

EvalResult run_pipeline(const Query& q, const PreferenceDatabase& db,
                        const SolverConfig& cfg) {
  Pipeline pl = prepare(q, db, cfg);
  EvalResult res;
  res.stats.grounded_queries = pl.grounded.size();
  res.sessions.resize(db.sessions.size());

  std::vector<SessionWork> work(db.sessions.size());
  parallel_for(db.sessions.size(), cfg.threads, [&](std::size_t i) {
    work[i] = build_session_work(pl, db, db.sessions[i]);
    res.sessions[i].id = db.sessions[i].id;
  });

  // group identical requests, then solve one representative per group
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < work.size(); ++i)
    if (!work[i].certain && !work[i].g.patterns.empty()) active.push_back(i);
  res.stats.session_requests = active.size();

  std::vector<std::vector<std::size_t>> groups;
  if (cfg.group) {
    std::vector<SessionRequest> requests;
    requests.reserve(active.size());
    for (std::size_t i : active)
      requests.push_back({&db.sessions[i].model.sigma, db.sessions[i].model.phi,
                          &work[i].g, &work[i].lam});
    groups = group_sessions(requests);
  } else {
    for (std::size_t k = 0; k < active.size(); ++k) groups.push_back({k});
  }
  res.stats.solver_calls = groups.size();

  parallel_for(groups.size(), cfg.threads, [&](std::size_t gi) {
    std::size_t rep = active[groups[gi].front()];
    const Session& s = db.sessions[rep];
    try {
      LabeledModel lm(s.model, work[rep].lam);
      InferenceAnswer ans = infer_marginal(work[rep].g, lm, cfg, gi);
      for (std::size_t member : groups[gi]) {
        std::size_t si = active[member];
        res.sessions[si].probability = ans.value;
        res.sessions[si].solver = ans.solver;
        res.sessions[si].exact = ans.exact;
      }
    } catch (const GuardError& e) {
      throw GuardError(std::string(e.what()) + " (session '" + s.id + "')");
    }
  });

  for (std::size_t i = 0; i < work.size(); ++i) {
    if (work[i].certain) {
      res.sessions[i].probability = 1.0;
      res.sessions[i].solver = "trivial";
    } else if (work[i].g.patterns.empty()) {
      res.sessions[i].probability = 0.0;
      res.sessions[i].solver = "none";
    }
  }

  KahanSum count;
  double miss_product = 1.0;
  for (const auto& s : res.sessions) {
    count.add(s.probability);
    miss_product *= 1.0 - s.probability;
  }
  res.expected_count = count.s;
  res.probability = 1.0 - miss_product;
  if (pl.certain_without_sessions) {
    res.probability = 1.0;
    for (auto& s : res.sessions) {
      s.probability = 1.0;
      s.solver = "trivial";
    }
    KahanSum full;
    for (std::size_t i = 0; i < res.sessions.size(); ++i) full.add(1.0);
    res.expected_count = full.s;
  }
  return res;
}

}  // namespace

EvalResult evaluate(const Query& q, const PreferenceDatabase& db,
                    const SolverConfig& cfg) {
  return run_pipeline(q, db, cfg);
}

EvalResult count_session(const Query& q, const PreferenceDatabase& db,
                         const SolverConfig& cfg) {
  return run_pipeline(q, db, cfg);
}

TopkResult most_probable_session(const Query& q, const PreferenceDatabase& db,
                                 int k, TopkStrategy strategy,
                                 const SolverConfig& cfg) {
  if (k < 1) throw Error("k must be at least 1");
  Pipeline pl = prepare(q, db, cfg);
  std::vector<SessionWork> work(db.sessions.size());
  parallel_for(db.sessions.size(), cfg.threads, [&](std::size_t i) {
    work[i] = build_session_work(pl, db, db.sessions[i]);
  });

  TopkResult res;
  std::vector<SessionAnswer> answers(db.sessions.size());
  for (std::size_t i = 0; i < db.sessions.size(); ++i)
    answers[i].id = db.sessions[i].id;

  std::atomic<std::uint64_t> exact_calls{0};
  auto resolve = [&](std::size_t i) {
    SessionAnswer& a = answers[i];
    if (!a.solver.empty()) return;  // already resolved
    if (work[i].certain || pl.certain_without_sessions) {
      a.probability = 1.0;
      a.solver = "trivial";
      return;
    }
    if (work[i].g.patterns.empty()) {
      a.probability = 0.0;
      a.solver = "none";
      return;
    }
    try {
      LabeledModel lm(db.sessions[i].model, work[i].lam);
      InferenceAnswer ans = infer_marginal(work[i].g, lm, cfg, i);
      a.probability = ans.value;
      a.solver = ans.solver;
      a.exact = ans.exact;
      exact_calls.fetch_add(1);
    } catch (const GuardError& e) {
      throw GuardError(std::string(e.what()) + " (session '" +
                       db.sessions[i].id + "')");
    }
  };

  auto rank_of = [&](const SessionAnswer& a, const SessionAnswer& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.id < b.id;
  };

  std::vector<std::size_t> ordered(db.sessions.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) ordered[i] = i;

  if (strategy == TopkStrategy::Full) {
    parallel_for(db.sessions.size(), cfg.threads,
                 [&](std::size_t i) { resolve(i); });
    res.exact_calls = exact_calls.load();
    std::sort(ordered.begin(), ordered.end(), [&](std::size_t x, std::size_t y) {
      return rank_of(answers[x], answers[y]);
    });
  } else {
    UpperBoundEdges edges = strategy == TopkStrategy::OneEdge
                                ? UpperBoundEdges::One
                                : UpperBoundEdges::Two;
    std::vector<double> bound(db.sessions.size(), 0.0);
    std::atomic<std::uint64_t> bound_calls{0};
    parallel_for(db.sessions.size(), cfg.threads, [&](std::size_t i) {
      if (work[i].certain || pl.certain_without_sessions) {
        bound[i] = 1.0;
      } else if (!work[i].g.patterns.empty()) {
        LabeledModel lm(db.sessions[i].model, work[i].lam);
        bound[i] = upper_bound_solver(work[i].g, lm, edges, cfg.dp);
        bound_calls.fetch_add(1);
      }
    });
    res.bound_calls = bound_calls.load();

    std::sort(ordered.begin(), ordered.end(), [&](std::size_t x, std::size_t y) {
      if (bound[x] != bound[y]) return bound[x] > bound[y];
      return db.sessions[x].id < db.sessions[y].id;
    });

    // resolve in descending bound order until the k-th exact probability
    // dominates every unresolved bound
    std::vector<double> resolved;
    for (std::size_t at = 0; at < ordered.size(); ++at) {
      if (resolved.size() >= static_cast<std::size_t>(k)) {
        std::vector<double> top = resolved;
        std::sort(top.begin(), top.end(), std::greater<>());
        if (top[k - 1] >= bound[ordered[at]]) break;
      }
      resolve(ordered[at]);
      resolved.push_back(answers[ordered[at]].probability);
    }
    res.exact_calls = exact_calls.load();

    // unresolved sessions keep probability 0 and an empty solver tag; they
    // can only appear in the output when fewer than k were resolved
    std::sort(ordered.begin(), ordered.end(), [&](std::size_t x, std::size_t y) {
      bool rx = !answers[x].solver.empty(), ry = !answers[y].solver.empty();
      if (rx != ry) return rx;
      return rank_of(answers[x], answers[y]);
    });
  }

  std::size_t take = std::min<std::size_t>(k, ordered.size());
  for (std::size_t i = 0; i < take; ++i)
    res.ranked.push_back(answers[ordered[i]]);
  return res;
}

}  // namespace prefdb

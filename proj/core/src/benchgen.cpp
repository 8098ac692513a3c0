#include "prefdb/benchgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "prefdb/engine.hpp"
#include "prefdb/error.hpp"
#include "prefdb/io.hpp"
#include "prefdb/model.hpp"
#include "prefdb/pattern.hpp"

namespace prefdb {

namespace {

namespace fs = std::filesystem;

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  std::size_t i = static_cast<std::size_t>(next_unit(rng) * static_cast<double>(n));
  return i < n ? i : n - 1;
}

std::string padded(const char* prefix, int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, value);
  return buf;
}

std::vector<ItemId> make_items(int m) {
  int width = m >= 100 ? 3 : 2;
  std::vector<ItemId> items;
  items.reserve(m);
  for (int i = 1; i <= m; ++i) items.push_back(padded("s", i, width));
  return items;
}

// k draws without replacement, proportional to the given weights
std::vector<int> weighted_sample(std::mt19937_64& rng,
                                 std::vector<double> weights, int k) {
  std::vector<int> picked;
  std::vector<int> alive(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) alive[i] = static_cast<int>(i);
  for (int d = 0; d < k; ++d) {
    double total = 0.0;
    for (int i : alive) total += weights[i];
    double u = next_unit(rng) * total;
    std::size_t at = 0;
    for (; at + 1 < alive.size(); ++at) {
      u -= weights[alive[at]];
      if (u < 0.0) break;
    }
    picked.push_back(alive[at]);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(at));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<int> uniform_sample(std::mt19937_64& rng, int n, int k) {
  return weighted_sample(rng, std::vector<double>(n, 1.0), k);
}

Ranking random_ranking(std::mt19937_64& rng, const std::vector<ItemId>& items) {
  std::vector<ItemId> order = items;
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return Ranking(order);
}

void write_instance(const std::string& dir, const MallowsModel& model,
                    const LabelingFunction& lam, const PatternUnion& g) {
  fs::create_directories(dir);
  write_model_file(model, dir + "/model.txt");
  write_labels_file(lam, dir + "/labels.txt");
  write_text_file(dir + "/patterns.txt", to_string(g));
}

// ---------------------------------------------------------------------------

std::vector<GeneratedInstance> gen_family_a(const BenchmarkSpec& spec,
                                            const std::string& out) {
  if (spec.a_unions < 1 || spec.a_items < 4)
    throw Error("family A needs at least one union and four items");
  std::vector<ItemId> items = make_items(spec.a_items);
  Ranking sigma(items);
  double phi = spec.phi < 0.0 ? 0.1 : spec.phi;

  std::vector<double> low_weight(items.size()), high_weight(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    low_weight[i] = std::pow(static_cast<double>(i + 1), 1.5);
    high_weight[i] =
        std::pow(static_cast<double>(spec.a_items + 1 - (int)(i + 1)), 1.5);
  }

  std::vector<GeneratedInstance> made;
  for (int u = 0; u < spec.a_unions; ++u) {
    std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(u)));
    LabelingFunction lam;
    auto assign = [&](const char* label, const std::vector<double>& w) {
      for (int i : weighted_sample(rng, w, 3)) lam.add(items[i], label);
    };
    assign("A", low_weight);
    assign("B", low_weight);
    assign("C", high_weight);
    assign("D", high_weight);

    auto edge_pattern = [](const std::string& from, const std::string& to) {
      return LabelPattern({PatternNode{{from}}, PatternNode{{to}}}, {{0, 1}});
    };
    PatternUnion g;
    g.patterns.push_back(edge_pattern("A", "C"));
    g.patterns.push_back(edge_pattern("A", "D"));
    g.patterns.push_back(edge_pattern("B", "D"));

    GeneratedInstance inst;
    inst.name = padded("a_", u + 1, 2);
    inst.dir = out + "/" + inst.name;
    write_instance(inst.dir, MallowsModel{sigma, phi}, lam, g);
    made.push_back(std::move(inst));
  }
  return made;
}

// one random DAG over labels: random topological order, each forward edge
// kept with probability 1/2, every label touching at least one edge (the
// pattern text format only records edges, so an isolated label would not
// survive a save/load round trip)
std::vector<std::pair<int, int>> random_dag(std::mt19937_64& rng, int n) {
  if (n < 2) throw Error("a pattern needs at least two labels");
  std::vector<int> topo(n);
  for (int i = 0; i < n; ++i) topo[i] = i;
  for (int i = n; i > 1; --i)
    std::swap(topo[i - 1], topo[uniform_index(rng, static_cast<std::size_t>(i))]);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (next_unit(rng) < 0.5) edges.emplace_back(topo[i], topo[j]);
  std::vector<bool> touched(n, false);
  for (auto [a, b] : edges) touched[a] = touched[b] = true;
  for (int i = 0; i < n; ++i) {
    if (touched[topo[i]]) continue;
    auto [a, b] = i + 1 < n ? std::pair{topo[i], topo[i + 1]}
                            : std::pair{topo[i - 1], topo[i]};
    edges.emplace_back(a, b);
    touched[a] = touched[b] = true;
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

// random bipartite graph over labels: left block to right block, every
// label touching at least one edge
std::vector<std::pair<int, int>> random_bipartite(std::mt19937_64& rng, int n) {
  if (n < 2) throw Error("a pattern needs at least two labels");
  int left = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n - 1)));
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < left; ++a)
    for (int b = left; b < n; ++b)
      if (next_unit(rng) < 0.5) edges.emplace_back(a, b);
  std::vector<bool> touched(n, false);
  for (auto [a, b] : edges) touched[a] = touched[b] = true;
  for (int a = 0; a < left; ++a)
    if (!touched[a]) {
      int b = left + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n - left)));
      edges.emplace_back(a, b);
      touched[a] = touched[b] = true;
    }
  for (int b = left; b < n; ++b)
    if (!touched[b]) {
      int a = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(left)));
      edges.emplace_back(a, b);
      touched[a] = touched[b] = true;
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

struct GridDefaults {
  std::vector<int> items, patterns, labels, per_label;
  double phi;
};

// shared by families B and C: unions whose patterns share one label graph
std::vector<GeneratedInstance> gen_grid_family(
    const BenchmarkSpec& spec, const std::string& out, const char* tag,
    const GridDefaults& def, bool bipartite) {
  std::vector<int> ms = spec.items.empty() ? def.items : spec.items;
  std::vector<int> nps =
      spec.patterns_per_union.empty() ? def.patterns : spec.patterns_per_union;
  std::vector<int> nls =
      spec.labels_per_pattern.empty() ? def.labels : spec.labels_per_pattern;
  std::vector<int> nis =
      spec.items_per_label.empty() ? def.per_label : spec.items_per_label;
  double phi = spec.phi < 0.0 ? def.phi : spec.phi;

  std::vector<GeneratedInstance> made;
  std::uint64_t salt = 0;
  for (int m : ms)
    for (int np : nps)
      for (int nl : nls)
        for (int ni : nis)
          for (int rep = 1; rep <= spec.instances_per_cell; ++rep) {
            if (ni > m)
              throw Error("a label cannot hold " + std::to_string(ni) +
                          " distinct items with m = " + std::to_string(m));
            std::mt19937_64 rng(derive_seed(spec.seed, salt++));
            std::vector<ItemId> items = make_items(m);
            auto edges = bipartite ? random_bipartite(rng, nl)
                                   : random_dag(rng, nl);
            LabelingFunction lam;
            PatternUnion g;
            for (int p = 1; p <= np; ++p) {
              std::vector<PatternNode> nodes;
              for (int l = 1; l <= nl; ++l) {
                std::string label =
                    "p" + std::to_string(p) + "L" + std::to_string(l);
                for (int idx : uniform_sample(rng, m, ni))
                  lam.add(items[idx], label);
                nodes.push_back(PatternNode{{label}});
              }
              g.patterns.emplace_back(std::move(nodes), edges);
            }
            GeneratedInstance inst;
            char name[96];
            std::snprintf(name, sizeof name, "%s_m%03d_p%d_l%d_i%d_r%02d", tag,
                          m, np, nl, ni, rep);
            inst.name = name;
            inst.dir = out + "/" + inst.name;
            write_instance(inst.dir, MallowsModel{Ranking(items), phi}, lam, g);
            made.push_back(std::move(inst));
          }
  return made;
}

std::vector<GeneratedInstance> gen_family_d(const BenchmarkSpec& spec,
                                            const std::string& out) {
  std::vector<int> ms = spec.items.empty()
                            ? std::vector<int>{20, 30, 40, 50, 60}
                            : spec.items;
  std::vector<int> nps = spec.patterns_per_union.empty()
                             ? std::vector<int>{2, 3, 4, 5}
                             : spec.patterns_per_union;
  std::vector<int> nis = spec.items_per_label.empty()
                             ? std::vector<int>{3, 5, 7}
                             : spec.items_per_label;
  double phi = spec.phi < 0.0 ? 0.5 : spec.phi;

  std::vector<GeneratedInstance> made;
  std::uint64_t salt = 0;
  for (int m : ms)
    for (int np : nps)
      for (int ni : nis)
        for (int rep = 1; rep <= spec.instances_per_cell; ++rep) {
          if (ni > m)
            throw Error("a label cannot hold " + std::to_string(ni) +
                        " distinct items with m = " + std::to_string(m));
          std::mt19937_64 rng(derive_seed(spec.seed, salt++));
          std::vector<ItemId> items = make_items(m);
          LabelingFunction lam;
          PatternUnion g;
          for (int p = 1; p <= np; ++p) {
            std::string from = "p" + std::to_string(p) + "L";
            std::string to = "p" + std::to_string(p) + "R";
            for (int idx : uniform_sample(rng, m, ni)) lam.add(items[idx], from);
            for (int idx : uniform_sample(rng, m, ni)) lam.add(items[idx], to);
            g.patterns.push_back(
                LabelPattern({PatternNode{{from}}, PatternNode{{to}}}, {{0, 1}}));
          }
          GeneratedInstance inst;
          char name[96];
          std::snprintf(name, sizeof name, "d_m%02d_p%d_i%d_r%02d", m, np, ni,
                        rep);
          inst.name = name;
          inst.dir = out + "/" + inst.name;
          write_instance(inst.dir, MallowsModel{Ranking(items), phi}, lam, g);
          made.push_back(std::move(inst));
        }
  return made;
}

std::vector<GeneratedInstance> gen_polls(const BenchmarkSpec& spec,
                                         const std::string& out) {
  if (spec.polls_candidates < 2 || spec.polls_voters < 1)
    throw Error("polls needs at least two candidates and one voter");
  std::mt19937_64 rng(derive_seed(spec.seed, 0));

  const std::vector<std::string> parties = {"R", "D"};
  const std::vector<std::string> sexes = {"M", "F"};
  const std::vector<std::string> ages = {"20", "30", "40", "50", "60", "70"};
  const std::vector<std::string> edus = {"HS", "AA", "BS", "MS", "PhD", "JD"};
  const std::vector<std::string> regions = {"NE", "SE", "MW", "S", "W", "NW"};
  const std::vector<std::string> dates = {"5/5", "6/5"};
  const std::vector<double> phis = {0.2, 0.5, 0.8};

  auto pick = [&](const std::vector<std::string>& vals) {
    return vals[uniform_index(rng, vals.size())];
  };

  std::vector<ItemId> candidates;
  int cwidth = spec.polls_candidates >= 100 ? 3 : 2;
  for (int i = 1; i <= spec.polls_candidates; ++i)
    candidates.push_back(padded("c", i, cwidth));

  Relation cand_rel;
  cand_rel.name = "Candidates";
  cand_rel.columns = {"candidate", "party", "sex", "age", "edu", "reg"};
  for (const auto& c : candidates)
    cand_rel.rows.push_back(
        {c, pick(parties), pick(sexes), pick(ages), pick(edus), pick(regions)});

  // 9 models per demographic group: 3 random centers times 3 phi values
  struct Group {
    std::vector<MallowsModel> models;
  };
  std::map<std::string, Group> groups;
  for (const auto& sex : sexes)
    for (const auto& age : ages)
      for (const auto& edu : edus) {
        Group grp;
        for (int c = 0; c < 3; ++c) {
          Ranking center = random_ranking(rng, candidates);
          for (double phi : phis) grp.models.push_back({center, phi});
        }
        groups.emplace(sex + "|" + age + "|" + edu, std::move(grp));
      }

  Relation voter_rel;
  voter_rel.name = "Voters";
  voter_rel.columns = {"voter", "sex", "age", "edu"};
  std::string polls = "voter,date,phi,sigma\n";
  int vwidth = spec.polls_voters >= 1000 ? 4 : 3;
  for (int v = 1; v <= spec.polls_voters; ++v) {
    std::string id = padded("v", v, vwidth);
    std::string sex = pick(sexes), age = pick(ages), edu = pick(edus);
    voter_rel.rows.push_back({id, sex, age, edu});
    const Group& grp = groups.at(sex + "|" + age + "|" + edu);
    const MallowsModel& model = grp.models[uniform_index(rng, grp.models.size())];
    std::string date = pick(dates);
    char phi_text[32];
    std::snprintf(phi_text, sizeof phi_text, "%.17g", model.phi);
    std::string sigma;
    for (const auto& item : model.sigma.order()) {
      if (!sigma.empty()) sigma += " > ";
      sigma += item;
    }
    polls += id + "," + date + "," + phi_text + "," + sigma + "\n";
  }

  std::string dir = out + "/polls";
  fs::create_directories(dir);
  write_text_file(dir + "/manifest.txt",
                  "p_relation=Polls\n"
                  "item_relation=Candidates\n"
                  "label_attributes=party,sex,age,edu,reg\n");
  write_csv(cand_rel, dir + "/Candidates.csv");
  write_csv(voter_rel, dir + "/Voters.csv");
  write_text_file(dir + "/Polls.models", polls);
  return {{"polls", dir}};
}

}  // namespace

std::vector<GeneratedInstance> generate_benchmark(const BenchmarkSpec& spec,
                                                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  switch (spec.family) {
    case BenchmarkFamily::A:
      return gen_family_a(spec, out_dir);
    case BenchmarkFamily::B: {
      GridDefaults def{{20, 50, 100, 200}, {1, 2, 3}, {3, 4, 5}, {3, 5, 7}, 0.1};
      return gen_grid_family(spec, out_dir, "b", def, false);
    }
    case BenchmarkFamily::C: {
      GridDefaults def{{10, 12, 14, 16}, {1, 2, 3}, {2, 3, 4}, {1, 3, 5}, 0.1};
      return gen_grid_family(spec, out_dir, "c", def, true);
    }
    case BenchmarkFamily::D:
      return gen_family_d(spec, out_dir);
    case BenchmarkFamily::Polls:
      return gen_polls(spec, out_dir);
  }
  throw Error("unknown benchmark family");
}

}  // namespace prefdb

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prefdb {

// Synthetic workloads for the solvers and the query engine.
//
//   A     33 unions of the 3 bipartite patterns {A>C, A>D, B>D} over
//         MAL(s01..s15, 0.1); labels A,B draw items with weight i^1.5,
//         C,D with weight (16-i)^1.5, 3 items each, shared across the
//         union's patterns.
//   B     pattern unions sharing one random label DAG per union;
//         m in {20,50,100,200}, 1-3 patterns, 3-5 labels, 3/5/7 items
//         per label, phi 0.1, 10 instances per cell (1080 total).
//   C     bipartite unions sharing one random bipartite label graph;
//         m in {10,12,14,16}, 1-3 patterns, 2-4 labels, 1/3/5 items
//         per label, phi 0.1, 10 per cell (1080 total).
//   D     unions of single-edge two-label patterns; m in {20,30,40,50,60},
//         2-5 patterns, 3/5/7 items per label, phi 0.5, 10 per cell (600).
//   Polls voter database: candidate and voter relations plus one poll per
//         voter; 72 demographic groups, 9 Mallows models per group.
enum class BenchmarkFamily { A, B, C, D, Polls };

struct BenchmarkSpec {
  BenchmarkFamily family = BenchmarkFamily::A;
  std::uint64_t seed = 42;

  // family A
  int a_unions = 33;
  int a_items = 15;  // the label weights reference positions 1..15

  // families B, C, D: empty grids mean the family defaults above
  std::vector<int> items;
  std::vector<int> patterns_per_union;
  std::vector<int> labels_per_pattern;
  std::vector<int> items_per_label;
  int instances_per_cell = 10;
  double phi = -1.0;  // negative: family default

  // family Polls
  int polls_voters = 1000;
  int polls_candidates = 16;
};

struct GeneratedInstance {
  std::string name;
  std::string dir;
};

// Writes one directory per instance under out_dir. A-D instances hold
// model.txt, labels.txt and patterns.txt; Polls is one database directory
// (manifest plus relation and model files). Deterministic for a fixed seed.
std::vector<GeneratedInstance> generate_benchmark(const BenchmarkSpec& spec,
                                                  const std::string& out_dir);

}  // namespace prefdb

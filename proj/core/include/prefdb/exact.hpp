#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "prefdb/model.hpp"
#include "prefdb/pattern.hpp"

namespace prefdb {

struct MarginalResult {
  double probability = 0.0;
  std::string solver;
  std::uint64_t states_explored = 0;
  double wall_seconds = 0.0;
  // Signed inclusion-exclusion terms, filled by general_solver only.
  std::vector<std::pair<std::string, double>> terms;
};

struct DpLimits {
  std::size_t max_states = 5'000'000;  // per insertion step
};

// Reference answer: sums the model probability of every permutation of the
// item universe that matches g.  Exponential; guarded by item count.
double oracle_marginal(const PatternUnion& g, const LabeledModel& model,
                       int item_guard = 8);

// Inclusion-exclusion over the 2^u - 1 nonempty sub-unions: the marginal of
// each conjunction is computed by the insertion DP when the conjunction is
// two-label or bipartite and by the oracle otherwise (which requires the
// item count to stay within oracle_item_guard).
MarginalResult general_solver(const PatternUnion& g, const LabeledModel& model,
                              int subset_guard = 12, int oracle_item_guard = 8,
                              const DpLimits& limits = {});

// Insertion DP for unions of single-edge patterns.  Tracks, per pattern,
// the smallest position of a left-label item and the largest position of a
// right-label item, keeping only states that satisfy no pattern yet;
// returns one minus the surviving mass.
MarginalResult two_label_solver(const PatternUnion& g, const LabeledModel& model,
                                const DpLimits& limits = {});

enum class BipartiteMode {
  Pruned,  // retire states early, drop decided patterns and unused positions
  Basic,   // keep full position vectors until the end (reference variant)
};

// Captures the per-step states of the bipartite DP for inspection.
struct BipartiteTrace {
  struct State {
    std::vector<std::pair<std::string, int>> alpha;  // node text -> min position
    std::vector<std::pair<std::string, int>> beta;   // node text -> max position
    // (pattern index, left node text, right node text) of undecided edges
    std::vector<std::tuple<int, std::string, std::string>> uncertain;
    double mass = 0.0;
  };
  std::vector<std::vector<State>> steps;   // states kept after each insertion
  std::vector<double> satisfied_mass;      // cumulative accepted mass per step
};

// Insertion DP for unions of bipartite patterns (every node purely a source
// or purely a target).  Edge (l, r) is satisfied once min(l) < max(r),
// violated when min(l) >= max(r) with no items bearing either label left to
// insert; a pattern is satisfied when all its edges are, and the union's
// probability accumulates from satisfied states.
MarginalResult bipartite_solver(const PatternUnion& g, const LabeledModel& model,
                                const DpLimits& limits = {},
                                BipartiteMode mode = BipartiteMode::Pruned,
                                BipartiteTrace* trace = nullptr);

enum class UpperBoundEdges { One = 1, Two = 2, All = 0 };

// Upper bound on the marginal of g: per pattern, relaxes the embedding to
// min/max position constraints over edges of the transitive closure,
// keeping the hardest (smallest-ease) edges.  With all edges kept the bound
// is exact for bipartite unions.
double upper_bound_solver(const PatternUnion& g, const LabeledModel& model,
                          UpperBoundEdges edges, const DpLimits& limits = {});

// How easy a min/max constraint from -> to is to satisfy under sigma: the
// largest position of a to-item minus the smallest position of a from-item.
// Larger values are satisfied by more rankings near sigma.
int edge_ease(const Ranking& sigma, const LabelingFunction& lam,
              const PatternNode& from, const PatternNode& to);

}  // namespace prefdb

#pragma once
// query evaluation pipeline: classification, grounding, reduction to label
// patterns, per-session inference, aggregation, and top-k search

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prefdb/approx.hpp"
#include "prefdb/database.hpp"
#include "prefdb/exact.hpp"
#include "prefdb/query.hpp"

namespace prefdb {

struct Classification {
  bool itemwise = true;
  std::vector<std::string> ground_variables;  // sorted; empty iff itemwise
};

// Validates query shape (single session per query, known relations and
// arities, bound comparison variables) and decides whether candidate sets
// can be computed per item term independently.
Classification classify_query(const Query& q, const PreferenceDatabase& db);

struct DecomposeOptions {
  std::size_t max_product = 10000;  // grounding assignments guard
};

// Instantiates every ground variable over its active domain; each returned
// query is itemwise. Itemwise input comes back as a single-element list.
std::vector<Query> decompose_query(const Query& q, const PreferenceDatabase& db,
                                   const DecomposeOptions& opts = {});

struct PatternWithLabels {
  LabelPattern pattern;
  LabelingFunction labeling;  // synthetic labels, one per pattern node
};

// Reduces an itemwise query to a label pattern for one session. nullopt
// when the query cannot hold there: a session filter fails, or the stated
// preferences are cyclic or reflexive.
std::optional<PatternWithLabels> query_to_pattern(const Query& q,
                                                  const PreferenceDatabase& db,
                                                  const Session& s);

enum class SolverKind {
  Auto,
  TwoLabel,
  Bipartite,
  General,
  Oracle,
  Rejection,
  MisLite,
  MisAdaptive,
};

struct SolverConfig {
  SolverKind kind = SolverKind::Auto;
  DpLimits dp;
  int subset_guard = 12;
  int oracle_item_guard = 8;
  double state_budget = 1e8;     // auto routing: max estimated DP states
  std::uint64_t samples = 2000;  // per proposal (MIS) / total (rejection)
  int proposals = 4;             // d for the fixed-budget estimator
  int proposal_step = 2;         // increment for the adaptive estimator
  double epsilon = 0.05;         // adaptive convergence threshold
  std::uint64_t seed = 42;
  MisOptions mis;
  DecomposeOptions grounding;
  bool group = true;  // collapse identical (model, union) requests
  int threads = 0;    // 0: PREFDB_THREADS env var, else hardware count
};

struct SessionAnswer {
  std::string id;
  double probability = 0.0;
  std::string solver;  // "none" when the session has nothing to satisfy
  bool exact = true;
};

struct EngineStats {
  std::uint64_t solver_calls = 0;      // inference invocations (post grouping)
  std::uint64_t session_requests = 0;  // sessions with a nonempty union
  std::uint64_t grounded_queries = 0;
};

struct EvalResult {
  double probability = 0.0;     // 1 - prod(1 - p_i)
  double expected_count = 0.0;  // sum of p_i
  std::vector<SessionAnswer> sessions;
  EngineStats stats;
};

EvalResult evaluate(const Query& q, const PreferenceDatabase& db,
                    const SolverConfig& cfg = {});
EvalResult count_session(const Query& q, const PreferenceDatabase& db,
                         const SolverConfig& cfg = {});

enum class TopkStrategy { Full, OneEdge, TwoEdge };

struct TopkResult {
  std::vector<SessionAnswer> ranked;  // best k, descending probability
  std::uint64_t exact_calls = 0;
  std::uint64_t bound_calls = 0;
};

TopkResult most_probable_session(const Query& q, const PreferenceDatabase& db,
                                 int k, TopkStrategy strategy = TopkStrategy::Full,
                                 const SolverConfig& cfg = {});

// Groups identical inference requests: indices i, j land in one group iff
// their models match (reference, parameters) and their pattern unions have
// identical label extensions. Groups are ordered by first appearance.
struct SessionRequest {
  const Ranking* sigma;
  double phi;
  const PatternUnion* pattern;
  const LabelingFunction* labeling;
};
std::vector<std::vector<std::size_t>> group_sessions(
    const std::vector<SessionRequest>& requests);

// One pattern-union marginal through the configured solver.
struct InferenceAnswer {
  double value = 0.0;
  std::string solver;
  bool exact = true;
  std::vector<std::pair<std::string, double>> terms;  // general solver only
  std::uint64_t states = 0;
  std::uint64_t samples = 0;
};
InferenceAnswer infer_marginal(const PatternUnion& g, const LabeledModel& model,
                               const SolverConfig& cfg,
                               std::uint64_t seed_salt = 0);

// Worker-pool helpers shared by the engine and the CLI.
int effective_threads(int requested);
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace prefdb

#pragma once
// sampling-based estimators for pattern-union probabilities

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "prefdb/matching.hpp"
#include "prefdb/model.hpp"

namespace prefdb {

// One proposal distribution: Mallows centered at `center`, sampled through
// the constrained-insertion walk so every draw respects `condition`.
struct Proposal {
  Ranking center;
  double phi = 0.5;
  Ranking condition;          // sub-ranking every sample must respect
  double weight_share = 1.0;  // c_i = n_i / N; equal shares in practice
};

struct Estimate {
  double value = 0.0;  // final estimate; compensated pipelines cap it at 1
  double uncompensated = 0.0;  // mixture mean before compensation and cap
  std::uint64_t samples_used = 0;
  int proposals_used = 0;
  double comp_subranking = 1.0;   // compensation for pruned sub-rankings
  double comp_modal = 1.0;        // compensation for pruned modals
  double weight_sum_error = 0.0;  // max |sum of mixture weights - 1| seen
};

struct MisOptions {
  std::size_t modal_pool_cap_factor = 64;  // pool size cap = factor * d
  std::size_t branch_cap = 4096;           // greedy completion branch cap
  DecomposeLimits decompose;
  // test hook, called on every drawn sample when set
  std::function<void(const Ranking&)> sample_check;
};

// Monte Carlo hit rate of matches_union over model samples.
Estimate rejection_estimate(const PatternUnion& g, const LabeledModel& model,
                            std::uint64_t n, std::mt19937_64& rng);

// All distance-minimizing greedy completions of psi toward sigma (branching
// on tied insertion slots), deduplicated.
std::vector<Ranking> greedy_modals(const Ranking& psi, const Ranking& sigma,
                                   std::size_t branch_cap = 4096);

// Distance of one greedy completion (lowest tied slot taken at each step).
int approximate_distance(const Ranking& psi, const Ranking& sigma);

// Importance sampling from the model's own constrained-insertion walk:
// (1/n) sum of model_prob/proposal_prob over draws conditioned on psi.
Estimate is_amp_estimate(const Ranking& psi, const MallowsModel& mal,
                         std::uint64_t n, std::mt19937_64& rng);

// Multiple importance sampling with balance-heuristic weights; draws
// n_per_proposal samples from each proposal.
Estimate mis_amp_estimate(const std::vector<Proposal>& proposals,
                          const MallowsModel& mal,
                          std::uint64_t n_per_proposal, std::mt19937_64& rng,
                          const std::function<void(const Ranking&)>& sample_check = {});

// Full pipeline: decompose g into sub-rankings, keep the closest ones until
// d modals are found, estimate over the d closest modals, and multiply by
// the two pruning compensations, capping the result at one.
Estimate mis_amp_lite(const PatternUnion& g, const LabeledModel& model, int d,
                      std::uint64_t n_per_proposal, std::mt19937_64& rng,
                      const MisOptions& opts = {});

// Repeats mis_amp_lite with d = delta_d, 2*delta_d, ... until the relative
// change drops below epsilon or the modal pool is exhausted.
Estimate mis_amp_adaptive(const PatternUnion& g, const LabeledModel& model,
                          int delta_d, double epsilon,
                          std::uint64_t n_per_proposal, std::mt19937_64& rng,
                          const MisOptions& opts = {});

}  // namespace prefdb

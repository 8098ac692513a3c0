#include "prefdb/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

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

// Inversions created by inserting `item` at each of the L+1 slots of `seq`
// (slot j = before seq[j]); every element must rank in sigma.
std::vector<int> insertion_costs(const std::vector<ItemId>& seq,
                                 const ItemId& item, const Ranking& sigma) {
  int len = static_cast<int>(seq.size());
  int rx = sigma.rank_of(item);
  std::vector<int> suffix_before(len + 1, 0);
  std::vector<int> after(len, 0);
  for (int k = len - 1; k >= 0; --k) {
    int rk = sigma.rank_of(seq[k]);
    suffix_before[k] = suffix_before[k + 1] + (rk < rx ? 1 : 0);
    after[k] = rx < rk ? 1 : 0;
  }
  std::vector<int> cost(len + 1, 0);
  int prefix_after = 0;
  for (int j = 0; j <= len; ++j) {
    cost[j] = prefix_after + suffix_before[j];
    if (j < len) prefix_after += after[j];
  }
  return cost;
}

void require_subranking(const Ranking& psi, const Ranking& sigma) {
  for (int k = 1; k <= psi.size(); ++k)
    if (sigma.rank_of(psi.at(k)) == 0)
      throw Error("sub-ranking item '" + psi.at(k) +
                  "' is not ranked by the reference");
}

}  // namespace

std::vector<Ranking> greedy_modals(const Ranking& psi, const Ranking& sigma,
                                   std::size_t branch_cap) {
  require_subranking(psi, sigma);
  if (branch_cap == 0) branch_cap = 1;

  struct Candidate {
    std::vector<ItemId> seq;
    int dist;
  };
  std::vector<Candidate> cands;
  cands.push_back({psi.order(), subranking_distance(psi, sigma)});

  for (int i = 1; i <= sigma.size(); ++i) {
    const ItemId& item = sigma.at(i);
    if (psi.rank_of(item) != 0) continue;
    std::vector<Candidate> next;
    std::set<std::vector<ItemId>> seen;
    for (const auto& c : cands) {
      std::vector<int> cost = insertion_costs(c.seq, item, sigma);
      int best = *std::min_element(cost.begin(), cost.end());
      for (std::size_t j = 0; j < cost.size(); ++j) {
        if (cost[j] != best) continue;
        std::vector<ItemId> seq = c.seq;
        seq.insert(seq.begin() + j, item);
        if (seen.insert(seq).second)
          next.push_back({std::move(seq), c.dist + best});
      }
    }
    if (next.size() > branch_cap) {
      std::sort(next.begin(), next.end(),
                [](const Candidate& a, const Candidate& b) {
                  return std::tie(a.dist, a.seq) < std::tie(b.dist, b.seq);
                });
      next.resize(branch_cap);
    }
    cands = std::move(next);
  }

  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) {
              return std::tie(a.dist, a.seq) < std::tie(b.dist, b.seq);
            });
  std::vector<Ranking> out;
  out.reserve(cands.size());
  for (auto& c : cands) out.emplace_back(std::move(c.seq));
  return out;
}

int approximate_distance(const Ranking& psi, const Ranking& sigma) {
  require_subranking(psi, sigma);
  std::vector<ItemId> seq = psi.order();
  int dist = subranking_distance(psi, sigma);
  for (int i = 1; i <= sigma.size(); ++i) {
    const ItemId& item = sigma.at(i);
    if (psi.rank_of(item) != 0) continue;
    std::vector<int> cost = insertion_costs(seq, item, sigma);
    std::size_t best =
        std::min_element(cost.begin(), cost.end()) - cost.begin();
    seq.insert(seq.begin() + best, item);
    dist += cost[best];
  }
  return dist;
}

Estimate rejection_estimate(const PatternUnion& g, const LabeledModel& model,
                            std::uint64_t n, std::mt19937_64& rng) {
  if (n == 0) throw Error("sample count must be positive");
  std::uint64_t hits = 0;
  for (std::uint64_t k = 0; k < n; ++k) {
    Ranking t = rim_sample(model.rim(), rng);
    if (matches_union(t, model.labeling(), g)) ++hits;
  }
  Estimate e;
  e.value = static_cast<double>(hits) / static_cast<double>(n);
  e.uncompensated = e.value;
  e.samples_used = n;
  return e;
}

namespace {

Estimate mis_core(const std::vector<Proposal>& proposals,
                  const MallowsModel& mal, std::uint64_t n,
                  std::mt19937_64& rng,
                  const std::function<void(const Ranking&)>& sample_check) {
  if (proposals.empty())
    throw Error("at least one proposal distribution is required");
  if (n == 0) throw Error("sample count must be positive");
  std::size_t d = proposals.size();

  double share_total = 0.0;
  for (const auto& pr : proposals) {
    if (!(pr.weight_share > 0.0))
      throw Error("proposal weight shares must be positive");
    share_total += pr.weight_share;
  }
  struct Prep {
    MallowsModel model;
    PartialOrder cond;
    double log_share;
  };
  std::vector<Prep> prep;
  prep.reserve(d);
  for (const auto& pr : proposals)
    prep.push_back({MallowsModel{pr.center, pr.phi},
                    PartialOrder::chain_of(pr.condition),
                    std::log(pr.weight_share / share_total)});

  KahanSum sum;
  double weight_err = 0.0;
  std::vector<double> log_q(d);
  for (std::size_t t = 0; t < d; ++t) {
    for (std::uint64_t j = 0; j < n; ++j) {
      auto [x, log_q_self] = amp_sample(prep[t].model, prep[t].cond, rng);
      if (sample_check) sample_check(x);
      for (std::size_t s = 0; s < d; ++s)
        log_q[s] = s == t ? log_q_self
                          : amp_log_prob(prep[s].model, prep[s].cond, x);
      double mix_max = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < d; ++s)
        mix_max = std::max(mix_max, prep[s].log_share + log_q[s]);
      double acc = 0.0;
      for (std::size_t s = 0; s < d; ++s)
        acc += std::exp(prep[s].log_share + log_q[s] - mix_max);
      double log_mix = mix_max + std::log(acc);
      sum.add(std::exp(mallows_log_prob(mal, x) - log_mix));

      double weight_sum = 0.0;
      for (std::size_t s = 0; s < d; ++s)
        weight_sum += std::exp(prep[s].log_share + log_q[s] - log_mix);
      weight_err = std::max(weight_err, std::abs(weight_sum - 1.0));
    }
  }

  Estimate e;
  e.value = sum.s / static_cast<double>(d * n);
  e.uncompensated = e.value;
  e.samples_used = d * n;
  e.proposals_used = static_cast<int>(d);
  e.weight_sum_error = weight_err;
  return e;
}

}  // namespace

Estimate mis_amp_estimate(const std::vector<Proposal>& proposals,
                          const MallowsModel& mal,
                          std::uint64_t n_per_proposal, std::mt19937_64& rng,
                          const std::function<void(const Ranking&)>& sample_check) {
  for (const auto& pr : proposals)
    if (!is_consistent(pr.center, PartialOrder::chain_of(pr.condition)))
      throw Error("proposal center is inconsistent with its condition");
  return mis_core(proposals, mal, n_per_proposal, rng, sample_check);
}

Estimate is_amp_estimate(const Ranking& psi, const MallowsModel& mal,
                         std::uint64_t n, std::mt19937_64& rng) {
  // single proposal: the model itself, constrained to psi (the model's
  // reference need not respect psi, which is where the variance comes from)
  return mis_core({Proposal{mal.sigma, mal.phi, psi, 1.0}}, mal, n, rng, {});
}

Estimate mis_amp_lite(const PatternUnion& g, const LabeledModel& model, int d,
                      std::uint64_t n_per_proposal, std::mt19937_64& rng,
                      const MisOptions& opts) {
  if (d < 1) throw Error("proposal budget must be positive");
  if (!model.mallows())
    throw Error("sampling estimators need a ranking-distance model");
  const MallowsModel& mal = *model.mallows();
  if (!(mal.phi > 0.0)) throw Error("sampling estimators require phi > 0");
  const Ranking& sigma = model.sigma();

  std::vector<Ranking> subs = decompose_to_subrankings(
      g, model.labeling(), sigma.order(), opts.decompose);
  Estimate e;
  if (subs.empty()) return e;  // nothing matches: probability zero

  struct SubInfo {
    Ranking psi;
    int dist;
  };
  std::vector<SubInfo> order;
  order.reserve(subs.size());
  for (auto& psi : subs) {
    int dist = approximate_distance(psi, sigma);
    order.push_back({std::move(psi), dist});
  }
  std::sort(order.begin(), order.end(), [](const SubInfo& a, const SubInfo& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.psi < b.psi;
  });

  // grow the modal pool over the closest sub-rankings until it can fill the
  // proposal budget; a ranking that is modal for several sub-rankings keeps
  // one entry per sub-ranking, since each pairing is its own mixture
  // component and dropping one would silently lose that sub-ranking's mass
  struct ModalInfo {
    Ranking r;
    int dist;
    std::size_t sub;  // index of the sub-ranking that produced it
  };
  std::vector<ModalInfo> pool;
  std::size_t cap = std::max<std::size_t>(
      static_cast<std::size_t>(d), opts.modal_pool_cap_factor * static_cast<std::size_t>(d));
  std::size_t consumed = 0;
  auto by_closeness = [](const ModalInfo& a, const ModalInfo& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.r != b.r) return a.r < b.r;
    return a.sub < b.sub;
  };
  while (consumed < order.size()) {
    std::size_t idx = consumed++;
    for (Ranking& r : greedy_modals(order[idx].psi, sigma, opts.branch_cap)) {
      int dist = kendall_tau(r, sigma);
      pool.push_back({std::move(r), dist, idx});
    }
    if (pool.size() > cap) {
      std::sort(pool.begin(), pool.end(), by_closeness);
      pool.resize(cap);
    }
    if (pool.size() >= static_cast<std::size_t>(d)) break;
  }

  std::sort(pool.begin(), pool.end(), by_closeness);
  std::size_t chosen = std::min<std::size_t>(d, pool.size());

  // compensation for the sub-rankings never consumed
  int min_sub_dist = order.front().dist;
  double sub_all = 0.0, sub_kept = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    double w = std::pow(mal.phi, order[i].dist - min_sub_dist);
    sub_all += w;
    if (i < consumed) sub_kept += w;
  }
  // compensation for pool modals left out of the proposal set
  int min_modal_dist = pool.front().dist;
  double modal_all = 0.0, modal_kept = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    double w = std::pow(mal.phi, pool[i].dist - min_modal_dist);
    modal_all += w;
    if (i < chosen) modal_kept += w;
  }

  std::vector<Proposal> proposals;
  proposals.reserve(chosen);
  for (std::size_t i = 0; i < chosen; ++i)
    proposals.push_back({pool[i].r, mal.phi, order[pool[i].sub].psi,
                         1.0 / static_cast<double>(chosen)});

  e = mis_core(proposals, mal, n_per_proposal, rng, opts.sample_check);
  e.comp_subranking = sub_all / sub_kept;
  e.comp_modal = modal_all / modal_kept;
  // the compensations assume the pruned components hold distinct mass; on
  // near-certain unions that overcounts, so cap at a valid probability
  e.value = std::min(e.uncompensated * e.comp_subranking * e.comp_modal, 1.0);
  return e;
}

Estimate mis_amp_adaptive(const PatternUnion& g, const LabeledModel& model,
                          int delta_d, double epsilon,
                          std::uint64_t n_per_proposal, std::mt19937_64& rng,
                          const MisOptions& opts) {
  if (delta_d < 1) throw Error("proposal increment must be positive");
  if (!(epsilon > 0.0)) throw Error("convergence threshold must be positive");

  double prev = 0.0;
  std::uint64_t total_samples = 0;
  for (int d = delta_d;; d += delta_d) {
    Estimate e = mis_amp_lite(g, model, d, n_per_proposal, rng, opts);
    total_samples += e.samples_used;
    bool exhausted = e.proposals_used < d;
    double rel = std::abs(e.value - prev) / std::max(e.value, 1e-300);
    e.samples_used = total_samples;
    if (exhausted || rel < epsilon) return e;
    prev = e.value;
  }
}

}  // namespace prefdb

#pragma once

#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "prefdb/labels.hpp"
#include "prefdb/ranking.hpp"

namespace prefdb {

// Lower-triangular insertion probabilities: at(i, j) is the probability of
// placing the i-th reference item at position j, for 1 <= j <= i.  Every
// row sums to one.
class InsertionMatrix {
 public:
  InsertionMatrix() = default;
  // rows[i-1] holds row i (length i).
  explicit InsertionMatrix(std::vector<std::vector<double>> rows);

  int size() const { return static_cast<int>(rows_.size()); }
  double at(int i, int j) const { return rows_[i - 1][j - 1]; }
  double log_at(int i, int j) const { return log_rows_[i - 1][j - 1]; }

 private:
  std::vector<std::vector<double>> rows_;
  std::vector<std::vector<double>> log_rows_;
};

// Repeated-insertion model: items of sigma are inserted in reference order,
// the i-th at a position drawn from row i of pi.
struct RimModel {
  Ranking sigma;
  InsertionMatrix pi;

  RimModel() = default;
  RimModel(Ranking sigma, InsertionMatrix pi);
  int size() const { return sigma.size(); }
};

// Mallows distribution: Pr(t) ∝ phi^kendall_tau(sigma, t), phi in [0, 1].
// phi = 0 is the point mass on sigma, phi = 1 the uniform distribution.
struct MallowsModel {
  Ranking sigma;
  double phi = 1.0;

  MallowsModel() = default;
  MallowsModel(Ranking sigma, double phi);
  int size() const { return sigma.size(); }
};

// The RIM instance equivalent to mal: pi(i, j) = phi^(i-j) / (1 + phi + ... +
// phi^(i-1)).
RimModel mallows_to_rim(const MallowsModel& mal);

// log of the Mallows normalization constant over m items.
double mallows_log_z(int m, double phi);

// Uniform double in [0, 1) built from the top 53 bits of the generator, so
// sampling never depends on library-specific distribution internals.
double next_unit(std::mt19937_64& rng);

// One draw from the model; identical seeds yield identical sequences.
Ranking rim_sample(const RimModel& rim, std::mt19937_64& rng);

// Probability of the complete ranking t (same item set as sigma).  The
// insertion trajectory producing t is unique, so this is a single product.
double rim_prob(const RimModel& rim, const Ranking& t);
double rim_log_prob(const RimModel& rim, const Ranking& t);

double mallows_prob(const MallowsModel& mal, const Ranking& t);
double mallows_log_prob(const MallowsModel& mal, const Ranking& t);

// Constrained insertion sampler: draws a ranking consistent with the
// partial order u by restricting each insertion to the positions allowed by
// the transitive closure of u.  Requires phi > 0 when u is nonempty (every
// consistent ranking must stay reachable).  Returns the sample and the log
// of its proposal probability.
std::pair<Ranking, double> amp_sample(const MallowsModel& mal, const PartialOrder& u,
                                      std::mt19937_64& rng);

// Probability that amp_sample returns t.  Zero when t violates u.
double amp_prob(const MallowsModel& mal, const PartialOrder& u, const Ranking& t);
double amp_log_prob(const MallowsModel& mal, const PartialOrder& u, const Ranking& t);

// A ranking model over labeled items.  Construction from a Mallows model
// also materializes the equivalent RIM instance, which exact solvers use;
// sampling estimators require the Mallows form.
class LabeledModel {
 public:
  LabeledModel(MallowsModel mal, LabelingFunction lam);
  LabeledModel(RimModel rim, LabelingFunction lam);

  const RimModel& rim() const { return rim_; }
  const std::optional<MallowsModel>& mallows() const { return mallows_; }
  const LabelingFunction& labeling() const { return lam_; }
  const Ranking& sigma() const { return rim_.sigma; }
  int size() const { return rim_.size(); }

 private:
  RimModel rim_;
  std::optional<MallowsModel> mallows_;
  LabelingFunction lam_;
};

}  // namespace prefdb

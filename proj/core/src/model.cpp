#include "prefdb/model.hpp"

#include <cmath>
#include <limits>

#include "prefdb/error.hpp"

namespace prefdb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

double next_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

InsertionMatrix::InsertionMatrix(std::vector<std::vector<double>> rows)
    : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != i + 1)
      throw Error("insertion matrix row " + std::to_string(i + 1) + " must have " +
                  std::to_string(i + 1) + " entries");
    double sum = 0.0;
    for (double p : rows_[i]) {
      if (!(p >= 0.0)) throw Error("insertion probabilities must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error("insertion matrix row " + std::to_string(i + 1) +
                  " does not sum to one");
  }
  log_rows_.resize(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    log_rows_[i].resize(rows_[i].size());
    for (std::size_t j = 0; j < rows_[i].size(); ++j)
      log_rows_[i][j] = rows_[i][j] > 0.0 ? std::log(rows_[i][j]) : kNegInf;
  }
}

RimModel::RimModel(Ranking sigma_, InsertionMatrix pi_)
    : sigma(std::move(sigma_)), pi(std::move(pi_)) {
  if (pi.size() != sigma.size())
    throw Error("insertion matrix size does not match reference ranking");
}

MallowsModel::MallowsModel(Ranking sigma_, double phi_)
    : sigma(std::move(sigma_)), phi(phi_) {
  if (!(phi >= 0.0 && phi <= 1.0))
    throw Error("mallows dispersion must lie in [0, 1]");
}

RimModel mallows_to_rim(const MallowsModel& mal) {
  int m = mal.size();
  std::vector<std::vector<double>> rows(m);
  for (int i = 1; i <= m; ++i) {
    rows[i - 1].resize(i);
    double w = 1.0;  // phi^(i-j), filled from j = i downward
    double denom = 0.0;
    for (int j = i; j >= 1; --j) {
      rows[i - 1][j - 1] = w;
      denom += w;
      w *= mal.phi;
    }
    for (int j = 0; j < i; ++j) rows[i - 1][j] /= denom;
  }
  return RimModel(mal.sigma, InsertionMatrix(std::move(rows)));
}

double mallows_log_z(int m, double phi) {
  double log_z = 0.0;
  double h = 0.0;
  double term = 1.0;  // phi^(i-1)
  for (int i = 1; i <= m; ++i) {
    h += term;
    log_z += std::log(h);
    term *= phi;
  }
  return log_z;
}

Ranking rim_sample(const RimModel& rim, std::mt19937_64& rng) {
  int m = rim.size();
  std::vector<ItemId> cur;
  cur.reserve(m);
  for (int i = 1; i <= m; ++i) {
    double u = next_unit(rng);
    int j = i;
    double acc = 0.0;
    for (int cand = 1; cand <= i; ++cand) {
      acc += rim.pi.at(i, cand);
      if (u < acc) {
        j = cand;
        break;
      }
    }
    cur.insert(cur.begin() + (j - 1), rim.sigma.at(i));
  }
  return Ranking(std::move(cur));
}

namespace {

// Insertion position of the i-th reference item on the unique trajectory
// that builds t: its rank among the first i reference items.
int insertion_position(const RimModel& rim, const Ranking& t, int i) {
  int pos_i = t.rank_of(rim.sigma.at(i));
  int j = 1;
  for (int k = 1; k < i; ++k)
    if (t.rank_of(rim.sigma.at(k)) < pos_i) ++j;
  return j;
}

void require_same_items(const Ranking& sigma, const Ranking& t, const char* what) {
  if (t.size() != sigma.size())
    throw Error(std::string(what) + ": ranking does not cover the reference items");
  for (int i = 1; i <= sigma.size(); ++i)
    if (!t.contains(sigma.at(i)))
      throw Error(std::string(what) + ": ranking misses item " + sigma.at(i));
}

}  // namespace

double rim_log_prob(const RimModel& rim, const Ranking& t) {
  require_same_items(rim.sigma, t, "rim_prob");
  double log_p = 0.0;
  for (int i = 1; i <= rim.size(); ++i) {
    log_p += rim.pi.log_at(i, insertion_position(rim, t, i));
    if (log_p == kNegInf) return kNegInf;
  }
  return log_p;
}

double rim_prob(const RimModel& rim, const Ranking& t) {
  return std::exp(rim_log_prob(rim, t));
}

double mallows_log_prob(const MallowsModel& mal, const Ranking& t) {
  require_same_items(mal.sigma, t, "mallows_prob");
  int d = kendall_tau(mal.sigma, t);
  if (mal.phi == 0.0) return d == 0 ? 0.0 : kNegInf;
  return d * std::log(mal.phi) - mallows_log_z(mal.size(), mal.phi);
}

double mallows_prob(const MallowsModel& mal, const Ranking& t) {
  return std::exp(mallows_log_prob(mal, t));
}

namespace {

// Shared per-call state for the constrained insertion process.
struct AmpWalk {
  const MallowsModel& mal;
  std::vector<std::vector<int>> preds;  // per reference index, constraining indices
  std::vector<std::vector<int>> succs;

  AmpWalk(const MallowsModel& mal, const PartialOrder& u) : mal(mal) {
    if (mal.phi == 0.0 && !u.empty())
      throw Error("constrained insertion requires phi > 0");
    int m = mal.size();
    preds.resize(m + 1);
    succs.resize(m + 1);
    PartialOrder tc = transitive_closure(u);
    for (const auto& [a, b] : tc.pairs()) {
      int ia = mal.sigma.rank_of(a);
      int ib = mal.sigma.rank_of(b);
      if (ia == 0) throw Error("condition mentions unknown item " + a);
      if (ib == 0) throw Error("condition mentions unknown item " + b);
      preds[ib].push_back(ia);  // a must precede b
      succs[ia].push_back(ib);
    }
  }

  // Allowed insertion range at step i given 1-based positions of already
  // inserted items (0 = not inserted).  Nonempty for any acyclic condition.
  std::pair<int, int> range(int i, const std::vector<int>& pos) const {
    int lo = 1;
    int hi = i;
    for (int p : preds[i])
      if (pos[p] != 0) lo = std::max(lo, pos[p] + 1);
    for (int s : succs[i])
      if (pos[s] != 0) hi = std::min(hi, pos[s]);
    if (lo > hi) throw Error("constrained insertion range collapsed");
    return {lo, hi};
  }
};

}  // namespace

std::pair<Ranking, double> amp_sample(const MallowsModel& mal, const PartialOrder& u,
                                      std::mt19937_64& rng) {
  AmpWalk walk(mal, u);
  int m = mal.size();
  std::vector<int> cur;  // reference indices in current ranking order
  cur.reserve(m);
  std::vector<int> pos(m + 1, 0);
  double log_p = 0.0;
  for (int i = 1; i <= m; ++i) {
    auto [lo, hi] = walk.range(i, pos);
    // weights phi^(i-j) for j in [lo, hi], accumulated from the top
    double total = 0.0;
    double w = std::pow(mal.phi, i - hi);
    std::vector<double> weights(hi - lo + 1);
    for (int j = hi; j >= lo; --j) {
      weights[j - lo] = w;
      total += w;
      w *= mal.phi;
    }
    double ucut = next_unit(rng) * total;
    int j = hi;
    double acc = 0.0;
    for (int cand = lo; cand <= hi; ++cand) {
      acc += weights[cand - lo];
      if (ucut < acc) {
        j = cand;
        break;
      }
    }
    log_p += std::log(weights[j - lo] / total);
    cur.insert(cur.begin() + (j - 1), i);
    for (std::size_t k = 0; k < cur.size(); ++k) pos[cur[k]] = static_cast<int>(k) + 1;
  }
  std::vector<ItemId> order;
  order.reserve(m);
  for (int idx : cur) order.push_back(mal.sigma.at(idx));
  return {Ranking(std::move(order)), log_p};
}

double amp_log_prob(const MallowsModel& mal, const PartialOrder& u, const Ranking& t) {
  require_same_items(mal.sigma, t, "amp_prob");
  AmpWalk walk(mal, u);
  int m = mal.size();
  // rank_in_t[i]: position of reference item i in t
  std::vector<int> rank_in_t(m + 1);
  for (int i = 1; i <= m; ++i) rank_in_t[i] = t.rank_of(mal.sigma.at(i));
  std::vector<int> pos(m + 1, 0);  // positions within the partial trajectory
  double log_p = 0.0;
  for (int i = 1; i <= m; ++i) {
    // position item i takes among the first i reference items
    int j = 1;
    for (int k = 1; k < i; ++k)
      if (rank_in_t[k] < rank_in_t[i]) ++j;
    auto [lo, hi] = walk.range(i, pos);
    if (j < lo || j > hi) return kNegInf;  // t violates the condition
    double total = 0.0;
    double w = std::pow(mal.phi, i - hi);
    double chosen = 0.0;
    for (int cand = hi; cand >= lo; --cand) {
      if (cand == j) chosen = w;
      total += w;
      w *= mal.phi;
    }
    log_p += std::log(chosen / total);
    // replay the insertion to keep partial positions current
    for (int k = 1; k < i; ++k)
      if (pos[k] >= j) ++pos[k];
    pos[i] = j;
  }
  return log_p;
}

double amp_prob(const MallowsModel& mal, const PartialOrder& u, const Ranking& t) {
  return std::exp(amp_log_prob(mal, u, t));
}

LabeledModel::LabeledModel(MallowsModel mal, LabelingFunction lam)
    : rim_(mallows_to_rim(mal)), mallows_(std::move(mal)), lam_(std::move(lam)) {}

LabeledModel::LabeledModel(RimModel rim, LabelingFunction lam)
    : rim_(std::move(rim)), lam_(std::move(lam)) {}

}  // namespace prefdb

#pragma once

// Bio-inspired matching (BIM): one-to-one assignment between visual and
// auditory identity sets.
//
//   1. every row picks its cheapest column;
//   2. competition: rows that collide on a column bid for it, raising the
//      column's price until no collisions remain (forward auction);
//   3. exchange: matched pairs trade partners when that lowers the larger
//      of the two pair costs, which evens out individual costs.
//
// Rectangular problems are squared with virtual rows/columns priced at
// kCostMax so surplus identities stay unmatched.

#include "dpimap/common.hpp"
#include "dpimap/identity.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

namespace dpimap {

inline constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

class CostMatrix {
 public:
  CostMatrix() = default;

  // Pads `real` (rows x cols) to a square matrix with kCostMax virtual entries.
  explicit CostMatrix(const MatX& real)
      : real_rows_(static_cast<std::size_t>(real.rows())),
        real_cols_(static_cast<std::size_t>(real.cols())) {
    if (!real.allFinite()) throw InvalidInput("CostMatrix: costs must be finite");
    if (real.size() > 0 && real.minCoeff() < 0.0) {
      throw InvalidInput("CostMatrix: costs must be non-negative");
    }
    const auto n = static_cast<Eigen::Index>(std::max(real_rows_, real_cols_));
    entries_ = MatX::Constant(n, n, kCostMax);
    entries_.topLeftCorner(real.rows(), real.cols()) = real.cwiseMin(kCostMax);
  }

  std::size_t side() const { return static_cast<std::size_t>(entries_.rows()); }
  std::size_t real_rows() const { return real_rows_; }
  std::size_t real_cols() const { return real_cols_; }
  bool virtual_row(std::size_t i) const { return i >= real_rows_; }
  bool virtual_col(std::size_t j) const { return j >= real_cols_; }
  bool is_virtual(std::size_t i, std::size_t j) const { return virtual_row(i) || virtual_col(j); }
  bool empty() const { return side() == 0; }

  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const MatX& entries() const { return entries_; }

 private:
  MatX entries_;
  std::size_t real_rows_ = 0;
  std::size_t real_cols_ = 0;
};

struct MatchedPair {
  std::size_t visual = 0;
  std::size_t auditory = 0;
  double cost = 0.0;
  auto operator<=>(const MatchedPair&) const = default;
};

struct AssignmentResult {
  std::vector<MatchedPair> pairs;  // sorted by visual index
  std::vector<std::size_t> unmatched_visual;
  std::vector<std::size_t> unmatched_auditory;
  double f1 = 0.0;
  double f2 = 0.0;
  Eigen::MatrixXi assignment;  // K_v x K_a, 1 where matched

  // Diagnostics of the competition output before the exchange pass.
  double f1_before_exchange = 0.0;
  double f2_before_exchange = 0.0;
  double max_cost_before_exchange = 0.0;
  std::size_t bids = 0;
  std::size_t swaps = 0;

  double total_cost() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.cost;
    return s;
  }
  double max_cost() const {
    double m = 0.0;
    for (const auto& p : pairs) m = std::max(m, p.cost);
    return m;
  }
};

struct AuctionParams {
  double alpha = 1.0;     // competing rate: scales every bid increment
  double epsilon = 0.02;  // minimum bid increment; breaks equal-cost stalls
  // Run coarse-to-fine phases ending at `epsilon` to avoid long price wars.
  bool epsilon_scaling = true;
};

struct AuctionState {
  std::vector<double> prices;  // per column, nondecreasing
  std::vector<std::size_t> row_to_col;
  std::vector<std::size_t> col_to_row;
  std::deque<std::size_t> unassigned;
  std::size_t bids = 0;
  std::size_t phases = 0;
};

struct BimOptions {
  AuctionParams auction;
  SimilarityOptions similarity;
  bool exchange = true;
};

inline CostMatrix build_cost_matrix(const ObservationSet& vf_set, const ObservationSet& af_set,
                                    const WeightVector& w, const SimilarityOptions& opts = {}) {
  vf_set.validate();
  af_set.validate();
  const auto kv = static_cast<Eigen::Index>(vf_set.size());
  const auto ka = static_cast<Eigen::Index>(af_set.size());
  if (kv > 0 && ka > 0) {
    const auto& a = vf_set.identities.front().features;
    const auto& b = af_set.identities.front().features;
    if (a.size() != b.size()) throw InvalidInput("build_cost_matrix: feature schema mismatch");
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].dim() != b[k].dim()) {
        throw InvalidInput("build_cost_matrix: feature schema mismatch in slot " + std::to_string(k));
      }
    }
  }
  MatX real(kv, ka);
  for (Eigen::Index i = 0; i < kv; ++i) {
    for (Eigen::Index j = 0; j < ka; ++j) {
      real(i, j) = matching_cost(pairwise_similarity(vf_set.identities[static_cast<std::size_t>(i)],
                                                     af_set.identities[static_cast<std::size_t>(j)],
                                                     w, opts));
    }
  }
  return CostMatrix(real);
}

namespace detail {

// Cheapest column of row i under the given prices; ties go to the lowest index.
inline std::size_t best_column(const CostMatrix& c, const std::vector<double>& prices, std::size_t i) {
  std::size_t best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.side(); ++j) {
    const double v = c(i, j) + prices[j];
    if (v < best_v) {
      best_v = v;
      best = j;
    }
  }
  return best;
}

inline std::size_t bid_bound(std::size_t n, const AuctionParams& p) {
  const double per = kCostMax / (p.alpha * p.epsilon) + 1.0;
  const double bound = static_cast<double>(n) * static_cast<double>(n) * per;
  return bound >= static_cast<double>(std::numeric_limits<std::size_t>::max())
             ? std::numeric_limits<std::size_t>::max()
             : static_cast<std::size_t>(bound);
}

// One auction phase at increment `eps`, starting from the current prices.
inline void auction_phase(const CostMatrix& c, AuctionState& s, double alpha, double eps,
                          std::size_t bound) {
  const std::size_t n = c.side();
  s.row_to_col.assign(n, kUnassigned);
  s.col_to_row.assign(n, kUnassigned);
  s.unassigned.clear();
  ++s.phases;

  // Rows whose favourite column is uncontested take it without bidding.
  std::vector<std::size_t> pick(n);
  std::vector<std::size_t> demand(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    pick[i] = best_column(c, s.prices, i);
    ++demand[pick[i]];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (demand[pick[i]] == 1) {
      s.row_to_col[i] = pick[i];
      s.col_to_row[pick[i]] = i;
    } else {
      s.unassigned.push_back(i);
    }
  }

  while (!s.unassigned.empty()) {
    if (++s.bids > bound) {
      throw InternalError("auction exceeded its bid bound (" + std::to_string(bound) + ")");
    }
    const std::size_t i = s.unassigned.front();
    s.unassigned.pop_front();

    std::size_t j1 = 0;
    double v1 = std::numeric_limits<double>::infinity();
    double v2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double v = c(i, j) + s.prices[j];
      if (v < v1) {
        v2 = v1;
        v1 = v;
        j1 = j;
      } else if (v < v2) {
        v2 = v;
      }
    }
    if (n == 1) v2 = v1;

    s.prices[j1] += alpha * (v2 - v1 + eps);
    const std::size_t holder = s.col_to_row[j1];
    if (holder != kUnassigned) {
      s.row_to_col[holder] = kUnassigned;
      s.unassigned.push_back(holder);
    }
    s.row_to_col[i] = j1;
    s.col_to_row[j1] = i;
  }
}

inline double population_std(const std::vector<double>& xs, double mean) {
  if (xs.empty()) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

inline std::pair<double, double> f1_f2(const std::vector<double>& costs) {
  if (costs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(costs.begin(), costs.end(), 0.0) / static_cast<double>(costs.size());
  return {mean, population_std(costs, mean)};
}

}  // namespace detail

// Per-row cheapest column at zero prices (ties -> lowest column index).
inline std::vector<std::size_t> initial_match(const CostMatrix& c) {
  const std::vector<double> zero(c.side(), 0.0);
  std::vector<std::size_t> out(c.side());
  for (std::size_t i = 0; i < c.side(); ++i) out[i] = detail::best_column(c, zero, i);
  return out;
}

// Columns claimed by more than one row in `picks`, each with its claimants.
inline std::vector<std::pair<std::size_t, std::vector<std::size_t>>> conflict_sets(
    const std::vector<std::size_t>& picks, std::size_t side) {
  std::vector<std::vector<std::size_t>> by_col(side);
  for (std::size_t i = 0; i < picks.size(); ++i) by_col[picks[i]].push_back(i);
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> out;
  for (std::size_t j = 0; j < side; ++j) {
    if (by_col[j].size() > 1) out.emplace_back(j, std::move(by_col[j]));
  }
  return out;
}

// Competition step. Returns the conflict-free row -> column assignment of the
// padded matrix; `state` keeps prices and counters for inspection.
inline std::vector<std::size_t> resolve_conflicts(const CostMatrix& c, AuctionState& state,
                                                  const AuctionParams& params = {}) {
  if (!(params.alpha > 0.0) || !(params.epsilon > 0.0)) {
    throw InvalidInput("resolve_conflicts: alpha and epsilon must be > 0");
  }
  const std::size_t n = c.side();
  if (state.prices.size() != n) state.prices.assign(n, 0.0);
  if (n == 0) return {};
  const std::size_t bound = detail::bid_bound(n, params);

  const auto picks = initial_match(c);
  const bool conflicted = !conflict_sets(picks, n).empty();
  if (conflicted && params.epsilon_scaling) {
    const double spread = c.entries().maxCoeff() - c.entries().minCoeff();
    double eps = spread / 5.0;
    while (eps > params.epsilon) {
      detail::auction_phase(c, state, params.alpha, eps, bound);
      eps /= 5.0;
    }
  }
  detail::auction_phase(c, state, params.alpha, params.epsilon, bound);
  return state.row_to_col;
}

// Cost-balancing exchange. Repeatedly takes the most expensive pair (i, j)
// that has a partner (p, q) with c(i,j) >= max(c(i,q), c(p,j)) and swaps with
// the partner minimising that max. A swap must strictly lower the larger of
// the two pair costs and must raise neither the mean (f1) nor the spread
// (f2) of the pair costs.
inline std::vector<MatchedPair> exchange_pass(const CostMatrix& c, std::vector<MatchedPair> pairs,
                                              std::size_t* swaps = nullptr) {
  auto costs_of = [](const std::vector<MatchedPair>& ps) {
    std::vector<double> out;
    out.reserve(ps.size());
    for (const auto& p : ps) out.push_back(p.cost);
    return out;
  };
  std::size_t executed = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (pairs[a].cost != pairs[b].cost) return pairs[a].cost > pairs[b].cost;
      return pairs[a].visual < pairs[b].visual;
    });
    const double f2_now = detail::f1_f2(costs_of(pairs)).second;

    for (std::size_t a : order) {
      const auto [i, j, cij] = std::tuple(pairs[a].visual, pairs[a].auditory, pairs[a].cost);
      std::size_t best = kUnassigned;
      double best_max = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < pairs.size(); ++b) {
        if (b == a) continue;
        const std::size_t p = pairs[b].visual;
        const std::size_t q = pairs[b].auditory;
        const double new_max = std::max(c(i, q), c(p, j));
        const double old_max = std::max(cij, pairs[b].cost);
        if (!(cij >= new_max) || !(new_max < old_max)) continue;
        if (c(i, q) + c(p, j) > cij + pairs[b].cost) continue;
        auto trial = pairs;
        trial[a] = {i, q, c(i, q)};
        trial[b] = {p, j, c(p, j)};
        if (detail::f1_f2(costs_of(trial)).second > f2_now) continue;
        if (new_max < best_max || (new_max == best_max && p < pairs[best].visual)) {
          best_max = new_max;
          best = b;
        }
      }
      if (best != kUnassigned) {
        const std::size_t p = pairs[best].visual;
        const std::size_t q = pairs[best].auditory;
        pairs[a] = {i, q, c(i, q)};
        pairs[best] = {p, j, c(p, j)};
        ++executed;
        changed = true;
        break;  // rescan from the most expensive pair
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  if (swaps != nullptr) *swaps = executed;
  return pairs;
}

namespace detail {

inline AssignmentResult finish_result(const CostMatrix& c, std::vector<MatchedPair> pairs) {
  AssignmentResult r;
  std::sort(pairs.begin(), pairs.end());
  r.pairs = std::move(pairs);
  const auto kv = c.real_rows();
  const auto ka = c.real_cols();
  r.assignment = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(kv), static_cast<Eigen::Index>(ka));
  std::vector<bool> row_used(kv, false), col_used(ka, false);
  std::vector<double> costs;
  for (const auto& p : r.pairs) {
    row_used[p.visual] = true;
    col_used[p.auditory] = true;
    r.assignment(static_cast<Eigen::Index>(p.visual), static_cast<Eigen::Index>(p.auditory)) = 1;
    costs.push_back(p.cost);
  }
  for (std::size_t i = 0; i < kv; ++i) {
    if (!row_used[i]) r.unmatched_visual.push_back(i);
  }
  for (std::size_t j = 0; j < ka; ++j) {
    if (!col_used[j]) r.unmatched_auditory.push_back(j);
  }
  std::tie(r.f1, r.f2) = f1_f2(costs);
  return r;
}

}  // namespace detail

// Full BIM on a prepared cost matrix. Pairs whose cost saturates at
// kCostMax carry no evidence and are reported as unmatched.
inline AssignmentResult bim_match(const CostMatrix& c, const BimOptions& opts = {}) {
  AuctionState state;
  const auto row_to_col = resolve_conflicts(c, state, opts.auction);

  std::vector<MatchedPair> pairs;
  for (std::size_t i = 0; i < row_to_col.size(); ++i) {
    const std::size_t j = row_to_col[i];
    if (c.is_virtual(i, j) || c(i, j) >= kCostMax) continue;
    pairs.push_back({i, j, c(i, j)});
  }
  std::vector<double> before;
  for (const auto& p : pairs) before.push_back(p.cost);
  const auto [f1b, f2b] = detail::f1_f2(before);

  std::size_t swaps = 0;
  if (opts.exchange) pairs = exchange_pass(c, std::move(pairs), &swaps);

  auto r = detail::finish_result(c, std::move(pairs));
  r.f1_before_exchange = f1b;
  r.f2_before_exchange = f2b;
  r.max_cost_before_exchange = before.empty() ? 0.0 : *std::max_element(before.begin(), before.end());
  r.bids = state.bids;
  r.swaps = swaps;
  return r;
}

inline AssignmentResult bim_match(const ObservationSet& vf_set, const ObservationSet& af_set,
                                  const WeightVector& w, const BimOptions& opts = {}) {
  return bim_match(build_cost_matrix(vf_set, af_set, w, opts.similarity), opts);
}

enum class MatchObjective { kSum, kSumPlusStd };

// Exhaustive search over every one-to-one assignment of size min(K_v, K_a).
// Test oracle; limited to min(K_v, K_a) <= 8.
inline AssignmentResult brute_force_match(const CostMatrix& c, MatchObjective objective) {
  const std::size_t kv = c.real_rows();
  const std::size_t ka = c.real_cols();
  const std::size_t n = std::min(kv, ka);
  if (n > 8) throw InvalidInput("brute_force_match: min(K_v, K_a) must be <= 8");

  const bool rows_small = kv <= ka;
  const std::size_t big = rows_small ? ka : kv;
  std::vector<std::size_t> choice(n);
  std::vector<bool> used(big, false);
  std::vector<MatchedPair> best;
  double best_obj = std::numeric_limits<double>::infinity();

  auto evaluate = [&]() {
    std::vector<MatchedPair> ps;
    ps.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t i = rows_small ? s : choice[s];
      const std::size_t j = rows_small ? choice[s] : s;
      ps.push_back({i, j, c(i, j)});
    }
    std::sort(ps.begin(), ps.end());
    std::vector<double> costs;
    for (const auto& p : ps) costs.push_back(p.cost);
    const auto [f1, f2] = detail::f1_f2(costs);
    const double obj = objective == MatchObjective::kSum ? f1 : f1 + f2;
    if (obj < best_obj || (obj == best_obj && ps < best)) {
      best_obj = obj;
      best = std::move(ps);
    }
  };

  auto recurse = [&](auto&& self, std::size_t s) -> void {
    if (s == n) {
      evaluate();
      return;
    }
    for (std::size_t k = 0; k < big; ++k) {
      if (used[k]) continue;
      used[k] = true;
      choice[s] = k;
      self(self, s + 1);
      used[k] = false;
    }
  };
  recurse(recurse, 0);
  return detail::finish_result(c, std::move(best));
}

}  // namespace dpimap

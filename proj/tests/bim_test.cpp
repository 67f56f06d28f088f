#include "dpimap/bim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace dpimap {
namespace {

MatX mat(std::initializer_list<std::initializer_list<double>> rows) {
  MatX m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

MatX random_costs(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatX m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = 1.0 / (1.0 - u(rng));  // 1 / U(0,1]
  }
  return m;
}

// Independent oracle: minimum total cost over all permutations of a square matrix.
double permutation_min_sum(const MatX& m) {
  std::vector<int> perm(static_cast<std::size_t>(m.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i) s += m(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void expect_one_to_one(const AssignmentResult& r) {
  std::set<std::size_t> rows, cols;
  for (const auto& p : r.pairs) {
    EXPECT_TRUE(rows.insert(p.visual).second);
    EXPECT_TRUE(cols.insert(p.auditory).second);
  }
}

TEST(CostMatrixTest, BuildFromSimilarities) {
  ObservationSet vf, af;
  vf.domain = Domain::kVisual;
  af.domain = Domain::kAuditory;
  // slot similarities 1 on the diagonal, 0.1 off it (cos of the chosen angles)
  const double off = std::acos(0.1);
  auto id = [](Domain d, double ang) {
    return PhysicalIdentity{{FeatureVector{std::cos(ang), std::sin(ang)}}, d, 0};
  };
  vf.identities = {id(Domain::kVisual, 0.0), id(Domain::kVisual, off)};
  af.identities = {id(Domain::kAuditory, 0.0), id(Domain::kAuditory, off)};
  af.digital_ids = {{10}, {11}};
  const auto c = build_cost_matrix(vf, af, uniform_weights(1));
  ASSERT_EQ(c.side(), 2u);
  EXPECT_NEAR(c(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(c(0, 1), 10.0, 1e-9);
  EXPECT_NEAR(c(1, 0), 10.0, 1e-9);
  EXPECT_NEAR(c(1, 1), 1.0, 1e-12);

  const auto r = bim_match(vf, af, uniform_weights(1));
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].auditory, 0u);
  EXPECT_EQ(r.pairs[1].auditory, 1u);
  EXPECT_NEAR(r.f1, 1.0, 1e-12);
  EXPECT_NEAR(r.f2, 0.0, 1e-12);
}

TEST(CostMatrixTest, SchemaMismatch) {
  ObservationSet vf, af;
  vf.identities = {{{FeatureVector{1, 0}}, Domain::kVisual, 0}};
  af.domain = Domain::kAuditory;
  af.identities = {{{FeatureVector{1, 0, 0}}, Domain::kAuditory, 0}};
  af.digital_ids = {{1}};
  EXPECT_THROW(build_cost_matrix(vf, af, uniform_weights(1)), InvalidInput);
}

TEST(CostMatrixTest, PaddingRules) {
  const CostMatrix c(MatX::Constant(3, 2, 2.0));
  ASSERT_EQ(c.side(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(c.virtual_col(2));
    EXPECT_DOUBLE_EQ(c(i, 2), kCostMax);
  }
  EXPECT_FALSE(c.virtual_row(2));
  const CostMatrix e(MatX(0, 2));
  EXPECT_EQ(e.side(), 2u);
  EXPECT_TRUE(e.virtual_row(0));
  const CostMatrix empty{MatX(0, 0)};
  EXPECT_TRUE(empty.empty());
  EXPECT_TRUE(bim_match(empty).pairs.empty());
  EXPECT_THROW(CostMatrix(mat({{1.0, -1.0}})), InvalidInput);
}

TEST(InitialMatchTest, Examples) {
  EXPECT_EQ(initial_match(CostMatrix(mat({{1, 10}, {10, 1}}))), (std::vector<std::size_t>{0, 1}));
  const auto picks = initial_match(CostMatrix(mat({{1, 2}, {1.5, 5}})));
  EXPECT_EQ(picks, (std::vector<std::size_t>{0, 0}));
  const auto conflicts = conflict_sets(picks, 2);
  ASSERT_EQ(conflicts.size(), 1u);
  EXPECT_EQ(conflicts[0].first, 0u);
  EXPECT_EQ(conflicts[0].second, (std::vector<std::size_t>{0, 1}));
  // a virtual row (all kCostMax) prefers the lowest column
  const CostMatrix padded(mat({{3, 1, 2}, {1, 2, 3}}));
  EXPECT_EQ(initial_match(padded)[2], 0u);
}

TEST(ResolveConflictsTest, NoConflictKeepsZeroPrices) {
  AuctionState state;
  const auto a = resolve_conflicts(CostMatrix(mat({{1, 10}, {10, 1}})), state);
  EXPECT_EQ(a, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(state.prices, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(state.bids, 0u);
}

TEST(ResolveConflictsTest, ConflictingTwoByTwo) {
  // permutations: (0,0)+(1,1) = 6, (0,1)+(1,0) = 3.5
  ASSERT_DOUBLE_EQ(permutation_min_sum(mat({{1, 2}, {1.5, 5}})), 3.5);
  for (bool scaling : {false, true}) {
    AuctionState state;
    AuctionParams params;
    params.epsilon_scaling = scaling;
    const auto a = resolve_conflicts(CostMatrix(mat({{1, 2}, {1.5, 5}})), state, params);
    EXPECT_EQ(a, (std::vector<std::size_t>{1, 0}));
    EXPECT_GT(state.bids, 0u);
  }
}

TEST(ResolveConflictsTest, SingleEntry) {
  AuctionState state;
  EXPECT_EQ(resolve_conflicts(CostMatrix(mat({{7}})), state), (std::vector<std::size_t>{0}));
}

TEST(ResolveConflictsTest, RejectsBadParameters) {
  AuctionState state;
  AuctionParams p;
  p.epsilon = 0.0;
  EXPECT_THROW(resolve_conflicts(CostMatrix(mat({{1}})), state, p), InvalidInput);
  p.epsilon = 0.02;
  p.alpha = -1.0;
  EXPECT_THROW(resolve_conflicts(CostMatrix(mat({{1}})), state, p), InvalidInput);
}

TEST(ResolveConflictsTest, EpsilonOptimalAgainstPermutationOracle) {
  std::mt19937_64 rng(2024);
  const AuctionParams params;
  for (int t = 0; t < 1000; ++t) {
    const MatX m = random_costs(rng, 5, 5);
    const CostMatrix c(m);
    for (bool scaling : {true, false}) {
      AuctionState state;
      AuctionParams p = params;
      p.epsilon_scaling = scaling;
      const auto a = resolve_conflicts(c, state, p);
      double total = 0.0;
      std::set<std::size_t> cols(a.begin(), a.end());
      ASSERT_EQ(cols.size(), 5u);
      for (std::size_t i = 0; i < 5; ++i) total += c(i, a[i]);
      ASSERT_LE(total, permutation_min_sum(m) + 5 * params.alpha * params.epsilon + 1e-9);
    }
  }
}

TEST(ResolveConflictsTest, PricesNeverDecrease) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 50; ++t) {
    const CostMatrix c(random_costs(rng, 6, 4));
    AuctionState state;
    resolve_conflicts(c, state);
    for (double p : state.prices) EXPECT_GE(p, 0.0);
  }
}

TEST(ExchangePassTest, SwapLowersMaxAndSpread) {
  // rows i=0, p=1; cols j=0, q=1: c(i,j)=4, c(p,q)=1, c(i,q)=3, c(p,j)=2
  const CostMatrix c(mat({{4, 3}, {2, 1}}));
  std::size_t swaps = 0;
  const auto out = exchange_pass(c, {{0, 0, 4}, {1, 1, 1}}, &swaps);
  EXPECT_EQ(swaps, 1u);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (MatchedPair{0, 1, 3}));
  EXPECT_EQ(out[1], (MatchedPair{1, 0, 2}));
  // f1 stays 2.5; f2 drops from 1.5 to 0.5
  const auto before = detail::f1_f2({4, 1});
  const auto after = detail::f1_f2({3, 2});
  EXPECT_DOUBLE_EQ(before.first, 2.5);
  EXPECT_DOUBLE_EQ(after.first, 2.5);
  EXPECT_DOUBLE_EQ(before.second, 1.5);
  EXPECT_DOUBLE_EQ(after.second, 0.5);
}

TEST(ExchangePassTest, ConditionNotMet) {
  // c(i,j)=2, c(p,q)=1, c(i,q)=3, c(p,j)=1: 2 >= max(3,1) fails
  const CostMatrix c(mat({{2, 3}, {1, 1}}));
  std::size_t swaps = 0;
  const auto out = exchange_pass(c, {{0, 0, 2}, {1, 1, 1}}, &swaps);
  EXPECT_EQ(swaps, 0u);
  EXPECT_EQ(out[0].auditory, 0u);
}

TEST(ExchangePassTest, SinglePairUnchanged) {
  const CostMatrix c(mat({{5}}));
  const auto out = exchange_pass(c, {{0, 0, 5}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (MatchedPair{0, 0, 5}));
}

TEST(ExchangePassTest, NeverRaisesMaxOrSpread) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 500; ++t) {
    const CostMatrix c(random_costs(rng, 6, 6));
    // arbitrary starting permutation
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<MatchedPair> pairs;
    std::vector<double> before;
    for (std::size_t i = 0; i < 6; ++i) {
      pairs.push_back({i, perm[i], c(i, perm[i])});
      before.push_back(c(i, perm[i]));
    }
    const auto out = exchange_pass(c, pairs);
    std::vector<double> after;
    for (const auto& p : out) after.push_back(p.cost);
    ASSERT_LE(*std::max_element(after.begin(), after.end()), *std::max_element(before.begin(), before.end()));
    ASSERT_LE(detail::f1_f2(after).second, detail::f1_f2(before).second + 1e-12);
  }
}

TEST(BimMatchTest, AntiDiagonalExample) {
  const auto r = bim_match(CostMatrix(mat({{1, 2}, {1.5, 5}})));
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0], (MatchedPair{0, 1, 2}));
  EXPECT_EQ(r.pairs[1], (MatchedPair{1, 0, 1.5}));
  EXPECT_DOUBLE_EQ(r.f1, 1.75);
  EXPECT_DOUBLE_EQ(r.f2, 0.25);
  EXPECT_EQ(r.assignment(0, 1), 1);
  EXPECT_EQ(r.assignment(0, 0), 0);
}

// Oracle: every injection of the 2 auditory identities into the 3 visual ones.
TEST(BimMatchTest, SurplusVisualIdentityUnmatched) {
  const MatX m = mat({{1.1, 9}, {8, 1.2}, {400, 300}});
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, int> arg;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      if (m(a, 0) + m(b, 1) < best) {
        best = m(a, 0) + m(b, 1);
        arg = {a, b};
      }
    }
  }
  ASSERT_EQ(arg, (std::pair<int, int>{0, 1}));
  const auto r = bim_match(CostMatrix(m));
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].auditory, 0u);
  EXPECT_EQ(r.pairs[1].auditory, 1u);
  EXPECT_EQ(r.unmatched_visual, (std::vector<std::size_t>{2}));
  EXPECT_TRUE(r.unmatched_auditory.empty());
}

TEST(BimMatchTest, UnmatchedCountsOnRectangles) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const int kv = 1 + static_cast<int>(rng() % 7);
    const int ka = 1 + static_cast<int>(rng() % 7);
    const auto r = bim_match(CostMatrix(random_costs(rng, kv, ka)));
    expect_one_to_one(r);
    ASSERT_EQ(r.pairs.size(), static_cast<std::size_t>(std::min(kv, ka)));
    ASSERT_EQ(r.unmatched_visual.size() + r.unmatched_auditory.size(),
              static_cast<std::size_t>(std::abs(kv - ka)));
    for (const auto& p : r.pairs) {
      ASSERT_LT(p.visual, static_cast<std::size_t>(kv));
      ASSERT_LT(p.auditory, static_cast<std::size_t>(ka));
    }
  }
}

TEST(BimMatchTest, SaturatedPairsAreDropped) {
  const auto r = bim_match(CostMatrix(mat({{1, kCostMax}, {kCostMax, kCostMax}})));
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.unmatched_visual, (std::vector<std::size_t>{1}));
  EXPECT_EQ(r.unmatched_auditory, (std::vector<std::size_t>{1}));
}

TEST(BimMatchTest, Deterministic) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    const CostMatrix c(random_costs(rng, 7, 5));
    const auto a = bim_match(c);
    const auto b = bim_match(c);
    ASSERT_EQ(a.pairs, b.pairs);
    ASSERT_EQ(a.f1, b.f1);
  }
}

TEST(BimMatchTest, ScaleCovariance) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 300; ++t) {
    const MatX m = random_costs(rng, 5, 5);
    const auto base = bim_match(CostMatrix(m));
    for (double lambda : {0.5, 2.0, 4.0}) {
      BimOptions opts;
      opts.auction.epsilon *= lambda;
      const auto scaled = bim_match(CostMatrix(m * lambda), opts);
      ASSERT_EQ(base.pairs.size(), scaled.pairs.size());
      for (std::size_t k = 0; k < base.pairs.size(); ++k) {
        ASSERT_EQ(base.pairs[k].visual, scaled.pairs[k].visual);
        ASSERT_EQ(base.pairs[k].auditory, scaled.pairs[k].auditory);
      }
    }
  }
}

TEST(BruteForceMatchTest, Examples) {
  auto r = brute_force_match(CostMatrix(mat({{1, 10}, {10, 1}})), MatchObjective::kSum);
  EXPECT_EQ(r.pairs[0].auditory, 0u);
  EXPECT_DOUBLE_EQ(r.f1, 1.0);
  r = brute_force_match(CostMatrix(mat({{1, 2}, {1.5, 5}})), MatchObjective::kSum);
  EXPECT_DOUBLE_EQ(r.total_cost(), 3.5);
  MatX d = MatX::Constant(3, 3, 100.0);
  d.diagonal().setOnes();
  r = brute_force_match(CostMatrix(d), MatchObjective::kSumPlusStd);
  for (const auto& p : r.pairs) EXPECT_EQ(p.visual, p.auditory);
  EXPECT_THROW(brute_force_match(CostMatrix(MatX::Ones(9, 9)), MatchObjective::kSum), InvalidInput);
}

TEST(BruteForceMatchTest, AgreesWithPermutationOracle) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 200; ++t) {
    const MatX m = random_costs(rng, 5, 5);
    ASSERT_NEAR(brute_force_match(CostMatrix(m), MatchObjective::kSum).total_cost(), permutation_min_sum(m),
                1e-9);
  }
}

TEST(BruteForceMatchTest, TiesResolveLexicographically) {
  const auto r = brute_force_match(CostMatrix(MatX::Ones(3, 3)), MatchObjective::kSum);
  for (const auto& p : r.pairs) EXPECT_EQ(p.visual, p.auditory);
}

TEST(BimMatchTest, ExchangeTradesMeanForSpread) {
  std::mt19937_64 rng(44);
  for (int t = 0; t < 300; ++t) {
    const auto r = bim_match(CostMatrix(random_costs(rng, 5, 5)));
    ASSERT_LE(r.max_cost(), r.max_cost_before_exchange);
    ASSERT_LE(r.f2, r.f2_before_exchange + 1e-12);
  }
}

}  // namespace
}  // namespace dpimap

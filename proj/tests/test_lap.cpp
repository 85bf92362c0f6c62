#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "immiscible/errors.hpp"
#include "immiscible/lap.hpp"

using namespace immiscible;

namespace {

CostMatrix random_costs(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, n);
  for (double& v : m.values()) v = u(rng);
  return CostMatrix(std::move(m));
}

// Minimum assignment cost by dynamic programming over subsets of used columns.
double subset_dp_min(const CostMatrix& c) {
  const std::size_t n = c.n();
  std::vector<double> best(std::size_t{1} << n, std::numeric_limits<double>::infinity());
  best[0] = 0.0;
  for (std::size_t mask = 0; mask < best.size(); ++mask) {
    const std::size_t row = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (row >= n) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask & (std::size_t{1} << j)) continue;
      auto& next = best[mask | (std::size_t{1} << j)];
      next = std::min(next, best[mask] + c(row, j));
    }
  }
  return best.back();
}

}  // namespace

TEST(Lap, IdentityWhenDiagonalIsZero) {
  const auto a = solve_lap(CostMatrix(from_rows({{0, 1}, {1, 0}})));
  EXPECT_EQ(a.perm, (std::vector<int>{0, 1}));
  EXPECT_EQ(a.total_cost, 0.0);
}

TEST(Lap, ForcedSwap) {
  const auto a = solve_lap(CostMatrix(from_rows({{5, 4}, {4, 5}})));
  EXPECT_EQ(a.perm, (std::vector<int>{1, 0}));
  EXPECT_EQ(a.total_cost, 8.0);
}

TEST(Lap, BruteForceSingleElement) {
  const auto a = brute_force_lap(CostMatrix(from_rows({{0}})));
  EXPECT_EQ(a.perm, (std::vector<int>{0}));
  EXPECT_EQ(a.total_cost, 0.0);
}

TEST(Lap, BruteForceTieIsLexicographicallySmallest) {
  const auto a = brute_force_lap(CostMatrix(from_rows({{1, 2}, {3, 4}})));
  EXPECT_EQ(a.perm, (std::vector<int>{0, 1}));
  EXPECT_EQ(a.total_cost, 5.0);
}

TEST(Lap, TiesPreferLowestColumn) {
  const auto a = solve_lap(CostMatrix(Matrix(4, 4, 1.0)));
  EXPECT_EQ(a.perm, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Lap, RandomSixBySixMatchesBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = random_costs(6, rng);
    const auto fast = solve_lap(c);
    const auto slow = brute_force_lap(c);
    ASSERT_TRUE(is_permutation_of_range(fast.perm));
    ASSERT_EQ(fast.total_cost, slow.total_cost) << "trial " << trial;
  }
}

TEST(Lap, SevenBySevenAgreesWithBruteForce) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_costs(7, rng);
    EXPECT_EQ(solve_lap(c).total_cost, brute_force_lap(c).total_cost);
  }
}

TEST(Lap, BruteForceMatchesSubsetDp) {
  std::mt19937_64 rng(3);
  for (std::size_t n = 1; n <= 8; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto c = random_costs(n, rng);
      const auto a = brute_force_lap(c);
      EXPECT_NEAR(a.total_cost, subset_dp_min(c), 1e-12);
      EXPECT_EQ(a.total_cost, permutation_cost(c, a.perm));
    }
  }
}

TEST(Lap, LargerInstancesMatchSubsetDp) {
  std::mt19937_64 rng(5);
  for (std::size_t n : {12, 15}) {
    const auto c = random_costs(n, rng);
    EXPECT_NEAR(solve_lap(c).total_cost, subset_dp_min(c), 1e-12);
  }
}

TEST(Lap, NeverWorseThanIdentityOrRandomPermutations) {
  std::mt19937_64 rng(19);
  for (std::size_t n : {3, 10, 50, 200}) {
    const auto c = random_costs(n, rng);
    const auto a = solve_lap(c);
    ASSERT_TRUE(is_permutation_of_range(a.perm));
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    EXPECT_LE(a.total_cost, permutation_cost(c, p));
    for (int k = 0; k < 100; ++k) {
      std::shuffle(p.begin(), p.end(), rng);
      EXPECT_LE(a.total_cost, permutation_cost(c, p) + 1e-12);
    }
  }
}

TEST(Lap, RowPermutationPermutesAssignment) {
  std::mt19937_64 rng(23);
  const std::size_t n = 30;
  const auto c = random_costs(n, rng);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const CostMatrix shuffled(gather_rows(c.matrix(), std::span<const int>(order)));

  const auto a = solve_lap(c);
  const auto b = solve_lap(shuffled);
  EXPECT_NEAR(a.total_cost, b.total_cost, 1e-12);
  // Continuous random costs have a unique optimum.
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(b.perm[i], a.perm[order[i]]);
}

TEST(Lap, Deterministic) {
  std::mt19937_64 rng(29);
  const auto c = random_costs(64, rng);
  EXPECT_EQ(solve_lap(c).perm, solve_lap(c).perm);
}

TEST(Lap, InvocationCounter) {
  const auto before = lap_invocations();
  solve_lap(CostMatrix(from_rows({{1}})));
  EXPECT_EQ(lap_invocations(), before + 1);
}

TEST(Lap, Errors) {
  EXPECT_THROW(CostMatrix(Matrix(2, 3)), DimensionError);
  EXPECT_THROW(CostMatrix(Matrix(0, 0)), DimensionError);
  EXPECT_THROW(CostMatrix(from_rows({{0, std::numeric_limits<double>::quiet_NaN()}, {1, 1}})),
               InvalidCostError);
  EXPECT_THROW(CostMatrix(from_rows({{0, std::numeric_limits<double>::infinity()}, {1, 1}})),
               InvalidCostError);
  EXPECT_THROW(CostMatrix(from_rows({{0, -1}, {1, 1}})), InvalidCostError);
  EXPECT_THROW(brute_force_lap(CostMatrix(Matrix(11, 11, 1.0))), SizeLimitError);
}

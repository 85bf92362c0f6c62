#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "immiscible/assign.hpp"
#include "immiscible/data.hpp"
#include "immiscible/errors.hpp"
#include "immiscible/rng.hpp"
#include "immiscible/stats.hpp"

using namespace immiscible;

namespace {

std::vector<std::vector<double>> sorted_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < m.rows(); ++i) rows.emplace_back(m.row(i).begin(), m.row(i).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

double l2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

NoiseBatch noise_sampler(std::size_t n, std::size_t d, std::uint64_t seed) {
  return sample_noise(n, d, seed);
}

// E[(N - k)+] for N ~ Binomial(n, 1/2).
double binomial_excess(int n, int k) {
  double total = 0.0;
  for (int j = k + 1; j <= n; ++j) {
    const double logp = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) -
                        n * std::log(2.0);
    total += (j - k) * std::exp(logp);
  }
  return total;
}

}  // namespace

TEST(Assign, NearestPairingIsForced) {
  const Batch data(from_rows({{1, 0}, {-1, 0}}));
  const NoiseBatch noise(from_rows({{-0.9, 0}, {0.9, 0}}));
  const auto r = assign_noise(data, noise);
  EXPECT_EQ(r.noise, NoiseBatch(from_rows({{0.9, 0}, {-0.9, 0}})));
  EXPECT_EQ(r.assignment.perm, (std::vector<int>{1, 0}));
  EXPECT_NEAR(r.assignment.total_cost, 0.2, 1e-12);
  EXPECT_NEAR(r.stats.pre_cost * 2, 3.8, 1e-12);
  EXPECT_NEAR(r.stats.post_cost * 2, 0.2, 1e-12);
}

TEST(Assign, BatchOfOne) {
  const Batch data(from_rows({{0.3, -2}}));
  const NoiseBatch noise(from_rows({{1, 1}}));
  const auto r = assign_noise(data, noise);
  EXPECT_EQ(r.noise, noise);
  EXPECT_EQ(r.stats.reduction, 0.0);
}

TEST(Assign, FlippedMirrorCase) {
  const Batch data(from_rows({{1, 0}, {-1, 0}}));
  const NoiseBatch noise(from_rows({{0.9, 0}, {-0.9, 0}}));
  const auto r = assign_noise_flipped(data, noise);
  EXPECT_EQ(r.noise, NoiseBatch(from_rows({{-0.9, 0}, {0.9, 0}})));
  EXPECT_GT(r.stats.post_cost, r.stats.pre_cost);
}

TEST(Assign, ReverseOrderFlip) {
  // Reversed noise rows are (0, 0.9) and (0, -0.9); costs against the data tie
  // everywhere, so the identity (lowest column) pairing is kept.
  const Batch data(from_rows({{1, 0}, {-1, 0}}));
  const NoiseBatch noise(from_rows({{0.9, 0}, {-0.9, 0}}));
  const auto r = assign_noise_flipped(data, noise, {}, FlipKind::ReverseOrder);
  EXPECT_EQ(r.assignment.perm, (std::vector<int>{0, 1}));
}

TEST(Assign, MarginalPreservedInEveryMode) {
  for (int trial = 0; trial < 20; ++trial) {
    const Batch data(sample_noise(33, 5, 100 + trial));
    const NoiseBatch noise(sample_noise(33, 5, 200 + trial));
    for (AssignMode mode : {AssignMode::Vanilla, AssignMode::ImmiscibleL2, AssignMode::ImmiscibleL1,
                            AssignMode::ImmiscibleFlipped}) {
      const auto r = apply_assign_mode(mode, data, noise, {});
      EXPECT_EQ(sorted_rows(r.noise), sorted_rows(noise));
      EXPECT_EQ(r.noise, gather_rows(noise, std::span<const int>(r.assignment.perm)));
    }
  }
}

TEST(Assign, OptimalAgainstIdentityAndRandomPermutations) {
  std::mt19937_64 rng(4);
  for (AssignMode mode : {AssignMode::ImmiscibleL2, AssignMode::ImmiscibleL1}) {
    const Metric m = default_metric(mode);
    const Batch data(sample_noise(40, 8, 5));
    const NoiseBatch noise(sample_noise(40, 8, 6));
    const auto r = apply_assign_mode(mode, data, noise, {});
    EXPECT_LE(r.stats.post_cost, r.stats.pre_cost);
    EXPECT_LE(r.stats.reduction, 0.0);
    std::vector<int> p(40);
    std::iota(p.begin(), p.end(), 0);
    for (int k = 0; k < 100; ++k) {
      std::shuffle(p.begin(), p.end(), rng);
      EXPECT_LE(r.stats.post_cost,
                mean_pair_cost(data, gather_rows(noise, std::span<const int>(p)), m) + 1e-12);
    }
  }
}

TEST(Assign, VanillaLeavesNoiseAlone) {
  const Batch data(sample_noise(16, 3, 1));
  const NoiseBatch noise(sample_noise(16, 3, 2));
  const auto before = lap_invocations();
  const auto r = apply_assign_mode(AssignMode::Vanilla, data, noise, {});
  EXPECT_EQ(lap_invocations(), before);
  EXPECT_EQ(r.noise, noise);
  EXPECT_EQ(r.stats.reduction, 0.0);
}

TEST(Assign, Deterministic) {
  const Batch data(sample_noise(128, 16, 7));
  const NoiseBatch noise(sample_noise(128, 16, 8));
  EXPECT_EQ(assign_noise(data, noise).assignment.perm, assign_noise(data, noise).assignment.perm);
}

TEST(Assign, Errors) {
  EXPECT_THROW(assign_noise(Batch(2, 2), NoiseBatch(3, 2)), DimensionError);
  Batch bad(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(assign_noise(bad, NoiseBatch(2, 2)), NumericError);
}

TEST(Assign, ReductionAtImageScale) {
  const AssignOptions opts;
  std::vector<double> reductions;
  for (int trial = 0; trial < 3; ++trial) {
    const Batch data(sample_noise(512, 3072, 300 + trial));
    const NoiseBatch noise(sample_noise(512, 3072, 400 + trial));
    reductions.push_back(assign_noise(data, noise, opts).stats.reduction);
  }
  const double r = median(reductions);
  EXPECT_LT(r, -0.01);
  EXPECT_GT(r, -0.05);
}

TEST(Assign, QuantizedAssignmentCloseToFull) {
  const Batch data(sample_noise(256, 3072, 9));
  const NoiseBatch noise(sample_noise(256, 3072, 10));
  AssignOptions q;
  q.quantize = true;
  const auto full = assign_noise(data, noise);
  const auto half = assign_noise(data, noise, q);
  // Stats are always full precision, so post_cost re-costs the quantized plan.
  EXPECT_LE(std::abs(half.stats.post_cost - full.stats.post_cost) / full.stats.post_cost, 5e-3);
  EXPECT_GE(half.stats.post_cost, full.stats.post_cost);
}

TEST(Assign, FlippedIsAntiOptimalAtImageScale) {
  std::vector<double> gaps;
  for (int trial = 0; trial < 10; ++trial) {
    const Batch data(sample_noise(64, 3072, 500 + trial));
    const NoiseBatch noise(sample_noise(64, 3072, 600 + trial));
    const auto r = assign_noise_flipped(data, noise);
    gaps.push_back(r.stats.post_cost - r.stats.pre_cost);
  }
  EXPECT_GE(median(gaps), 0.0);
}

TEST(Assign, SweepShape) {
  const DataSource source = [](std::size_t n, std::uint64_t seed) {
    return Batch(sample_noise(n, 64, seed));
  };
  const std::vector<std::size_t> sizes = {8, 32};
  const auto rows = distance_reduction_sweep(source, sizes, {}, 4, 1);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& row : rows) {
    EXPECT_EQ(row.trials.size(), 4u);
    EXPECT_LT(row.reduction_median, 0.0);
  }
  EXPECT_THROW(distance_reduction_sweep(source, std::span<const std::size_t>(), {}, 4, 1),
               ArgumentError);
}

TEST(ConditionalWeights, SinglePointDataset) {
  const Batch data(from_rows({{0.5, 0.5}}));
  const std::vector<double> target = {0.5, 0.5};
  const auto curve = empirical_conditional_weights(target, data, noise_sampler, 100, 5, 1);
  for (std::size_t b = 0; b < 5; ++b) {
    if (curve.counts[b] > 0) EXPECT_EQ(curve.frequencies[b], 1.0);
  }
}

TEST(ConditionalWeights, TargetMustBeInData) {
  const Batch data(from_rows({{0, 0}, {1, 1}}));
  const std::vector<double> target = {2, 2};
  EXPECT_THROW(empirical_conditional_weights(target, data, noise_sampler, 100, 5, 1),
               ArgumentError);
  const std::vector<double> ok = {1, 1};
  EXPECT_THROW(empirical_conditional_weights(ok, data, noise_sampler, 99, 5, 1), ArgumentError);
}

TEST(ConditionalWeights, TwoPointPooledFrequencyMatchesBinomial) {
  // With the sources 10 apart, every optimal plan sends min(N, 32) of the N
  // left-half noise points to (-5, 0), so the pooled rate is
  // 1 - E[(N - 32)+] / 32 with N ~ Binomial(64, 1/2).
  Batch data(64, 2);
  for (std::size_t i = 0; i < 64; ++i) data(i, 0) = i < 32 ? -5.0 : 5.0;
  std::uint64_t left = 0, left_assigned = 0;
  std::uint64_t near = 0, near_assigned = 0;
  for (std::uint64_t round = 0; round < 1000; ++round) {
    const NoiseBatch noise = sample_noise(64, 2, derive_seed(77, Stream::Noise, round));
    const auto r = assign_noise(data, noise);
    for (std::size_t i = 0; i < 64; ++i) {
      const auto row = r.noise.row(i);
      const bool to_left = data(i, 0) < 0;
      if (row[0] < 0) {
        ++left;
        left_assigned += to_left;
      }
      if (std::hypot(row[0] + 5.0, row[1]) < 5.0) {
        ++near;
        near_assigned += to_left;
      }
    }
  }
  const double pooled = static_cast<double>(left_assigned) / static_cast<double>(left);
  const double expected = 1.0 - binomial_excess(64, 32) / 32.0;
  EXPECT_NEAR(pooled, expected, 0.006);
  EXPECT_GT(static_cast<double>(near_assigned) / static_cast<double>(near), 0.95);
}

TEST(ConditionalWeights, EightPointFrequencyFallsWithDistance) {
  Batch data(64, 2);
  const auto centers = gauss8_centers(2.0);
  for (std::size_t i = 0; i < 64; ++i) {
    data(i, 0) = centers[i % 8][0];
    data(i, 1) = centers[i % 8][1];
  }
  const auto curve =
      empirical_conditional_weights(centers[0], data, noise_sampler, 200, 10, 3);
  std::uint64_t total = 0;
  for (auto c : curve.counts) total += c;
  EXPECT_EQ(total, 200u * 64u);
  EXPECT_TRUE(std::is_sorted(curve.bucket_edges.begin(), curve.bucket_edges.end()));
  const auto centres = curve.bucket_centers();
  EXPECT_LE(spearman(centres, curve.frequencies), -0.5);
}

TEST(Stats, SpearmanAndMedian) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {10, 8, 8, 1};
  EXPECT_EQ(ranks(y), (std::vector<double>{4, 2.5, 2.5, 1}));
  const std::vector<double> inc = {0.1, 5, 7, 9};
  EXPECT_NEAR(spearman(x, inc), 1.0, 1e-15);
  // Pearson on ranks [1,2,3,4] vs [4,2.5,2.5,1] = -4.5 / sqrt(5 * 4.5).
  EXPECT_NEAR(spearman(x, y), -4.5 / std::sqrt(5.0 * 4.5), 1e-12);
}

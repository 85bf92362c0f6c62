#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "immiscible/cost.hpp"
#include "immiscible/lap.hpp"
#include "immiscible/matrix.hpp"

namespace immiscible {

enum class AssignMode { Vanilla, ImmiscibleL2, ImmiscibleL1, ImmiscibleFlipped };

AssignMode parse_assign_mode(std::string_view name);  // vanilla, immiscible_l2, immiscible_l1, immiscible_flipped
std::string to_string(AssignMode mode);

// Metric a mode uses when the caller does not override it.
Metric default_metric(AssignMode mode);

// How the flipped (non-OT) variant transforms noise before costing.
enum class FlipKind {
  Negate,        // n -> -n, coordinate-wise
  ReverseOrder,  // (n_0, ..., n_{d-1}) -> (n_{d-1}, ..., n_0)
};

struct AssignStats {
  double pre_cost = 0.0;   // mean cost(data_i, noise_i), identity pairing
  double post_cost = 0.0;  // mean cost(data_i, output_i)
  double reduction = 0.0;  // (post - pre) / pre
  double wall_ms = 0.0;    // cost matrix + solver only
};

struct AssignResult {
  NoiseBatch noise;  // row i is input row assignment.perm[i]
  Assignment assignment;
  AssignStats stats;
};

struct AssignOptions {
  Metric metric = Metric::L2;
  bool quantize = false;  // cost computed on binary16-rounded inputs
  std::size_t shards = 1;
};

// Reorders `noise` so that the total data-noise cost is minimal. Pair costs
// in the stats are always evaluated at full precision.
AssignResult assign_noise(const Batch& data, const NoiseBatch& noise, const AssignOptions& opts = {});

// Costs data against the flipped noise, then applies the resulting
// permutation to the original noise rows.
AssignResult assign_noise_flipped(const Batch& data, const NoiseBatch& noise,
                                  const AssignOptions& opts = {}, FlipKind flip = FlipKind::Negate);

// Dispatch on mode. Vanilla returns the noise unchanged and never calls the
// solver; the other modes use `opts` with the metric forced for L1/L2 modes
// unless `metric_override` is set.
AssignResult apply_assign_mode(AssignMode mode, const Batch& data, const NoiseBatch& noise,
                               AssignOptions opts, bool metric_override = false);

// Mean cost(data_i, noise_i) at full precision.
double mean_pair_cost(const Batch& data, const NoiseBatch& noise, Metric metric);

using DataSource = std::function<Batch(std::size_t n, std::uint64_t seed)>;
using NoiseSampler = std::function<NoiseBatch(std::size_t n, std::size_t d, std::uint64_t seed)>;

struct SweepRow {
  std::size_t batch_size = 0;
  double reduction_median = 0.0;  // fraction, negative when distances shrink
  double time_ms_median = 0.0;
  std::vector<AssignStats> trials;
};

// For every batch size: `trials` independent (data, noise) draws, each
// assigned with `opts`; reports medians across trials.
std::vector<SweepRow> distance_reduction_sweep(const DataSource& source,
                                               std::span<const std::size_t> batch_sizes,
                                               const AssignOptions& opts, std::size_t trials,
                                               std::uint64_t seed);

struct ConditionalWeightCurve {
  std::vector<double> bucket_edges;  // buckets + 1 increasing values
  std::vector<std::uint64_t> counts;    // noise points whose distance fell in the bucket
  std::vector<std::uint64_t> assigned;  // ... of which were assigned to the target
  std::vector<double> frequencies;      // assigned / counts (0 for empty buckets)
  std::size_t rounds = 0;

  std::vector<double> bucket_centers() const;
};

// Monte-Carlo estimate of how often a noise point at a given distance from
// `target` ends up paired with it. Every row of `data` equal to `target`
// counts as the target. Buckets hold equal numbers of observations.
ConditionalWeightCurve empirical_conditional_weights(std::span<const double> target,
                                                     const Batch& data, const NoiseSampler& sampler,
                                                     std::size_t rounds, std::size_t buckets,
                                                     std::uint64_t seed,
                                                     Metric metric = Metric::L2);

struct ConditionalObservation {
  double distance = 0.0;
  bool assigned = false;
};

// Raw per-noise-point observations behind empirical_conditional_weights.
std::vector<ConditionalObservation> conditional_observations(std::span<const double> target,
                                                             const Batch& data,
                                                             const NoiseSampler& sampler,
                                                             std::size_t rounds, std::uint64_t seed,
                                                             Metric metric = Metric::L2);

}  // namespace immiscible

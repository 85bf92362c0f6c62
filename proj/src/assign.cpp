#include "immiscible/assign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "immiscible/data.hpp"
#include "immiscible/errors.hpp"
#include "immiscible/rng.hpp"
#include "immiscible/stats.hpp"

namespace immiscible {
namespace {

double point_cost(std::span<const double> a, std::span<const double> b, Metric metric) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += metric == Metric::L1 ? std::fabs(diff) : diff * diff;
  }
  return metric == Metric::L2 ? std::sqrt(s) : s;
}

void validate_inputs(const Batch& data, const NoiseBatch& noise) {
  if (data.rows() != noise.rows() || data.cols() != noise.cols()) {
    throw DimensionError("data is " + std::to_string(data.rows()) + "x" +
                         std::to_string(data.cols()) + " but noise is " +
                         std::to_string(noise.rows()) + "x" + std::to_string(noise.cols()));
  }
  if (data.rows() == 0 || data.cols() == 0) throw DimensionError("empty batch");
  if (!data.all_finite()) throw NumericError("data batch contains non-finite values");
  if (!noise.all_finite()) throw NumericError("noise batch contains non-finite values");
}

AssignStats pairing_stats(const Batch& data, const NoiseBatch& before, const NoiseBatch& after,
                          Metric metric, double wall_ms) {
  AssignStats s;
  s.pre_cost = mean_pair_cost(data, before, metric);
  s.post_cost = mean_pair_cost(data, after, metric);
  s.reduction = s.pre_cost > 0.0 ? (s.post_cost - s.pre_cost) / s.pre_cost : 0.0;
  s.wall_ms = wall_ms;
  return s;
}

// Solve on `cost_noise` (possibly transformed) and apply to `noise`.
AssignResult solve_and_apply(const Batch& data, const NoiseBatch& cost_noise,
                             const NoiseBatch& noise, const AssignOptions& opts) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const CostMatrix cost = opts.quantize
                              ? pairwise_cost_half(data, cost_noise, opts.metric, opts.shards)
                              : sharded_pairwise_cost(data, cost_noise, opts.metric, opts.shards);
  Assignment assignment = solve_lap(cost);
  const double wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();

  NoiseBatch out = gather_rows(noise, std::span<const int>(assignment.perm));
  AssignStats stats = pairing_stats(data, noise, out, opts.metric, wall_ms);
  return {std::move(out), std::move(assignment), stats};
}

}  // namespace

AssignMode parse_assign_mode(std::string_view name) {
  if (name == "vanilla") return AssignMode::Vanilla;
  if (name == "immiscible_l2" || name == "immiscible") return AssignMode::ImmiscibleL2;
  if (name == "immiscible_l1") return AssignMode::ImmiscibleL1;
  if (name == "immiscible_flipped" || name == "flipped") return AssignMode::ImmiscibleFlipped;
  throw ArgumentError("unknown assign mode '" + std::string(name) + "'");
}

std::string to_string(AssignMode mode) {
  switch (mode) {
    case AssignMode::Vanilla:
      return "vanilla";
    case AssignMode::ImmiscibleL2:
      return "immiscible_l2";
    case AssignMode::ImmiscibleL1:
      return "immiscible_l1";
    case AssignMode::ImmiscibleFlipped:
      return "immiscible_flipped";
  }
  return "?";
}

Metric default_metric(AssignMode mode) {
  return mode == AssignMode::ImmiscibleL1 ? Metric::L1 : Metric::L2;
}

double mean_pair_cost(const Batch& data, const NoiseBatch& noise, Metric metric) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) total += point_cost(data.row(i), noise.row(i), metric);
  return total / static_cast<double>(data.rows());
}

AssignResult assign_noise(const Batch& data, const NoiseBatch& noise, const AssignOptions& opts) {
  validate_inputs(data, noise);
  return solve_and_apply(data, noise, noise, opts);
}

AssignResult assign_noise_flipped(const Batch& data, const NoiseBatch& noise,
                                  const AssignOptions& opts, FlipKind flip) {
  validate_inputs(data, noise);
  NoiseBatch flipped(noise.rows(), noise.cols());
  for (std::size_t i = 0; i < noise.rows(); ++i) {
    auto src = noise.row(i);
    auto dst = flipped.row(i);
    if (flip == FlipKind::Negate) {
      std::transform(src.begin(), src.end(), dst.begin(), [](double v) { return -v; });
    } else {
      std::reverse_copy(src.begin(), src.end(), dst.begin());
    }
  }
  return solve_and_apply(data, flipped, noise, opts);
}

AssignResult apply_assign_mode(AssignMode mode, const Batch& data, const NoiseBatch& noise,
                               AssignOptions opts, bool metric_override) {
  if (!metric_override) opts.metric = default_metric(mode);
  switch (mode) {
    case AssignMode::Vanilla: {
      validate_inputs(data, noise);
      AssignResult r{noise, {}, {}};
      r.assignment.perm.resize(noise.rows());
      std::iota(r.assignment.perm.begin(), r.assignment.perm.end(), 0);
      r.stats = pairing_stats(data, noise, noise, opts.metric, 0.0);
      r.assignment.total_cost = r.stats.pre_cost * static_cast<double>(noise.rows());
      return r;
    }
    case AssignMode::ImmiscibleL2:
    case AssignMode::ImmiscibleL1:
      return assign_noise(data, noise, opts);
    case AssignMode::ImmiscibleFlipped:
      return assign_noise_flipped(data, noise, opts);
  }
  throw ArgumentError("unhandled assign mode");
}

std::vector<SweepRow> distance_reduction_sweep(const DataSource& source,
                                               std::span<const std::size_t> batch_sizes,
                                               const AssignOptions& opts, std::size_t trials,
                                               std::uint64_t seed) {
  if (batch_sizes.empty()) throw ArgumentError("distance_reduction_sweep needs batch sizes");
  if (trials < 1) throw ArgumentError("distance_reduction_sweep needs trials >= 1");
  std::vector<SweepRow> rows;
  for (std::size_t bs : batch_sizes) {
    if (bs < 2) throw ArgumentError("batch sizes must be >= 2");
    SweepRow row;
    row.batch_size = bs;
    std::vector<double> reductions, times;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      const std::uint64_t trial_seed = derive_seed(seed, {bs, trial});
      const Batch data = source(bs, derive_seed(trial_seed, Stream::Data));
      const NoiseBatch noise = sample_noise(bs, data.cols(), derive_seed(trial_seed, Stream::Noise));
      const AssignResult r = assign_noise(data, noise, opts);
      row.trials.push_back(r.stats);
      reductions.push_back(r.stats.reduction);
      times.push_back(r.stats.wall_ms);
    }
    row.reduction_median = median(reductions);
    row.time_ms_median = median(times);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> ConditionalWeightCurve::bucket_centers() const {
  std::vector<double> c;
  for (std::size_t b = 0; b + 1 < bucket_edges.size(); ++b) {
    c.push_back(0.5 * (bucket_edges[b] + bucket_edges[b + 1]));
  }
  return c;
}

std::vector<ConditionalObservation> conditional_observations(std::span<const double> target,
                                                             const Batch& data,
                                                             const NoiseSampler& sampler,
                                                             std::size_t rounds, std::uint64_t seed,
                                                             Metric metric) {
  if (target.size() != data.cols()) throw DimensionError("target dimension differs from data");
  std::vector<char> is_target(data.rows(), 0);
  bool found = false;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto r = data.row(i);
    if (std::equal(r.begin(), r.end(), target.begin())) {
      is_target[i] = 1;
      found = true;
    }
  }
  if (!found) throw ArgumentError("target point is not a row of the data batch");
  if (rounds < 100) throw ArgumentError("conditional weight estimation needs rounds >= 100");

  std::vector<ConditionalObservation> obs;
  obs.reserve(rounds * data.rows());
  AssignOptions opts;
  opts.metric = metric;
  for (std::size_t round = 0; round < rounds; ++round) {
    const NoiseBatch noise = sampler(data.rows(), data.cols(), derive_seed(seed, Stream::Noise, round));
    const AssignResult r = assign_noise(data, noise, opts);
    // Noise originally at perm[i] now pairs with data row i.
    for (std::size_t i = 0; i < data.rows(); ++i) {
      const auto j = static_cast<std::size_t>(r.assignment.perm[i]);
      obs.push_back({point_cost(noise.row(j), target, Metric::L2), is_target[i] != 0});
    }
  }
  return obs;
}

ConditionalWeightCurve empirical_conditional_weights(std::span<const double> target,
                                                     const Batch& data, const NoiseSampler& sampler,
                                                     std::size_t rounds, std::size_t buckets,
                                                     std::uint64_t seed, Metric metric) {
  if (buckets < 1) throw ArgumentError("need at least one bucket");
  auto obs = conditional_observations(target, data, sampler, rounds, seed, metric);
  std::sort(obs.begin(), obs.end(),
            [](const auto& a, const auto& b) { return a.distance < b.distance; });

  ConditionalWeightCurve curve;
  curve.rounds = rounds;
  curve.counts.assign(buckets, 0);
  curve.assigned.assign(buckets, 0);
  curve.frequencies.assign(buckets, 0.0);
  const std::size_t total = obs.size();
  for (std::size_t b = 0; b <= buckets; ++b) {
    const std::size_t idx = std::min(total - 1, b * total / buckets);
    curve.bucket_edges.push_back(b == buckets ? obs.back().distance : obs[idx].distance);
  }
  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t b = std::min(buckets - 1, k * buckets / total);
    ++curve.counts[b];
    if (obs[k].assigned) ++curve.assigned[b];
  }
  for (std::size_t b = 0; b < buckets; ++b) {
    if (curve.counts[b] > 0) {
      curve.frequencies[b] = static_cast<double>(curve.assigned[b]) / static_cast<double>(curve.counts[b]);
    }
  }
  return curve;
}

}  // namespace immiscible

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "immiscible/assign.hpp"
#include "immiscible/config.hpp"
#include "immiscible/denoiser.hpp"
#include "immiscible/matrix.hpp"

namespace immiscible {

// Sliced 2-Wasserstein distance: sqrt of the mean, over `projections` random
// unit directions, of the squared 1-D W2 distance between the projected
// samples (sorted-sample matching). Both sets need the same size and d.
double sliced_wasserstein(const Matrix& a, const Matrix& b, std::size_t projections,
                          std::uint64_t seed);

struct MetricsRecord {
  std::size_t step = 0;
  double loss = 0.0;       // mean training loss since the previous record
  double swd = 0.0;        // generated vs fresh target samples
  double reduction = 0.0;  // mean assignment reduction since the previous record
  double wall_ms = 0.0;    // mean wall time per step (0 unless record_wall_time)
};

struct RunResult {
  std::vector<MetricsRecord> log;
  std::optional<Checkpoint> checkpoint;
  bool ok = true;
  std::string error;  // diagnostic when !ok
};

// CSV header and rows of metrics.csv.
inline constexpr const char* kMetricsHeader = "step,loss,swd,reduction,wall_ms";
void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> log);

using ProgressFn = std::function<void(const std::string&)>;

// One training run. When cfg.out_dir is set, writes metrics.csv,
// checkpoint.txt and run.meta there (and error.txt on divergence).
RunResult train_one(const TrainConfig& cfg, const ProgressFn& progress = {});

struct ModeSummary {
  AssignMode mode = AssignMode::Vanilla;
  double early_swd_median = 0.0;  // first evaluation
  double final_swd_median = 0.0;  // last evaluation
  std::optional<std::size_t> steps_to_threshold;
  std::optional<double> speedup_vs_vanilla;  // vanilla steps / this mode's steps
  std::size_t failed_runs = 0;
};

struct RunStatus {
  AssignMode mode = AssignMode::Vanilla;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double final_swd = 0.0;
};

struct CompareReport {
  std::vector<AssignMode> modes;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> eval_steps;
  std::vector<std::vector<double>> median_swd;  // [mode][eval]
  std::optional<double> threshold;              // vanilla median SWD at 60% of the steps
  std::optional<std::size_t> threshold_step;
  std::vector<ModeSummary> summaries;
  std::vector<RunStatus> runs;
};

// Runs train_one for every (mode, seed). Runs land in
// out_dir/<mode>_seed<seed>/ when base.out_dir is set, together with
// compare.csv and summary.csv.
CompareReport compare_modes(const TrainConfig& base, std::span<const AssignMode> modes,
                            std::span<const std::uint64_t> seeds, const ProgressFn& progress = {});

void write_compare_csv(std::ostream& out, const CompareReport& report);
void write_summary_csv(std::ostream& out, const CompareReport& report);

// assign-bench table: batch_size,reduction_pct_median,time_ms_median
inline constexpr const char* kAssignBenchHeader = "batch_size,reduction_pct_median,time_ms_median";
void write_assign_bench_csv(std::ostream& out, std::span<const SweepRow> rows);

void write_conditional_weights_csv(std::ostream& out, const ConditionalWeightCurve& curve);

// Data batch and target for the conditional-weight experiments.
//  - "two-point": batch/2 copies each of (-5, 0) and (5, 0); target (-5, 0).
//  - "eight-point": batch/8 copies of each Gauss8 centre at radius 2; target (2, 0).
struct WeightSetup {
  Batch data;
  std::vector<double> target;
};

WeightSetup conditional_weight_setup(std::string_view name, std::size_t batch);

}  // namespace immiscible

#include "immiscible/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include "immiscible/data.hpp"
#include "immiscible/diffusion.hpp"
#include "immiscible/errors.hpp"
#include "immiscible/rng.hpp"
#include "immiscible/stats.hpp"

namespace immiscible {

double sliced_wasserstein(const Matrix& a, const Matrix& b, std::size_t projections,
                          std::uint64_t seed) {
  if (a.cols() != b.cols()) {
    throw DimensionError("sliced_wasserstein: dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.cols()) + " differ");
  }
  if (a.rows() != b.rows() || a.rows() == 0) {
    throw DimensionError("sliced_wasserstein: sample sets need equal, nonzero sizes");
  }
  if (projections < 1) throw ArgumentError("sliced_wasserstein needs projections >= 1");

  const std::size_t n = a.rows(), d = a.cols();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> dir(d), pa(n), pb(n);
  double total = 0.0;
  for (std::size_t p = 0; p < projections; ++p) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : dir) {
        v = normal(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : dir) v /= norm;

    auto project = [&](const Matrix& m, std::vector<double>& out) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = m.row(i);
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += r[k] * dir[k];
        out[i] = s;
      }
      std::sort(out.begin(), out.end());
    };
    project(a, pa);
    project(b, pb);
    double w2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) w2 += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    total += w2 / static_cast<double>(n);
  }
  return std::sqrt(total / static_cast<double>(projections));
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> log) {
  out << kMetricsHeader << "\n";
  for (const auto& r : log) {
    out << r.step << ',' << format_real(r.loss) << ',' << format_real(r.swd) << ','
        << format_real(r.reduction) << ',' << format_real(r.wall_ms) << "\n";
  }
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  fn(out);
}

double evaluate_swd(const DenoiserModel& model, const TrainConfig& cfg,
                    const DiffusionSchedule& sched, const SamplerConfig& sampler, std::size_t step) {
  const Batch generated = sample(as_predictor(model), sched, sampler, cfg.eval_samples,
                                 ToyDataset::d, derive_seed(cfg.eval_seed, Stream::EvalNoise, step));
  const Batch target =
      sample_toy(cfg.dataset, cfg.eval_samples, derive_seed(cfg.eval_seed, Stream::EvalTarget, step));
  return sliced_wasserstein(generated, target, cfg.swd_projections,
                            derive_seed(cfg.eval_seed, Stream::EvalProjection, step));
}

}  // namespace

RunResult train_one(const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;

  const DiffusionSchedule sched = cfg.schedule();
  const SamplerConfig sampler = SamplerConfig::linear(cfg.sampler_steps, cfg.diffusion_steps);
  const std::size_t d = ToyDataset::d;
  DenoiserModel model =
      DenoiserModel::create(d, cfg.embed_dim, cfg.hidden_width, cfg.hidden_layers,
                            cfg.diffusion_steps, derive_seed(cfg.seed, Stream::Init));
  OptimizerState opt(model.param_count(), cfg.adam);
  AssignOptions aopts;
  aopts.metric = cfg.effective_metric();
  aopts.quantize = cfg.quantize;
  aopts.shards = cfg.shards;

  RunResult result;
  double loss_sum = 0.0, reduction_sum = 0.0, wall_sum = 0.0;
  std::size_t since = 0;
  std::vector<std::size_t> t(cfg.batch_size);

  try {
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
      const auto start = Clock::now();
      const Batch x0 = sample_toy(cfg.dataset, cfg.batch_size, derive_seed(cfg.seed, Stream::Data, step));
      const NoiseBatch eps = sample_noise(cfg.batch_size, d, derive_seed(cfg.seed, Stream::Noise, step));
      // The only place the modes differ: which noise row each data row gets.
      const AssignResult paired =
          apply_assign_mode(cfg.mode, x0, eps, aopts, cfg.metric.has_value());

      Rng trng(derive_seed(cfg.seed, Stream::Timestep, step));
      std::uniform_int_distribution<std::size_t> pick(1, cfg.diffusion_steps);
      for (auto& ti : t) ti = pick(trng);

      const LossAndGrads lg = loss_and_grads(model, x0, paired.noise, t, sched);
      optimizer_step(model.params(), lg.grads, opt);
      if (!model.all_finite()) throw NumericError("non-finite parameters after step " + std::to_string(step));

      loss_sum += lg.loss;
      reduction_sum += paired.stats.reduction;
      wall_sum += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      ++since;

      if (step % cfg.eval_every == 0) {
        MetricsRecord rec;
        rec.step = step;
        rec.loss = loss_sum / static_cast<double>(since);
        rec.reduction = reduction_sum / static_cast<double>(since);
        rec.wall_ms = cfg.record_wall_time ? wall_sum / static_cast<double>(since) : 0.0;
        rec.swd = evaluate_swd(model, cfg, sched, sampler, step);
        if (!std::isfinite(rec.swd)) throw NumericError("non-finite SWD at step " + std::to_string(step));
        result.log.push_back(rec);
        loss_sum = reduction_sum = wall_sum = 0.0;
        since = 0;
        if (progress) {
          progress(to_string(cfg.mode) + " seed " + std::to_string(cfg.seed) + " step " +
                   std::to_string(step) + " loss " + format_real(rec.loss) + " swd " +
                   format_real(rec.swd));
        }
      }
    }
    result.checkpoint = Checkpoint{model, cfg.adam, opt.step, cfg.schedule_params()};
  } catch (const NumericError& e) {
    result.ok = false;
    result.error = e.what();
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "run.meta", to_config_text(cfg));
    write_file(cfg.out_dir / "metrics.csv", [&](std::ostream& out) { write_metrics_csv(out, result.log); });
    if (result.checkpoint) save_checkpoint(cfg.out_dir / "checkpoint.txt", *result.checkpoint);
    if (!result.ok) write_text(cfg.out_dir / "error.txt", result.error + "\n");
  }
  return result;
}

CompareReport compare_modes(const TrainConfig& base, std::span<const AssignMode> modes,
                            std::span<const std::uint64_t> seeds, const ProgressFn& progress) {
  if (modes.size() < 2) throw ArgumentError("compare_modes needs at least 2 modes");
  if (seeds.size() < 3) throw ArgumentError("compare_modes needs at least 3 seeds");
  base.validate();

  CompareReport report;
  report.modes.assign(modes.begin(), modes.end());
  report.seeds.assign(seeds.begin(), seeds.end());
  for (std::size_t s = base.eval_every; s <= base.steps; s += base.eval_every) report.eval_steps.push_back(s);
  const std::size_t evals = report.eval_steps.size();

  for (AssignMode mode : modes) {
    std::vector<std::vector<double>> per_eval(evals);
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.mode = mode;
      cfg.seed = seed;
      if (!base.out_dir.empty()) cfg.out_dir = base.out_dir / (to_string(mode) + "_seed" + std::to_string(seed));
      const RunResult run = train_one(cfg, progress);
      RunStatus status{mode, seed, run.ok, run.error, 0.0};
      if (run.ok) {
        for (std::size_t e = 0; e < evals; ++e) per_eval[e].push_back(run.log[e].swd);
        status.final_swd = run.log.back().swd;
      }
      report.runs.push_back(status);
    }
    std::vector<double> med(evals, std::nan(""));
    for (std::size_t e = 0; e < evals; ++e) {
      if (!per_eval[e].empty()) med[e] = median(per_eval[e]);
    }
    report.median_swd.push_back(std::move(med));
  }

  const auto vanilla = std::find(modes.begin(), modes.end(), AssignMode::Vanilla);
  if (vanilla != modes.end()) {
    const auto vi = static_cast<std::size_t>(vanilla - modes.begin());
    const double at = 0.6 * static_cast<double>(base.steps);
    for (std::size_t e = 0; e < evals; ++e) {
      if (static_cast<double>(report.eval_steps[e]) >= at) {
        report.threshold = report.median_swd[vi][e];
        report.threshold_step = report.eval_steps[e];
        break;
      }
    }
  }

  std::optional<std::size_t> vanilla_steps;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    ModeSummary s;
    s.mode = modes[m];
    s.early_swd_median = report.median_swd[m].front();
    s.final_swd_median = report.median_swd[m].back();
    for (const auto& r : report.runs) s.failed_runs += (r.mode == modes[m] && !r.ok) ? 1 : 0;
    if (report.threshold && std::isfinite(*report.threshold)) {
      for (std::size_t e = 0; e < evals; ++e) {
        if (report.median_swd[m][e] <= *report.threshold) {
          s.steps_to_threshold = report.eval_steps[e];
          break;
        }
      }
    }
    if (modes[m] == AssignMode::Vanilla) vanilla_steps = s.steps_to_threshold;
    report.summaries.push_back(s);
  }
  for (auto& s : report.summaries) {
    if (vanilla_steps && s.steps_to_threshold) {
      s.speedup_vs_vanilla = static_cast<double>(*vanilla_steps) / static_cast<double>(*s.steps_to_threshold);
    }
  }

  if (!base.out_dir.empty()) {
    std::filesystem::create_directories(base.out_dir);
    write_file(base.out_dir / "compare.csv", [&](std::ostream& out) { write_compare_csv(out, report); });
    write_file(base.out_dir / "summary.csv", [&](std::ostream& out) { write_summary_csv(out, report); });
  }
  return report;
}

namespace {

constexpr const char* kReportNote =
    "# quality metric: sliced-Wasserstein distance (SWD) to fresh target samples, used in place of FID";

std::string optional_real(const std::optional<double>& v) { return v ? format_real(*v) : "none"; }

}  // namespace

void write_compare_csv(std::ostream& out, const CompareReport& report) {
  out << kReportNote << "\n";
  out << "step";
  for (AssignMode m : report.modes) out << ',' << to_string(m);
  out << "\n";
  for (std::size_t e = 0; e < report.eval_steps.size(); ++e) {
    out << report.eval_steps[e];
    for (std::size_t m = 0; m < report.modes.size(); ++m) out << ',' << format_real(report.median_swd[m][e]);
    out << "\n";
  }
}

void write_summary_csv(std::ostream& out, const CompareReport& report) {
  out << kReportNote << "\n";
  out << "# threshold=" << optional_real(report.threshold) << " (vanilla median SWD at step "
      << (report.threshold_step ? std::to_string(*report.threshold_step) : "none") << ")\n";
  out << "mode,early_swd_median,final_swd_median,steps_to_threshold,speedup_vs_vanilla,failed_runs\n";
  for (const auto& s : report.summaries) {
    out << to_string(s.mode) << ',' << format_real(s.early_swd_median) << ','
        << format_real(s.final_swd_median) << ','
        << (s.steps_to_threshold ? std::to_string(*s.steps_to_threshold) : "none") << ','
        << optional_real(s.speedup_vs_vanilla) << ',' << s.failed_runs << "\n";
  }
}

void write_assign_bench_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << kAssignBenchHeader << "\n";
  for (const auto& r : rows) {
    out << r.batch_size << ',' << format_real(100.0 * r.reduction_median) << ','
        << format_real(r.time_ms_median) << "\n";
  }
}

void write_conditional_weights_csv(std::ostream& out, const ConditionalWeightCurve& curve) {
  out << "bucket_lo,bucket_hi,count,assigned,frequency\n";
  for (std::size_t b = 0; b < curve.frequencies.size(); ++b) {
    out << format_real(curve.bucket_edges[b]) << ',' << format_real(curve.bucket_edges[b + 1]) << ','
        << curve.counts[b] << ',' << curve.assigned[b] << ',' << format_real(curve.frequencies[b]) << "\n";
  }
}

WeightSetup conditional_weight_setup(std::string_view name, std::size_t batch) {
  std::vector<std::vector<double>> sources;
  if (name == "two-point") {
    sources = {{-5.0, 0.0}, {5.0, 0.0}};
  } else if (name == "eight-point") {
    sources = gauss8_centers(2.0);
  } else {
    throw ArgumentError("unknown conditional-weight setup '" + std::string(name) + "'");
  }
  if (batch < sources.size() || batch % sources.size() != 0) {
    throw ArgumentError("batch size must be a positive multiple of " + std::to_string(sources.size()));
  }
  WeightSetup s{Batch(batch, 2), sources.front()};
  const std::size_t copies = batch / sources.size();
  for (std::size_t i = 0; i < batch; ++i) {
    const auto& p = sources[i / copies];
    s.data(i, 0) = p[0];
    s.data(i, 1) = p[1];
  }
  return s;
}

}  // namespace immiscible

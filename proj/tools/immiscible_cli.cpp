// Command-line front end: training, mode comparison, assignment benchmarks,
// conditional-weight estimation, standalone LAP solving and sampling.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "immiscible/assign.hpp"
#include "immiscible/config.hpp"
#include "immiscible/cost.hpp"
#include "immiscible/data.hpp"
#include "immiscible/denoiser.hpp"
#include "immiscible/diffusion.hpp"
#include "immiscible/errors.hpp"
#include "immiscible/harness.hpp"
#include "immiscible/lap.hpp"
#include "immiscible/rng.hpp"
#include "immiscible/stats.hpp"

namespace imd = immiscible;

namespace {

struct CommonTrainFlags {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::string mode, metric, quantize;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& f, bool with_mode) {
  cmd->add_option("--config", f.config, "key=value configuration file");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--set", f.sets, "override one config key (key=value), repeatable");
  cmd->add_option("--metric", f.metric, "assignment metric")->check(CLI::IsMember({"l1", "l2", "l2sq"}));
  cmd->add_option("--quantize", f.quantize, "binary16 assignment inputs")->check(CLI::IsMember({"on", "off"}));
  if (with_mode) {
    cmd->add_option("--mode", f.mode, "vanilla, immiscible_l2, immiscible_l1 or immiscible_flipped");
    cmd->add_option("--seed", f.seed, "master seed");
  }
}

imd::TrainConfig resolve_config(const CommonTrainFlags& f, bool seed_given) {
  imd::TrainConfig cfg;
  if (!f.config.empty()) cfg = imd::load_config(f.config);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw imd::ArgumentError("--set expects key=value, got '" + kv + "'");
    imd::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.mode.empty()) cfg.mode = imd::parse_assign_mode(f.mode);
  if (!f.metric.empty()) cfg.metric = imd::parse_metric(f.metric);
  if (!f.quantize.empty()) cfg.quantize = f.quantize == "on";
  if (seed_given) cfg.seed = f.seed;
  if (!f.out.empty()) cfg.out_dir = f.out;
  return cfg;
}

template <class T>
std::vector<T> split_list(const std::string& text, T (*parse)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

imd::Matrix read_csv_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        throw imd::FormatError("bad CSV number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return imd::from_rows(rows);
}

// Writes to `path`, or stdout when empty.
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw imd::FormatError("cannot write " + path);
  fn(out);
}

void progress_to_stderr(const std::string& msg) { std::cerr << msg << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Immiscible diffusion laboratory"};
  app.require_subcommand(1);

  // train
  CommonTrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train one model and write metrics.csv");
  add_train_flags(train, train_flags, true);

  // compare
  CommonTrainFlags cmp_flags;
  std::string cmp_modes = "vanilla,immiscible_l2,immiscible_flipped";
  std::string cmp_seeds = "0,1,2,3,4";
  auto* compare = app.add_subcommand("compare", "train every mode for every seed and summarize");
  add_train_flags(compare, cmp_flags, false);
  compare->add_option("--modes", cmp_modes, "comma-separated modes");
  compare->add_option("--seeds", cmp_seeds, "comma-separated seeds");

  // assign-bench
  std::string bench_sizes = "128,256,512,1024";
  std::size_t bench_d = 3072, bench_trials = 10;
  std::string bench_metric = "l2", bench_quantize = "off", bench_out, bench_cifar;
  std::uint64_t bench_seed = 0;
  bool bench_raw = false;
  auto* bench = app.add_subcommand("assign-bench", "distance reduction and assignment time per batch size");
  bench->add_option("--sizes", bench_sizes, "comma-separated batch sizes");
  bench->add_option("--d", bench_d, "dimension of the standard-normal surrogate data");
  bench->add_option("--trials", bench_trials, "trials per batch size");
  bench->add_option("--metric", bench_metric)->check(CLI::IsMember({"l1", "l2", "l2sq"}));
  bench->add_option("--quantize", bench_quantize)->check(CLI::IsMember({"on", "off"}));
  bench->add_option("--seed", bench_seed);
  bench->add_option("--cifar", bench_cifar, "CIFAR-10 binary batch file used instead of surrogate data");
  bench->add_flag("--raw-scale", bench_raw, "use CIFAR pixel values 0..255 instead of [-1, 1]");
  bench->add_option("--out", bench_out, "CSV path (stdout when omitted)");

  // cond-weights
  std::string cw_setup = "two-point", cw_metric = "l2", cw_out;
  std::size_t cw_batch = 64, cw_rounds = 1000, cw_buckets = 10;
  std::uint64_t cw_seed = 0;
  auto* cond = app.add_subcommand("cond-weights", "assignment frequency versus distance to a source point");
  cond->add_option("--setup", cw_setup)->check(CLI::IsMember({"two-point", "eight-point"}));
  cond->add_option("--batch", cw_batch);
  cond->add_option("--rounds", cw_rounds);
  cond->add_option("--buckets", cw_buckets);
  cond->add_option("--metric", cw_metric)->check(CLI::IsMember({"l1", "l2", "l2sq"}));
  cond->add_option("--seed", cw_seed);
  cond->add_option("--out", cw_out, "CSV path (stdout when omitted)");

  // lap-solve
  std::string lap_input = "-";
  bool lap_brute = false;
  auto* lap = app.add_subcommand("lap-solve", "solve a square assignment problem given as CSV");
  lap->add_option("--input", lap_input, "CSV file, '-' for stdin");
  lap->add_flag("--brute-force", lap_brute, "exhaustive search (n <= 10)");

  // sample
  std::string smp_ckpt, smp_out;
  std::size_t smp_n = 2048, smp_steps = 20;
  std::uint64_t smp_seed = 0;
  auto* smp = app.add_subcommand("sample", "deterministic DDIM sampling from a checkpoint");
  smp->add_option("--checkpoint", smp_ckpt)->required();
  smp->add_option("--n", smp_n);
  smp->add_option("--steps", smp_steps, "inference steps S");
  smp->add_option("--seed", smp_seed);
  smp->add_option("--out", smp_out, "CSV path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const imd::TrainConfig cfg = resolve_config(train_flags, train->count("--seed") > 0);
      const imd::RunResult run = imd::train_one(cfg, progress_to_stderr);
      if (cfg.out_dir.empty()) imd::write_metrics_csv(std::cout, run.log);
      if (!run.ok) {
        std::cerr << "training diverged: " << run.error << "\n";
        return 2;
      }
    } else if (compare->parsed()) {
      const imd::TrainConfig cfg = resolve_config(cmp_flags, false);
      const auto modes = split_list<imd::AssignMode>(
          cmp_modes, +[](const std::string& s) { return imd::parse_assign_mode(s); });
      const auto seeds = split_list<std::uint64_t>(
          cmp_seeds, +[](const std::string& s) { return static_cast<std::uint64_t>(std::stoull(s)); });
      const imd::CompareReport report = imd::compare_modes(cfg, modes, seeds, progress_to_stderr);
      imd::write_summary_csv(std::cout, report);
      for (const auto& r : report.runs) {
        if (!r.ok) std::cerr << imd::to_string(r.mode) << " seed " << r.seed << " failed: " << r.error << "\n";
      }
    } else if (bench->parsed()) {
      const auto sizes = split_list<std::size_t>(
          bench_sizes, +[](const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); });
      imd::DataSource source;
      std::shared_ptr<imd::ImageDataset> images;
      if (!bench_cifar.empty()) {
        images = std::make_shared<imd::ImageDataset>(imd::load_cifar10_binary(bench_cifar));
        source = [images, bench_raw](std::size_t n, std::uint64_t seed) {
          if (n > images->size()) throw imd::ArgumentError("batch larger than the CIFAR file");
          imd::Rng rng(seed);
          std::vector<int> idx(images->size());
          for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
          std::shuffle(idx.begin(), idx.end(), rng);
          idx.resize(n);
          imd::Batch b = imd::gather_rows(images->pixels, std::span<const int>(idx));
          if (bench_raw) {
            for (double& v : b.values()) v = (v + 1.0) * 127.5;
          }
          return b;
        };
      } else {
        source = [bench_d](std::size_t n, std::uint64_t seed) {
          return imd::Batch(imd::Matrix(imd::sample_noise(n, bench_d, seed)));
        };
      }
      imd::AssignOptions opts;
      opts.metric = imd::parse_metric(bench_metric);
      opts.quantize = bench_quantize == "on";
      const auto rows = imd::distance_reduction_sweep(source, sizes, opts, bench_trials, bench_seed);
      emit(bench_out, [&](std::ostream& out) { imd::write_assign_bench_csv(out, rows); });
    } else if (cond->parsed()) {
      const imd::WeightSetup setup = imd::conditional_weight_setup(cw_setup, cw_batch);
      const auto curve = imd::empirical_conditional_weights(
          setup.target, setup.data,
          [](std::size_t n, std::size_t d, std::uint64_t s) { return imd::sample_noise(n, d, s); },
          cw_rounds, cw_buckets, cw_seed, imd::parse_metric(cw_metric));
      emit(cw_out, [&](std::ostream& out) { imd::write_conditional_weights_csv(out, curve); });
      const auto centers = curve.bucket_centers();
      std::cerr << "spearman(distance, frequency) = "
                << imd::format_real(imd::spearman(centers, curve.frequencies)) << "\n";
    } else if (lap->parsed()) {
      imd::Matrix m;
      if (lap_input == "-") {
        m = read_csv_matrix(std::cin);
      } else {
        std::ifstream in(lap_input);
        if (!in) throw imd::FormatError("cannot open " + lap_input);
        m = read_csv_matrix(in);
      }
      const imd::CostMatrix cost(std::move(m));
      const imd::Assignment a = lap_brute ? imd::brute_force_lap(cost) : imd::solve_lap(cost);
      std::cout << "perm=";
      for (std::size_t i = 0; i < a.perm.size(); ++i) std::cout << (i ? "," : "") << a.perm[i];
      std::cout << "\ntotal_cost=" << imd::format_real(a.total_cost) << "\n";
    } else if (smp->parsed()) {
      const imd::Checkpoint ckpt = imd::load_checkpoint(smp_ckpt);
      if (!ckpt.schedule) throw imd::ArgumentError("checkpoint carries no diffusion schedule");
      const auto sched = imd::make_schedule(ckpt.schedule->steps, ckpt.schedule->beta_start,
                                            ckpt.schedule->beta_end);
      const auto cfg = imd::SamplerConfig::linear(smp_steps, sched.steps());
      const imd::Batch x = imd::sample(imd::as_predictor(ckpt.model), sched, cfg, smp_n,
                                       ckpt.model.data_dim(), smp_seed);
      emit(smp_out, [&](std::ostream& out) {
        for (std::size_t i = 0; i < x.rows(); ++i) {
          for (std::size_t k = 0; k < x.cols(); ++k) out << (k ? "," : "") << imd::format_real(x(i, k));
          out << "\n";
        }
      });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

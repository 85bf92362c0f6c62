#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "immiscible/assign.hpp"
#include "immiscible/cost.hpp"
#include "immiscible/data.hpp"
#include "immiscible/denoiser.hpp"

namespace immiscible {

// Everything a training run depends on. Text form is one `key=value` per
// line; `#` starts a comment; unknown keys are rejected.
struct TrainConfig {
  ToyDataset dataset;                  // dataset, dataset_scale, dataset_std
  std::size_t batch_size = 256;        // batch_size
  AssignMode mode = AssignMode::Vanilla;  // mode
  std::optional<Metric> metric;        // metric (default: the mode's own)
  bool quantize = false;               // quantize
  std::size_t shards = 1;              // shards
  std::size_t diffusion_steps = 100;   // T
  std::optional<double> beta_start;    // beta_start (default: rescaled 1e-4)
  std::optional<double> beta_end;      // beta_end (default: rescaled 0.02)
  std::size_t embed_dim = 16;          // embed_dim
  std::size_t hidden_width = 128;      // hidden_width
  std::size_t hidden_layers = 3;       // hidden_layers
  AdamConfig adam;                     // lr, adam_beta1, adam_beta2, adam_eps
  std::size_t steps = 3000;            // steps
  std::size_t eval_every = 300;        // eval_every
  std::size_t sampler_steps = 20;      // sampler_steps
  std::size_t eval_samples = 2048;     // eval_samples
  std::size_t swd_projections = 128;   // swd_projections
  std::uint64_t seed = 0;              // seed
  std::uint64_t eval_seed = 1;         // eval_seed
  bool record_wall_time = false;       // record_wall_time
  std::filesystem::path out_dir;       // out_dir

  Metric effective_metric() const { return metric.value_or(default_metric(mode)); }
  DiffusionSchedule schedule() const;
  ScheduleParams schedule_params() const;

  // Throws ArgumentError describing the first violated constraint.
  void validate() const;
};

// Every accepted key, in the order written by to_config_text.
const std::vector<std::string>& config_keys();

// Applies one key/value pair; throws ArgumentError for unknown keys or bad values.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

TrainConfig parse_config(std::istream& in, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

// Fully resolved `key=value` echo of a configuration (defaults expanded).
std::string to_config_text(const TrainConfig& cfg);

// %.17g formatting used for every real written to CSV or config files.
std::string format_real(double v);

}  // namespace immiscible

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "immiscible/diffusion.hpp"
#include "immiscible/matrix.hpp"

namespace immiscible {

// Sinusoidal features of s = t / T: [sin(w_0 s), cos(w_0 s), sin(w_1 s), ...]
// with e/2 frequencies spaced geometrically over [1, 1000].
std::vector<double> embed_time(std::size_t t, std::size_t total_steps, std::size_t dim);

// Geometric frequencies used by embed_time.
std::vector<double> time_frequencies(std::size_t dim);

// Fully connected noise predictor: input is the data point concatenated
// with the time embedding; SiLU after every layer except the last.
//
// Parameters live in one flat vector, layer by layer: weights stored
// input-major (w[k * out + j] connects input k to output j), then biases.
class DenoiserModel {
 public:
  static constexpr const char* kActivation = "silu";

  // layer_dims = [data_dim + embed_dim, hidden..., data_dim]; parameters zero.
  DenoiserModel(std::vector<std::size_t> layer_dims, std::size_t embed_dim, std::size_t total_steps);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static DenoiserModel create(std::size_t data_dim, std::size_t embed_dim, std::size_t hidden_width,
                              std::size_t hidden_layers, std::size_t total_steps, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t layers() const { return dims_.size() - 1; }
  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t data_dim() const { return dims_.back(); }
  std::size_t total_steps() const { return total_steps_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + dims_[layer] * dims_[layer + 1];
  }

  bool all_finite() const;

  friend bool operator==(const DenoiserModel&, const DenoiserModel&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::size_t embed_dim_ = 0;
  std::size_t total_steps_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// eps_hat for every row of x_t at its own timestep.
Matrix forward(const DenoiserModel& model, const Matrix& x_t, std::span<const std::size_t> t);

// Adapter for the DDIM sampler.
NoisePredictor as_predictor(const DenoiserModel& model);

struct LossAndGrads {
  double loss = 0.0;
  std::vector<double> grads;  // same layout as DenoiserModel::params()
};

// Mean squared error between forward(model, x_t, t) and eps, where
// x_t = forward_diffuse(x0, eps, t), plus its exact gradient.
LossAndGrads loss_and_grads(const DenoiserModel& model, const Batch& x0, const NoiseBatch& eps,
                            std::span<const std::size_t> t, const DiffusionSchedule& sched);

// Loss and gradient for an already-diffused input.
LossAndGrads mse_loss_and_grads(const DenoiserModel& model, const Matrix& x_t,
                                std::span<const std::size_t> t, const Matrix& target);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  OptimizerState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected adaptive-moment update; throws NumericError on non-finite
// gradients (parameters untouched in that case).
void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state);

struct ScheduleParams {
  std::size_t steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
};

struct Checkpoint {
  DenoiserModel model;
  AdamConfig adam;
  std::uint64_t optimizer_step = 0;
  std::optional<ScheduleParams> schedule;
};

// Text document; every real written with 17 significant digits.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace immiscible

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "immiscible/matrix.hpp"

namespace immiscible {

// Linear-beta diffusion schedule over steps t = 1..T. Step 0 is the clean
// data boundary with alpha_bar(0) = 1.
class DiffusionSchedule {
 public:
  DiffusionSchedule(std::size_t steps, double beta_start, double beta_end);

  std::size_t steps() const { return betas_.size(); }
  double beta(std::size_t t) const { return betas_.at(t - 1); }
  double alpha(std::size_t t) const { return 1.0 - beta(t); }
  double alpha_bar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bars_.at(t - 1); }
  double beta_start() const { return betas_.front(); }
  double beta_end() const { return betas_.back(); }

  std::span<const double> betas() const { return betas_; }
  std::span<const double> alpha_bars() const { return alpha_bars_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end);

// Linear beta range rescaled for T steps: [1e-4, 0.02] * 1000 / T, clipped
// below 1. Gives alpha_bar(T) <= 0.01 for every T >= 100.
DiffusionSchedule make_default_schedule(std::size_t steps);

// S inference steps spaced evenly over 1..T; index k (1-based) is floor(k*T/S),
// so the last one is T.
struct SamplerConfig {
  std::vector<std::size_t> step_indices;

  static SamplerConfig linear(std::size_t inference_steps, std::size_t total_steps);
};

// sqrt(ab) * x0 + sqrt(1 - ab) * eps with ab = alpha_bar(t), row by row.
Batch forward_diffuse(const Batch& x0, const NoiseBatch& eps, std::size_t t,
                      const DiffusionSchedule& sched);

// Per-row timesteps.
Batch forward_diffuse(const Batch& x0, const NoiseBatch& eps, std::span<const std::size_t> t,
                      const DiffusionSchedule& sched);

// Deterministic DDIM update from t to t_prev < t.
Batch ddim_step(const Batch& x_t, const Matrix& eps_hat, std::size_t t, std::size_t t_prev,
                const DiffusionSchedule& sched);

// Same update from explicit alpha_bar values.
Batch ddim_step_alpha(const Batch& x_t, const Matrix& eps_hat, double alpha_bar_t,
                      double alpha_bar_prev);

// Predicts noise for every row of x at a shared timestep t.
using NoisePredictor = std::function<Matrix(const Batch& x, std::size_t t)>;

// Runs the DDIM chain from n standard-normal points (seeded) along the
// reversed step indices and returns the final batch.
Batch sample(const NoisePredictor& model, const DiffusionSchedule& sched, const SamplerConfig& cfg,
             std::size_t n, std::size_t d, std::uint64_t seed);

// Same chain from caller-supplied starting points.
Batch sample_from(const NoisePredictor& model, const DiffusionSchedule& sched,
                  const SamplerConfig& cfg, Batch x);

// Minimum-MSE noise prediction at the last step when p(x0 | x_T) = p(x0):
// eps = a * mean(x0) + b * x_T.
struct OraclePrediction {
  double a = 0.0;  // -sqrt(ab) / sqrt(1 - ab)
  double b = 0.0;  // 1 / sqrt(1 - ab)
  std::vector<double> x0_mean;
  std::vector<double> eps;
};

OraclePrediction oracle_noise_prediction(std::span<const double> x_T, const Batch& data,
                                         const DiffusionSchedule& sched);

OraclePrediction oracle_noise_prediction_at(std::span<const double> x_T, const Batch& data,
                                            double alpha_bar);

// Oracle prediction for every row of x_T, usable as a NoisePredictor.
NoisePredictor oracle_predictor(const Batch& data, const DiffusionSchedule& sched);

}  // namespace immiscible

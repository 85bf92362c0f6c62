#include "immiscible/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "immiscible/data.hpp"
#include "immiscible/errors.hpp"

namespace immiscible {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
  }
}

void check_step(std::size_t t, const DiffusionSchedule& sched) {
  if (t < 1 || t > sched.steps()) {
    throw RangeError("step " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps()) + "]");
  }
}

}  // namespace

DiffusionSchedule::DiffusionSchedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw ArgumentError("schedule needs T >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ArgumentError("schedule needs 0 < beta_start <= beta_end < 1");
  }
  betas_.resize(steps);
  alpha_bars_.resize(steps);
  double prod = 1.0;
  for (std::size_t k = 0; k < steps; ++k) {
    betas_[k] = steps == 1 ? beta_start
                           : beta_start + (beta_end - beta_start) * static_cast<double>(k) /
                                              static_cast<double>(steps - 1);
    prod *= 1.0 - betas_[k];
    alpha_bars_[k] = prod;
  }
}

DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end) {
  return DiffusionSchedule(steps, beta_start, beta_end);
}

DiffusionSchedule make_default_schedule(std::size_t steps) {
  const double factor = 1000.0 / static_cast<double>(steps);
  return DiffusionSchedule(steps, std::min(1e-4 * factor, 0.999), std::min(0.02 * factor, 0.999));
}

SamplerConfig SamplerConfig::linear(std::size_t inference_steps, std::size_t total_steps) {
  if (inference_steps < 1 || inference_steps > total_steps) {
    throw ArgumentError("inference steps " + std::to_string(inference_steps) + " outside [1, " +
                        std::to_string(total_steps) + "]");
  }
  SamplerConfig cfg;
  for (std::size_t k = 1; k <= inference_steps; ++k) {
    cfg.step_indices.push_back(k * total_steps / inference_steps);
  }
  return cfg;
}

Batch forward_diffuse(const Batch& x0, const NoiseBatch& eps, std::size_t t,
                      const DiffusionSchedule& sched) {
  check_step(t, sched);
  std::vector<std::size_t> steps(x0.rows(), t);
  return forward_diffuse(x0, eps, steps, sched);
}

Batch forward_diffuse(const Batch& x0, const NoiseBatch& eps, std::span<const std::size_t> t,
                      const DiffusionSchedule& sched) {
  check_same_shape(x0, eps, "forward_diffuse");
  if (t.size() != x0.rows()) throw DimensionError("forward_diffuse: one step per row required");
  Batch out(x0.rows(), x0.cols());
  for (std::size_t i = 0; i < x0.rows(); ++i) {
    check_step(t[i], sched);
    const double ab = sched.alpha_bar(t[i]);
    const double signal = std::sqrt(ab), noise = std::sqrt(1.0 - ab);
    auto x = x0.row(i);
    auto e = eps.row(i);
    auto o = out.row(i);
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = signal * x[k] + noise * e[k];
  }
  return out;
}

Batch ddim_step_alpha(const Batch& x_t, const Matrix& eps_hat, double alpha_bar_t,
                      double alpha_bar_prev) {
  check_same_shape(x_t, eps_hat, "ddim_step");
  const double s_t = std::sqrt(alpha_bar_t), n_t = std::sqrt(1.0 - alpha_bar_t);
  const double s_prev = std::sqrt(alpha_bar_prev), n_prev = std::sqrt(1.0 - alpha_bar_prev);
  Batch out(x_t.rows(), x_t.cols());
  auto x = x_t.values();
  auto e = eps_hat.values();
  auto o = out.values();
  for (std::size_t k = 0; k < o.size(); ++k) {
    const double x0_hat = (x[k] - n_t * e[k]) / s_t;
    o[k] = alpha_bar_prev == 1.0 ? x0_hat : s_prev * x0_hat + n_prev * e[k];
  }
  return out;
}

Batch ddim_step(const Batch& x_t, const Matrix& eps_hat, std::size_t t, std::size_t t_prev,
                const DiffusionSchedule& sched) {
  check_step(t, sched);
  if (t_prev >= t) {
    throw ArgumentError("ddim_step needs t_prev < t, got t=" + std::to_string(t) +
                        " t_prev=" + std::to_string(t_prev));
  }
  return ddim_step_alpha(x_t, eps_hat, sched.alpha_bar(t), sched.alpha_bar(t_prev));
}

Batch sample_from(const NoisePredictor& model, const DiffusionSchedule& sched,
                  const SamplerConfig& cfg, Batch x) {
  const auto& idx = cfg.step_indices;
  if (idx.empty() || idx.back() != sched.steps()) {
    throw ArgumentError("sampler step indices must end at T=" + std::to_string(sched.steps()));
  }
  for (std::size_t k = 1; k < idx.size(); ++k) {
    if (idx[k] <= idx[k - 1]) throw ArgumentError("sampler step indices must increase");
  }
  for (std::size_t k = idx.size(); k-- > 0;) {
    const std::size_t t = idx[k];
    const std::size_t t_prev = k == 0 ? 0 : idx[k - 1];
    const Matrix eps_hat = model(x, t);
    x = ddim_step(x, eps_hat, t, t_prev, sched);
  }
  return x;
}

Batch sample(const NoisePredictor& model, const DiffusionSchedule& sched, const SamplerConfig& cfg,
             std::size_t n, std::size_t d, std::uint64_t seed) {
  NoiseBatch start = sample_noise(n, d, seed);
  return sample_from(model, sched, cfg, Batch(Matrix(std::move(start))));
}

OraclePrediction oracle_noise_prediction_at(std::span<const double> x_T, const Batch& data,
                                            double alpha_bar) {
  if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) {
    throw RangeError("oracle prediction needs 0 < alpha_bar < 1, got " + std::to_string(alpha_bar));
  }
  if (x_T.size() != data.cols()) throw DimensionError("x_T dimension differs from data");
  if (data.rows() == 0) throw DimensionError("empty dataset");
  OraclePrediction p;
  p.a = -std::sqrt(alpha_bar) / std::sqrt(1.0 - alpha_bar);
  p.b = 1.0 / std::sqrt(1.0 - alpha_bar);
  p.x0_mean.assign(data.cols(), 0.0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto r = data.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) p.x0_mean[k] += r[k];
  }
  for (double& m : p.x0_mean) m /= static_cast<double>(data.rows());
  p.eps.resize(data.cols());
  for (std::size_t k = 0; k < p.eps.size(); ++k) p.eps[k] = p.a * p.x0_mean[k] + p.b * x_T[k];
  return p;
}

OraclePrediction oracle_noise_prediction(std::span<const double> x_T, const Batch& data,
                                         const DiffusionSchedule& sched) {
  return oracle_noise_prediction_at(x_T, data, sched.alpha_bar(sched.steps()));
}

NoisePredictor oracle_predictor(const Batch& data, const DiffusionSchedule& sched) {
  return [data, sched](const Batch& x, std::size_t t) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto p = oracle_noise_prediction_at(x.row(i), data, sched.alpha_bar(t));
      std::copy(p.eps.begin(), p.eps.end(), out.row(i).begin());
    }
    return out;
  };
}

}  // namespace immiscible

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "immiscible/data.hpp"
#include "immiscible/denoiser.hpp"
#include "immiscible/errors.hpp"

using namespace immiscible;

namespace {

DenoiserModel formula_model() {
  DenoiserModel m({6, 5, 2}, 4, 10);
  auto p = m.params();
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = 0.8 * std::sin(0.37 * static_cast<double>(k) + 0.1);
  return m;
}

// Output-major reference pass, one scalar at a time.
Matrix reference_forward(const DenoiserModel& m, const Matrix& x, std::span<const std::size_t> t) {
  const auto& dims = m.layer_dims();
  const auto p = m.params();
  Matrix out(x.rows(), m.data_dim());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::vector<double> h(x.row(i).begin(), x.row(i).end());
    const auto e = embed_time(t[i], m.total_steps(), m.embed_dim());
    h.insert(h.end(), e.begin(), e.end());
    for (std::size_t l = 0; l < m.layers(); ++l) {
      std::vector<double> next(dims[l + 1]);
      for (std::size_t j = 0; j < dims[l + 1]; ++j) {
        double z = p[m.bias_offset(l) + j];
        for (std::size_t k = 0; k < dims[l]; ++k) z += h[k] * p[m.weight_offset(l) + k * dims[l + 1] + j];
        next[j] = l + 1 == m.layers() ? z : z / (1.0 + std::exp(-z));
      }
      h = std::move(next);
    }
    std::copy(h.begin(), h.end(), out.row(i).begin());
  }
  return out;
}

double reference_loss(const DenoiserModel& m, const Matrix& x, std::span<const std::size_t> t,
                      const Matrix& target) {
  const auto y = reference_forward(m, x, t);
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double diff = y.values()[k] - target.values()[k];
    s += diff * diff;
  }
  return s / static_cast<double>(y.size());
}

std::vector<std::size_t> random_steps(std::size_t n, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> u(1, T);
  std::vector<std::size_t> t(n);
  for (auto& v : t) v = u(rng);
  return t;
}

}  // namespace

TEST(Embedding, Values) {
  const auto e = embed_time(0, 10, 2);
  EXPECT_EQ(e, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(time_frequencies(2), (std::vector<double>{1.0}));
  const auto w = time_frequencies(8);
  EXPECT_EQ(w.front(), 1.0);
  EXPECT_NEAR(w.back(), 1000.0, 1e-9);
  EXPECT_NEAR(w[1] / w[0], w[2] / w[1], 1e-12);
  const auto f = embed_time(7, 20, 8);
  EXPECT_NEAR(f[6], std::sin(w[3] * 0.35), 1e-15);
  EXPECT_NEAR(f[7], std::cos(w[3] * 0.35), 1e-15);
}

TEST(Embedding, BoundedAndPure) {
  for (std::size_t t = 1; t <= 100; ++t) {
    const auto e = embed_time(t, 100, 16);
    EXPECT_EQ(e, embed_time(t, 100, 16));
    for (double v : e) {
      EXPECT_LE(std::abs(v), 1.0);
    }
  }
  EXPECT_EQ(embed_time(5, 10, 6), embed_time(50, 100, 6));
  EXPECT_THROW(embed_time(1, 10, 3), ArgumentError);
  EXPECT_THROW(embed_time(1, 10, 0), ArgumentError);
}

TEST(Forward, ZeroWeightsGiveZero) {
  const DenoiserModel m({2 + 4, 8, 8, 2}, 4, 10);
  const Matrix x = sample_noise(5, 2, 1);
  const std::vector<std::size_t> t = {1, 2, 3, 4, 5};
  EXPECT_EQ(forward(m, x, t), Matrix(5, 2));
}

TEST(Forward, GoldenSnapshot) {
  const auto m = formula_model();
  const Matrix x = from_rows({{0.5, -1.2}, {2.0, 0.3}});
  const std::vector<std::size_t> t = {3, 10};
  // Produced by a separate numpy evaluation of the same weights.
  const Matrix golden = from_rows({{-1.2813078216494729, -1.4832753977948001},
                                   {-0.46234639543620715, -1.0924675028601327}});
  const auto y = forward(m, x, t);
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y.values()[k], golden.values()[k], 1e-13);
}

TEST(Forward, MatchesReferenceAndRowwise) {
  const auto m = DenoiserModel::create(3, 6, 16, 3, 50, 9);
  const Matrix x = sample_noise(7, 3, 2);
  const auto t = random_steps(7, 50, 3);
  const auto y = forward(m, x, t);
  const auto ref = reference_forward(m, x, t);
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y.values()[k], ref.values()[k], 1e-12);
  for (std::size_t i = 0; i < 7; ++i) {
    Matrix one(1, 3);
    std::copy(x.row(i).begin(), x.row(i).end(), one.row(0).begin());
    const std::vector<std::size_t> ti = {t[i]};
    const auto yi = forward(m, one, ti);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(yi(0, c), y(i, c));
  }
}

TEST(Forward, Errors) {
  const auto m = DenoiserModel::create(2, 4, 8, 1, 10, 1);
  const std::vector<std::size_t> t = {1};
  EXPECT_THROW(forward(m, Matrix(1, 3), t), DimensionError);
  EXPECT_THROW(forward(m, Matrix(2, 2), t), DimensionError);
  Matrix bad(1, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(forward(m, bad, t), NumericError);
}

TEST(Init, UniformFanInBounds) {
  const auto m = DenoiserModel::create(2, 16, 128, 3, 100, 4);
  EXPECT_EQ(m.layer_dims(), (std::vector<std::size_t>{18, 128, 128, 128, 2}));
  for (std::size_t l = 0; l < m.layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.layer_dims()[l]));
    const std::size_t end = m.bias_offset(l) + m.layer_dims()[l + 1];
    for (std::size_t k = m.weight_offset(l); k < end; ++k) EXPECT_LE(std::abs(m.params()[k]), bound);
  }
  EXPECT_EQ(m, DenoiserModel::create(2, 16, 128, 3, 100, 4));
  EXPECT_NE(m, DenoiserModel::create(2, 16, 128, 3, 100, 5));
}

TEST(Gradients, MatchCentralDifferences) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = DenoiserModel::create(2, 2, 8, 1, 20, 100 + trial);  // [4, 8, 2]
    const Matrix x = sample_noise(10, 2, 200 + trial);
    const Matrix target = sample_noise(10, 2, 300 + trial);
    const auto t = random_steps(10, 20, 400 + trial);
    const auto g = mse_loss_and_grads(m, x, t, target);
    EXPECT_NEAR(g.loss, reference_loss(m, x, t, target), 1e-12);

    auto probe = m;
    double worst = 0.0;
    for (std::size_t k = 0; k < m.param_count(); ++k) {
      const double w = m.params()[k];
      const double h = 1e-4;
      probe.params()[k] = w + h;
      const double up = reference_loss(probe, x, t, target);
      probe.params()[k] = w - h;
      const double down = reference_loss(probe, x, t, target);
      probe.params()[k] = w;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - g.grads[k]) / std::max(1e-6, std::abs(fd) + std::abs(g.grads[k])));
    }
    EXPECT_LE(worst, 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, DiffusionLossWrapsMse) {
  const auto m = DenoiserModel::create(2, 4, 16, 2, 100, 7);
  const auto s = make_default_schedule(100);
  const Batch x0(sample_noise(12, 2, 1));
  const NoiseBatch eps(sample_noise(12, 2, 2));
  const auto t = random_steps(12, 100, 3);
  const auto a = loss_and_grads(m, x0, eps, t, s);
  const auto b = mse_loss_and_grads(m, forward_diffuse(x0, eps, t, s), t, eps);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grads, b.grads);
}

TEST(Gradients, PerfectPredictorHasZeroLoss) {
  const auto m = DenoiserModel::create(2, 4, 8, 1, 10, 7);
  const Matrix x = sample_noise(6, 2, 1);
  const auto t = random_steps(6, 10, 2);
  const auto target = forward(m, x, t);
  const auto g = mse_loss_and_grads(m, x, t, target);
  EXPECT_EQ(g.loss, 0.0);
  for (double v : g.grads) EXPECT_EQ(v, 0.0);
}

TEST(Gradients, DuplicationInvariant) {
  const auto m = DenoiserModel::create(2, 4, 8, 2, 10, 8);
  const Matrix x = sample_noise(5, 2, 1);
  const Matrix y = sample_noise(5, 2, 2);
  const auto t = random_steps(5, 10, 3);
  Matrix x2(10, 2), y2(10, 2);
  std::vector<std::size_t> t2;
  for (std::size_t i = 0; i < 10; ++i) {
    std::copy(x.row(i % 5).begin(), x.row(i % 5).end(), x2.row(i).begin());
    std::copy(y.row(i % 5).begin(), y.row(i % 5).end(), y2.row(i).begin());
    t2.push_back(t[i % 5]);
  }
  const auto a = mse_loss_and_grads(m, x, t, y);
  const auto b = mse_loss_and_grads(m, x2, t2, y2);
  EXPECT_NEAR(a.loss, b.loss, 1e-15);
  for (std::size_t k = 0; k < a.grads.size(); ++k) EXPECT_NEAR(a.grads[k], b.grads[k], 1e-14);
}

TEST(Adam, ZeroGradientKeepsParameters) {
  std::vector<double> w = {0.3, -1.0};
  OptimizerState st(2, {});
  st.m = {0.5, 0.5};
  st.v = {0.25, 0.25};
  const std::vector<double> g = {0.0, 0.0};
  optimizer_step(w, g, st);
  EXPECT_EQ(st.step, 1u);
  EXPECT_DOUBLE_EQ(st.m[0], 0.45);
  EXPECT_DOUBLE_EQ(st.v[0], 0.24975);
}

TEST(Adam, FirstStepOnSquare) {
  std::vector<double> w = {1.0};
  OptimizerState st(1, {0.1, 0.9, 0.999, 1e-8});
  const std::vector<double> g = {2.0};
  optimizer_step(w, g, st);
  // Bias correction makes the first step lr * g / (|g| + eps).
  EXPECT_NEAR(w[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_LT(w[0], 1.0);
  EXPECT_THROW(optimizer_step(w, std::vector<double>{std::nan("")}, st), NumericError);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, QuadraticBowlConverges) {
  std::vector<double> w = {1.0};
  OptimizerState st(1, {0.05, 0.9, 0.999, 1e-8});
  for (int k = 0; k < 500; ++k) {
    const std::vector<double> g = {2.0 * w[0]};
    optimizer_step(w, g, st);
  }
  EXPECT_LE(std::abs(w[0]), 1e-3);
}

TEST(Checkpoint, ReloadReproducesForwardBitwise) {
  Checkpoint ck{DenoiserModel::create(2, 16, 32, 3, 100, 12), {2e-3, 0.8, 0.99, 1e-7}, 321,
                ScheduleParams{100, 1e-3, 0.2}};
  std::stringstream ss;
  write_checkpoint(ss, ck);
  const std::string text = ss.str();
  EXPECT_EQ(text.rfind("immiscible-denoiser-checkpoint 1", 0), 0u);
  EXPECT_NE(text.find("activation silu"), std::string::npos);

  const auto back = read_checkpoint(ss);
  EXPECT_EQ(back.model, ck.model);
  EXPECT_EQ(back.optimizer_step, 321u);
  EXPECT_EQ(back.adam.lr, 2e-3);
  ASSERT_TRUE(back.schedule.has_value());
  EXPECT_EQ(back.schedule->beta_end, 0.2);

  const Matrix x = sample_noise(20, 2, 5);
  const auto t = random_steps(20, 100, 6);
  EXPECT_EQ(forward(back.model, x, t), forward(ck.model, x, t));

  std::stringstream again;
  write_checkpoint(again, back);
  EXPECT_EQ(again.str(), text);
}

TEST(Checkpoint, RejectsDamagedDocuments) {
  Checkpoint ck{DenoiserModel::create(2, 4, 8, 1, 10, 1), {}, 0, std::nullopt};
  std::stringstream ss;
  write_checkpoint(ss, ck);
  std::string text = ss.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(read_checkpoint(truncated), FormatError);
  std::istringstream wrong("not a checkpoint\n");
  EXPECT_THROW(read_checkpoint(wrong), FormatError);
}

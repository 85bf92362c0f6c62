#include "immiscible/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "immiscible/errors.hpp"
#include "immiscible/rng.hpp"

namespace immiscible {
namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Inputs to every layer plus the pre-activations of the hidden layers.
struct ForwardCache {
  std::vector<Matrix> inputs;  // inputs[l]: B x dims[l]
  std::vector<Matrix> pre;     // pre[l]:    B x dims[l+1]
  Matrix output;
};

Matrix build_input(const DenoiserModel& model, const Matrix& x_t, std::span<const std::size_t> t) {
  const std::size_t d = model.data_dim();
  const std::size_t e = model.embed_dim();
  if (x_t.cols() != d) {
    throw DimensionError("model expects data dimension " + std::to_string(d) + ", got " +
                         std::to_string(x_t.cols()));
  }
  if (t.size() != x_t.rows()) throw DimensionError("one timestep per row required");
  Matrix in(x_t.rows(), d + e);
  for (std::size_t i = 0; i < x_t.rows(); ++i) {
    auto src = x_t.row(i);
    auto dst = in.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    const auto emb = embed_time(t[i], model.total_steps(), e);
    std::copy(emb.begin(), emb.end(), dst.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return in;
}

// out = in * W + b
Matrix affine(const Matrix& in, const double* w, const double* b, std::size_t out_dim) {
  Matrix out(in.rows(), out_dim);
  for (std::size_t i = 0; i < in.rows(); ++i) {
    double* o = out.row(i).data();
    std::copy(b, b + out_dim, o);
    const auto x = in.row(i);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double xv = x[k];
      const double* wk = w + k * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) o[j] += xv * wk[j];
    }
  }
  return out;
}

ForwardCache run_forward(const DenoiserModel& model, Matrix input) {
  const auto& dims = model.layer_dims();
  const auto p = model.params();
  ForwardCache cache;
  cache.inputs.reserve(model.layers());
  cache.pre.reserve(model.layers());
  Matrix act = std::move(input);
  for (std::size_t l = 0; l < model.layers(); ++l) {
    Matrix z = affine(act, p.data() + model.weight_offset(l), p.data() + model.bias_offset(l), dims[l + 1]);
    cache.inputs.push_back(std::move(act));
    if (l + 1 == model.layers()) {
      cache.output = z;
      cache.pre.push_back(std::move(z));
      break;
    }
    Matrix a(z.rows(), z.cols());
    auto zv = z.values();
    auto av = a.values();
    for (std::size_t k = 0; k < zv.size(); ++k) av[k] = zv[k] * sigmoid(zv[k]);
    cache.pre.push_back(std::move(z));
    act = std::move(a);
  }
  return cache;
}

}  // namespace

std::vector<double> time_frequencies(std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ArgumentError("time embedding dimension must be even and positive");
  const std::size_t half = dim / 2;
  std::vector<double> w(half);
  for (std::size_t k = 0; k < half; ++k) {
    w[k] = half == 1 ? 1.0 : std::pow(1000.0, static_cast<double>(k) / static_cast<double>(half - 1));
  }
  return w;
}

std::vector<double> embed_time(std::size_t t, std::size_t total_steps, std::size_t dim) {
  if (total_steps < 1 || t > total_steps) {
    throw RangeError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  const auto w = time_frequencies(dim);
  const double s = static_cast<double>(t) / static_cast<double>(total_steps);
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < w.size(); ++k) {
    out[2 * k] = std::sin(w[k] * s);
    out[2 * k + 1] = std::cos(w[k] * s);
  }
  return out;
}

DenoiserModel::DenoiserModel(std::vector<std::size_t> layer_dims, std::size_t embed_dim,
                             std::size_t total_steps)
    : dims_(std::move(layer_dims)), embed_dim_(embed_dim), total_steps_(total_steps) {
  if (dims_.size() < 2) throw ArgumentError("model needs at least one layer");
  if (std::any_of(dims_.begin(), dims_.end(), [](std::size_t v) { return v == 0; })) {
    throw ArgumentError("layer dimensions must be positive");
  }
  if (dims_.front() != dims_.back() + embed_dim_) {
    throw DimensionError("input width must equal data dimension plus embedding dimension");
  }
  if (embed_dim_ % 2 != 0) throw ArgumentError("time embedding dimension must be even");
  if (total_steps_ < 1) throw ArgumentError("model needs total_steps >= 1");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(offset);
    offset += dims_[l] * dims_[l + 1] + dims_[l + 1];
  }
  params_.assign(offset, 0.0);
}

DenoiserModel DenoiserModel::create(std::size_t data_dim, std::size_t embed_dim,
                                    std::size_t hidden_width, std::size_t hidden_layers,
                                    std::size_t total_steps, std::uint64_t seed) {
  std::vector<std::size_t> dims{data_dim + embed_dim};
  for (std::size_t h = 0; h < hidden_layers; ++h) dims.push_back(hidden_width);
  dims.push_back(data_dim);
  DenoiserModel model(std::move(dims), embed_dim, total_steps);
  Rng rng(seed);
  for (std::size_t l = 0; l < model.layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(model.dims_[l]));
    std::uniform_real_distribution<double> init(-bound, bound);
    const std::size_t end = model.bias_offset(l) + model.dims_[l + 1];
    for (std::size_t k = model.weight_offset(l); k < end; ++k) model.params_[k] = init(rng);
  }
  return model;
}

bool DenoiserModel::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

Matrix forward(const DenoiserModel& model, const Matrix& x_t, std::span<const std::size_t> t) {
  ForwardCache cache = run_forward(model, build_input(model, x_t, t));
  if (!cache.output.all_finite()) throw NumericError("non-finite activation in denoiser forward pass");
  return std::move(cache.output);
}

NoisePredictor as_predictor(const DenoiserModel& model) {
  return [&model](const Batch& x, std::size_t t) {
    const std::vector<std::size_t> steps(x.rows(), t);
    return forward(model, x, steps);
  };
}

LossAndGrads mse_loss_and_grads(const DenoiserModel& model, const Matrix& x_t,
                                std::span<const std::size_t> t, const Matrix& target) {
  if (target.rows() != x_t.rows() || target.cols() != model.data_dim()) {
    throw DimensionError("target shape does not match model output");
  }
  ForwardCache cache = run_forward(model, build_input(model, x_t, t));
  const auto& dims = model.layer_dims();
  const auto p = model.params();

  LossAndGrads out;
  out.grads.assign(model.param_count(), 0.0);

  // dL/d(output) for L = mean((out - target)^2)
  const double scale = 2.0 / static_cast<double>(target.size());
  Matrix delta(target.rows(), target.cols());
  {
    auto o = cache.output.values();
    auto y = target.values();
    auto dv = delta.values();
    double sum = 0.0;
    for (std::size_t k = 0; k < o.size(); ++k) {
      const double r = o[k] - y[k];
      sum += r * r;
      dv[k] = scale * r;
    }
    out.loss = sum / static_cast<double>(target.size());
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");

  for (std::size_t l = model.layers(); l-- > 0;) {
    const std::size_t in_dim = dims[l], out_dim = dims[l + 1];
    const Matrix& a = cache.inputs[l];
    double* gw = out.grads.data() + model.weight_offset(l);
    double* gb = out.grads.data() + model.bias_offset(l);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const auto x = a.row(i);
      const auto dz = delta.row(i);
      for (std::size_t j = 0; j < out_dim; ++j) gb[j] += dz[j];
      for (std::size_t k = 0; k < in_dim; ++k) {
        const double xv = x[k];
        double* g = gw + k * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) g[j] += xv * dz[j];
      }
    }
    if (l == 0) break;

    // delta_prev = (delta * W^T) .* silu'(pre[l-1])
    const double* w = p.data() + model.weight_offset(l);
    std::vector<double> wt(in_dim * out_dim);
    for (std::size_t k = 0; k < in_dim; ++k) {
      for (std::size_t j = 0; j < out_dim; ++j) wt[j * in_dim + k] = w[k * out_dim + j];
    }
    Matrix prev(delta.rows(), in_dim);
    const Matrix& z = cache.pre[l - 1];
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      double* pr = prev.row(i).data();
      const auto dz = delta.row(i);
      for (std::size_t j = 0; j < out_dim; ++j) {
        const double dv = dz[j];
        const double* wj = wt.data() + j * in_dim;
        for (std::size_t k = 0; k < in_dim; ++k) pr[k] += dv * wj[k];
      }
      const auto zr = z.row(i);
      for (std::size_t k = 0; k < in_dim; ++k) {
        const double s = sigmoid(zr[k]);
        pr[k] *= s * (1.0 + zr[k] * (1.0 - s));
      }
    }
    delta = std::move(prev);
  }
  return out;
}

LossAndGrads loss_and_grads(const DenoiserModel& model, const Batch& x0, const NoiseBatch& eps,
                            std::span<const std::size_t> t, const DiffusionSchedule& sched) {
  const Batch x_t = forward_diffuse(x0, eps, t, sched);
  return mse_loss_and_grads(model, x_t, t, eps);
}

void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionError("optimizer: parameter, gradient and state sizes differ");
  }
  if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); })) {
    throw NumericError("optimizer received non-finite gradients");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = c.beta1 * state.m[k] + (1.0 - c.beta1) * grads[k];
    state.v[k] = c.beta2 * state.v[k] + (1.0 - c.beta2) * grads[k] * grads[k];
    const double m_hat = state.m[k] / bc1;
    const double v_hat = state.v[k] / bc2;
    params[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr const char* kMagic = "immiscible-denoiser-checkpoint";

std::istringstream next_record(std::istream& in, const std::string& key) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string got;
    ss >> got;
    if (got != key) throw FormatError("checkpoint: expected '" + key + "', found '" + got + "'");
    return ss;
  }
  throw FormatError("checkpoint: missing '" + key + "'");
}

template <class T>
T read_value(std::istringstream& ss, const std::string& what) {
  T v{};
  if (!(ss >> v)) throw FormatError("checkpoint: bad value for " + what);
  return v;
}

double read_real(std::istream& in, const std::string& what) {
  std::string tok;
  if (!(in >> tok)) throw FormatError("checkpoint: missing value for " + what);
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw FormatError("checkpoint: bad real '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint: bad real '" + tok + "' for " + what);
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const DenoiserModel& m = ckpt.model;
  out << kMagic << " 1\n";
  out << "layer_dims";
  for (std::size_t d : m.layer_dims()) out << ' ' << d;
  out << "\nembed_dim " << m.embed_dim() << "\n";
  out << "total_steps " << m.total_steps() << "\n";
  out << "activation " << DenoiserModel::kActivation << "\n";
  out << "optimizer adam lr " << fmt17(ckpt.adam.lr) << " beta1 " << fmt17(ckpt.adam.beta1)
      << " beta2 " << fmt17(ckpt.adam.beta2) << " eps " << fmt17(ckpt.adam.eps) << " step "
      << ckpt.optimizer_step << "\n";
  if (ckpt.schedule) {
    out << "schedule linear steps " << ckpt.schedule->steps << " beta_start "
        << fmt17(ckpt.schedule->beta_start) << " beta_end " << fmt17(ckpt.schedule->beta_end) << "\n";
  } else {
    out << "schedule none\n";
  }
  for (std::size_t l = 0; l < m.layers(); ++l) {
    const std::size_t in_dim = m.layer_dims()[l], out_dim = m.layer_dims()[l + 1];
    out << "weights " << l << ' ' << in_dim << ' ' << out_dim << "\n";
    const auto p = m.params();
    for (std::size_t k = 0; k < in_dim; ++k) {
      for (std::size_t j = 0; j < out_dim; ++j) {
        out << (j ? " " : "") << fmt17(p[m.weight_offset(l) + k * out_dim + j]);
      }
      out << "\n";
    }
    out << "bias " << l << ' ' << out_dim << "\n";
    for (std::size_t j = 0; j < out_dim; ++j) out << (j ? " " : "") << fmt17(p[m.bias_offset(l) + j]);
    out << "\n";
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  {
    auto ss = next_record(in, kMagic);
    if (read_value<int>(ss, "version") != 1) throw FormatError("checkpoint: unsupported version");
  }
  std::vector<std::size_t> dims;
  {
    auto ss = next_record(in, "layer_dims");
    std::size_t d = 0;
    while (ss >> d) dims.push_back(d);
  }
  auto ss_embed = next_record(in, "embed_dim");
  const auto embed = read_value<std::size_t>(ss_embed, "embed_dim");
  auto ss_steps = next_record(in, "total_steps");
  const auto steps = read_value<std::size_t>(ss_steps, "total_steps");
  {
    auto ss = next_record(in, "activation");
    if (read_value<std::string>(ss, "activation") != DenoiserModel::kActivation) {
      throw FormatError("checkpoint: unsupported activation");
    }
  }
  Checkpoint ckpt{DenoiserModel(dims, embed, steps), {}, 0, std::nullopt};
  {
    auto ss = next_record(in, "optimizer");
    if (read_value<std::string>(ss, "optimizer kind") != "adam") throw FormatError("checkpoint: unsupported optimizer");
    std::string key;
    while (ss >> key) {
      if (key == "step") {
        ckpt.optimizer_step = read_value<std::uint64_t>(ss, key);
        continue;
      }
      const double v = read_real(ss, key);
      if (key == "lr") ckpt.adam.lr = v;
      else if (key == "beta1") ckpt.adam.beta1 = v;
      else if (key == "beta2") ckpt.adam.beta2 = v;
      else if (key == "eps") ckpt.adam.eps = v;
      else throw FormatError("checkpoint: unknown optimizer field '" + key + "'");
    }
  }
  {
    auto ss = next_record(in, "schedule");
    const auto kind = read_value<std::string>(ss, "schedule kind");
    if (kind == "linear") {
      ScheduleParams sp;
      std::string key;
      while (ss >> key) {
        if (key == "steps") sp.steps = read_value<std::size_t>(ss, key);
        else if (key == "beta_start") sp.beta_start = read_real(ss, key);
        else if (key == "beta_end") sp.beta_end = read_real(ss, key);
        else throw FormatError("checkpoint: unknown schedule field '" + key + "'");
      }
      ckpt.schedule = sp;
    } else if (kind != "none") {
      throw FormatError("checkpoint: unknown schedule kind '" + kind + "'");
    }
  }
  DenoiserModel& m = ckpt.model;
  auto p = m.params();
  for (std::size_t l = 0; l < m.layers(); ++l) {
    const std::size_t in_dim = m.layer_dims()[l], out_dim = m.layer_dims()[l + 1];
    {
      auto ss = next_record(in, "weights");
      if (read_value<std::size_t>(ss, "layer") != l || read_value<std::size_t>(ss, "in") != in_dim ||
          read_value<std::size_t>(ss, "out") != out_dim) {
        throw FormatError("checkpoint: weight block header mismatch at layer " + std::to_string(l));
      }
    }
    for (std::size_t k = 0; k < in_dim * out_dim; ++k) p[m.weight_offset(l) + k] = read_real(in, "weight");
    {
      auto ss = next_record(in, "bias");
      if (read_value<std::size_t>(ss, "layer") != l || read_value<std::size_t>(ss, "out") != out_dim) {
        throw FormatError("checkpoint: bias block header mismatch at layer " + std::to_string(l));
      }
    }
    for (std::size_t j = 0; j < out_dim; ++j) p[m.bias_offset(l) + j] = read_real(in, "bias");
  }
  next_record(in, "end");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace immiscible

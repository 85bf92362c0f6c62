#include "immiscible/config.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "immiscible/errors.hpp"

namespace immiscible {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::uint64_t parse_uint(std::string_view key, std::string_view value) {
  const std::string v(value);
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::logic_error&) {
    throw ArgumentError("config key '" + std::string(key) + "': expected a nonnegative integer, got '" + v + "'");
  }
}

double parse_double(std::string_view key, std::string_view value) {
  const std::string v(value);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::logic_error&) {
    throw ArgumentError("config key '" + std::string(key) + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ArgumentError("config key '" + std::string(key) + "': expected on/off, got '" + std::string(value) + "'");
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ScheduleParams TrainConfig::schedule_params() const {
  const DiffusionSchedule def = make_default_schedule(diffusion_steps);
  return {diffusion_steps, beta_start.value_or(def.beta_start()), beta_end.value_or(def.beta_end())};
}

DiffusionSchedule TrainConfig::schedule() const {
  const ScheduleParams p = schedule_params();
  return make_schedule(p.steps, p.beta_start, p.beta_end);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (mode != AssignMode::Vanilla && batch_size < 2) {
    throw ArgumentError("batch_size must be >= 2 for assignment modes");
  }
  if (shards < 1 || shards > batch_size) throw ArgumentError("shards must lie in [1, batch_size]");
  if (steps < 1) throw ArgumentError("steps must be >= 1");
  if (eval_every < 1 || steps % eval_every != 0) throw ArgumentError("eval_every must divide steps");
  if (sampler_steps < 1 || sampler_steps > diffusion_steps) {
    throw ArgumentError("sampler_steps must lie in [1, T]");
  }
  if (eval_samples < 1) throw ArgumentError("eval_samples must be >= 1");
  if (swd_projections < 1) throw ArgumentError("swd_projections must be >= 1");
  if (hidden_layers < 1 || hidden_width < 1) throw ArgumentError("model needs a hidden layer");
  if (embed_dim < 2 || embed_dim % 2 != 0) throw ArgumentError("embed_dim must be even and >= 2");
  if (!(adam.lr > 0.0)) throw ArgumentError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ArgumentError("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ArgumentError("adam_eps must be positive");
  if (!(dataset.scale > 0.0) || !(dataset.mode_std >= 0.0)) throw ArgumentError("bad dataset scale/std");
  (void)schedule();  // schedule parameter checks
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "dataset",     "dataset_scale", "dataset_std",   "batch_size",   "mode",
      "metric",      "quantize",      "shards",        "T",            "beta_start",
      "beta_end",    "embed_dim",     "hidden_width",  "hidden_layers", "lr",
      "adam_beta1",  "adam_beta2",    "adam_eps",      "steps",        "eval_every",
      "sampler_steps", "eval_samples", "swd_projections", "seed",       "eval_seed",
      "record_wall_time", "out_dir"};
  return keys;
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "dataset") cfg.dataset.name = parse_toy_name(value);
  else if (key == "dataset_scale") cfg.dataset.scale = parse_double(key, value);
  else if (key == "dataset_std") cfg.dataset.mode_std = parse_double(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_uint(key, value);
  else if (key == "mode") cfg.mode = parse_assign_mode(value);
  else if (key == "metric") {
    if (value == "auto") cfg.metric.reset();
    else cfg.metric = parse_metric(value);
  } else if (key == "quantize") cfg.quantize = parse_bool(key, value);
  else if (key == "shards") cfg.shards = parse_uint(key, value);
  else if (key == "T") cfg.diffusion_steps = parse_uint(key, value);
  else if (key == "beta_start") {
    if (value == "auto") cfg.beta_start.reset();
    else cfg.beta_start = parse_double(key, value);
  } else if (key == "beta_end") {
    if (value == "auto") cfg.beta_end.reset();
    else cfg.beta_end = parse_double(key, value);
  } else if (key == "embed_dim") cfg.embed_dim = parse_uint(key, value);
  else if (key == "hidden_width") cfg.hidden_width = parse_uint(key, value);
  else if (key == "hidden_layers") cfg.hidden_layers = parse_uint(key, value);
  else if (key == "lr") cfg.adam.lr = parse_double(key, value);
  else if (key == "adam_beta1") cfg.adam.beta1 = parse_double(key, value);
  else if (key == "adam_beta2") cfg.adam.beta2 = parse_double(key, value);
  else if (key == "adam_eps") cfg.adam.eps = parse_double(key, value);
  else if (key == "steps") cfg.steps = parse_uint(key, value);
  else if (key == "eval_every") cfg.eval_every = parse_uint(key, value);
  else if (key == "sampler_steps") cfg.sampler_steps = parse_uint(key, value);
  else if (key == "eval_samples") cfg.eval_samples = parse_uint(key, value);
  else if (key == "swd_projections") cfg.swd_projections = parse_uint(key, value);
  else if (key == "seed") cfg.seed = parse_uint(key, value);
  else if (key == "eval_seed") cfg.eval_seed = parse_uint(key, value);
  else if (key == "record_wall_time") cfg.record_wall_time = parse_bool(key, value);
  else if (key == "out_dir") cfg.out_dir = std::string(value);
  else throw ArgumentError("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::istream& in, TrainConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set_config_value(base, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ArgumentError& e) {
      throw ArgumentError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config " + path.string());
  return parse_config(in, std::move(base));
}

std::string to_config_text(const TrainConfig& cfg) {
  const ScheduleParams sp = cfg.schedule_params();
  std::ostringstream out;
  out << "dataset=" << to_string(cfg.dataset.name) << "\n"
      << "dataset_scale=" << format_real(cfg.dataset.scale) << "\n"
      << "dataset_std=" << format_real(cfg.dataset.mode_std) << "\n"
      << "batch_size=" << cfg.batch_size << "\n"
      << "mode=" << to_string(cfg.mode) << "\n"
      << "metric=" << to_string(cfg.effective_metric()) << "\n"
      << "quantize=" << (cfg.quantize ? "on" : "off") << "\n"
      << "shards=" << cfg.shards << "\n"
      << "T=" << cfg.diffusion_steps << "\n"
      << "beta_start=" << format_real(sp.beta_start) << "\n"
      << "beta_end=" << format_real(sp.beta_end) << "\n"
      << "embed_dim=" << cfg.embed_dim << "\n"
      << "hidden_width=" << cfg.hidden_width << "\n"
      << "hidden_layers=" << cfg.hidden_layers << "\n"
      << "lr=" << format_real(cfg.adam.lr) << "\n"
      << "adam_beta1=" << format_real(cfg.adam.beta1) << "\n"
      << "adam_beta2=" << format_real(cfg.adam.beta2) << "\n"
      << "adam_eps=" << format_real(cfg.adam.eps) << "\n"
      << "steps=" << cfg.steps << "\n"
      << "eval_every=" << cfg.eval_every << "\n"
      << "sampler_steps=" << cfg.sampler_steps << "\n"
      << "eval_samples=" << cfg.eval_samples << "\n"
      << "swd_projections=" << cfg.swd_projections << "\n"
      << "seed=" << cfg.seed << "\n"
      << "eval_seed=" << cfg.eval_seed << "\n"
      << "record_wall_time=" << (cfg.record_wall_time ? "on" : "off") << "\n"
      << "out_dir=" << cfg.out_dir.string() << "\n";
  return out.str();
}

}  // namespace immiscible

#include "immiscible/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "immiscible/errors.hpp"
#include "immiscible/rng.hpp"

namespace immiscible {

ToyName parse_toy_name(std::string_view name) {
  if (name == "gauss8") return ToyName::Gauss8;
  if (name == "checkerboard") return ToyName::Checkerboard;
  if (name == "swissroll") return ToyName::SwissRoll;
  if (name == "twomoons") return ToyName::TwoMoons;
  throw ArgumentError("unknown toy dataset '" + std::string(name) + "'");
}

std::string to_string(ToyName name) {
  switch (name) {
    case ToyName::Gauss8:
      return "gauss8";
    case ToyName::Checkerboard:
      return "checkerboard";
    case ToyName::SwissRoll:
      return "swissroll";
    case ToyName::TwoMoons:
      return "twomoons";
  }
  return "?";
}

std::vector<std::vector<double>> gauss8_centers(double scale) {
  std::vector<std::vector<double>> centers;
  for (int k = 0; k < 8; ++k) {
    const double angle = k * std::numbers::pi / 4.0;
    centers.push_back({scale * std::cos(angle), scale * std::sin(angle)});
  }
  return centers;
}

Batch sample_toy(const ToyDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("sample_toy needs n >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Batch out(n, 2);
  const double pi = std::numbers::pi;

  switch (ds.name) {
    case ToyName::Gauss8: {
      const auto centers = gauss8_centers(ds.scale);
      std::uniform_int_distribution<int> pick(0, 7);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[pick(rng)];
        out(i, 0) = c[0] + ds.mode_std * normal(rng);
        out(i, 1) = c[1] + ds.mode_std * normal(rng);
      }
      break;
    }
    case ToyName::Checkerboard: {
      // Cells of side scale/2; a point lands on a dark cell when the parity of
      // its column and row indices agree.
      const double cell = ds.scale / 2.0;
      std::uniform_int_distribution<int> col(0, 3);
      std::uniform_int_distribution<int> half(0, 1);
      for (std::size_t i = 0; i < n; ++i) {
        const int cx = col(rng);
        const int cy = 2 * half(rng) + (cx % 2);
        out(i, 0) = -ds.scale + cell * (cx + unit(rng));
        out(i, 1) = -ds.scale + cell * (cy + unit(rng));
      }
      break;
    }
    case ToyName::SwissRoll: {
      for (std::size_t i = 0; i < n; ++i) {
        const double t = 1.5 * pi * (1.0 + 2.0 * unit(rng));
        const double x = t * std::cos(t) + 0.5 * normal(rng);
        const double y = t * std::sin(t) + 0.5 * normal(rng);
        // |t| <= 4.5 pi ~ 14.1
        out(i, 0) = ds.scale * x / 14.2;
        out(i, 1) = ds.scale * y / 14.2;
      }
      break;
    }
    case ToyName::TwoMoons: {
      std::uniform_int_distribution<int> moon(0, 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double a = pi * unit(rng);
        double x = 0.0, y = 0.0;
        if (moon(rng) == 0) {
          x = std::cos(a);
          y = std::sin(a);
        } else {
          x = 1.0 - std::cos(a);
          y = 0.5 - std::sin(a);
        }
        x += 0.05 * normal(rng);
        y += 0.05 * normal(rng);
        // centre the pair on the origin
        out(i, 0) = ds.scale * (x - 0.5);
        out(i, 1) = ds.scale * (y - 0.25);
      }
      break;
    }
  }
  return out;
}

NoiseBatch sample_noise(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ArgumentError("sample_noise needs n >= 1 and d >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  NoiseBatch out(n, d);
  for (double& v : out.values()) v = normal(rng);
  return out;
}

double pixel_to_unit(std::uint8_t byte) { return byte / 127.5 - 1.0; }

std::uint8_t unit_to_pixel(double value) {
  return static_cast<std::uint8_t>(std::lround((value + 1.0) * 127.5));
}

ImageDataset parse_cifar10_binary(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t R = ImageDataset::kRecordBytes;
  if (bytes.empty()) throw FormatError("empty CIFAR-10 file");
  if (bytes.size() % R != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % R;
    throw FormatError("truncated CIFAR-10 record at byte offset " + std::to_string(offset) + " (" +
                      std::to_string(bytes.size() % R) + " of " + std::to_string(R) +
                      " bytes present)");
  }
  const std::size_t n = bytes.size() / R;
  ImageDataset ds;
  ds.pixels = Batch(n, ImageDataset::kPixels);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * R;
    if (bytes[base] > 9) {
      throw FormatError("label " + std::to_string(bytes[base]) + " out of range at byte offset " +
                        std::to_string(base));
    }
    ds.labels[i] = bytes[base];
    auto row = ds.pixels.row(i);
    for (std::size_t k = 0; k < ImageDataset::kPixels; ++k) row[k] = pixel_to_unit(bytes[base + 1 + k]);
  }
  return ds;
}

ImageDataset load_cifar10_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open CIFAR-10 file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_cifar10_binary(bytes);
}

std::vector<std::uint8_t> serialize_cifar10_binary(const ImageDataset& ds) {
  std::vector<std::uint8_t> out;
  out.reserve(ds.size() * ImageDataset::kRecordBytes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.push_back(static_cast<std::uint8_t>(ds.labels[i]));
    for (double v : ds.pixels.row(i)) out.push_back(unit_to_pixel(v));
  }
  return out;
}

}  // namespace immiscible

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "immiscible/matrix.hpp"

namespace immiscible {

enum class ToyName { Gauss8, Checkerboard, SwissRoll, TwoMoons };

ToyName parse_toy_name(std::string_view name);  // gauss8, checkerboard, swissroll, twomoons
std::string to_string(ToyName name);

// Two-dimensional toy distribution.
//  - Gauss8: eight isotropic Gaussians (std `mode_std`) centred on a ring of radius `scale`.
//  - Checkerboard: uniform on the dark squares of a 4x4 board spanning [-scale, scale]^2.
//  - SwissRoll: noisy spiral rescaled into roughly [-scale, scale]^2.
//  - TwoMoons: two interleaved half circles, rescaled by `scale` / 2.
struct ToyDataset {
  ToyName name = ToyName::Gauss8;
  double scale = 2.0;
  double mode_std = 0.1;
  static constexpr std::size_t d = 2;
};

// Centres of the Gauss8 modes, counter-clockwise from (scale, 0).
std::vector<std::vector<double>> gauss8_centers(double scale);

Batch sample_toy(const ToyDataset& ds, std::size_t n, std::uint64_t seed);

// n x d i.i.d. standard-normal draws.
NoiseBatch sample_noise(std::size_t n, std::size_t d, std::uint64_t seed);

// CIFAR-10 binary batch: per record one label byte then 3072 pixel bytes
// (1024 R, 1024 G, 1024 B, each plane row-major 32x32).
struct ImageDataset {
  static constexpr std::size_t kPixels = 3072;
  static constexpr std::size_t kRecordBytes = kPixels + 1;

  Batch pixels;  // n x 3072, byte b mapped to b / 127.5 - 1, file (planar) order
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

double pixel_to_unit(std::uint8_t byte);
std::uint8_t unit_to_pixel(double value);

// Parses an in-memory CIFAR-10 binary blob; throws FormatError naming the
// byte offset of the first bad or truncated record.
ImageDataset parse_cifar10_binary(const std::vector<std::uint8_t>& bytes);
ImageDataset load_cifar10_binary(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_cifar10_binary(const ImageDataset& ds);

}  // namespace immiscible

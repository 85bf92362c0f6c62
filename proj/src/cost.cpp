#include "immiscible/cost.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "immiscible/errors.hpp"
#include "immiscible/float16.hpp"

namespace immiscible {
namespace {

// Coordinates are consumed in blocks of kBlock. Within a block each
// (data, noise) pair accumulates into one vector of independent lanes, which
// is reduced in a fixed order and added to the double-precision total. Every
// entry follows exactly this sequence whatever tile it lands in, so the
// result depends only on the two rows, which is what makes sharding bit-exact.
constexpr std::size_t kBlock = 256;
constexpr std::size_t kNoiseTile = 64;
constexpr std::size_t kRowsPerTile = 2;
constexpr std::size_t kColsPerTile = 4;

template <class T>
using Vec [[gnu::vector_size(32)]] = T;

template <class T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <Metric M, class V>
inline V term(V diff) {
  if constexpr (M == Metric::L1) {
    return diff < 0 ? -diff : diff;
  } else {
    return diff * diff;
  }
}

template <Metric M, class T>
inline T term_scalar(T diff) {
  if constexpr (M == Metric::L1) {
    return std::fabs(diff);
  } else {
    return diff * diff;
  }
}

// Adds the block partials of a TI x TJ tile of pairs to out(a, b).
template <Metric M, class T, std::size_t TI, std::size_t TJ>
inline void tile(const T* const (&xs)[TI], const T* const (&ys)[TJ], std::size_t len, double* out,
                 std::size_t ld) {
  using V = Vec<T>;
  constexpr std::size_t L = sizeof(V) / sizeof(T);
  V acc[TI][TJ] = {};
  std::size_t k = 0;
  for (; k + L <= len; k += L) {
    V xv[TI], yv[TJ];
    for (std::size_t a = 0; a < TI; ++a) xv[a] = load(xs[a] + k);
    for (std::size_t b = 0; b < TJ; ++b) yv[b] = load(ys[b] + k);
    for (std::size_t a = 0; a < TI; ++a) {
      for (std::size_t b = 0; b < TJ; ++b) acc[a][b] += term<M>(xv[a] - yv[b]);
    }
  }
  for (std::size_t a = 0; a < TI; ++a) {
    for (std::size_t b = 0; b < TJ; ++b) {
      T partial = 0;
      for (std::size_t r = k; r < len; ++r) partial += term_scalar<M>(xs[a][r] - ys[b][r]);
      for (std::size_t l = 0; l < L; ++l) partial += acc[a][b][l];
      out[a * ld + b] += static_cast<double>(partial);
    }
  }
}

template <Metric M, class T, std::size_t TI>
inline void tile_row(const T* const (&xs)[TI], const T* noise, std::size_t d, std::size_t k0,
                     std::size_t len, std::size_t j0, std::size_t j1, double* out, std::size_t ld) {
  std::size_t j = j0;
  for (; j + kColsPerTile <= j1; j += kColsPerTile) {
    const T* const ys[kColsPerTile] = {noise + j * d + k0, noise + (j + 1) * d + k0,
                                       noise + (j + 2) * d + k0, noise + (j + 3) * d + k0};
    tile<M, T, TI, kColsPerTile>(xs, ys, len, out + j, ld);
  }
  for (; j < j1; ++j) {
    const T* const ys[1] = {noise + j * d + k0};
    tile<M, T, TI, 1>(xs, ys, len, out + j, ld);
  }
}

// Fills out[(i - r0) * n + j] for data rows [r0, r1) against all noise rows.
template <Metric M, class T>
void cost_rows(const T* data, const T* noise, std::size_t n, std::size_t d, std::size_t r0,
               std::size_t r1, double* out) {
  std::fill(out, out + (r1 - r0) * n, 0.0);
  for (std::size_t k0 = 0; k0 < d; k0 += kBlock) {
    const std::size_t len = std::min(kBlock, d - k0);
    for (std::size_t j0 = 0; j0 < n; j0 += kNoiseTile) {
      const std::size_t j1 = std::min(n, j0 + kNoiseTile);
      std::size_t i = r0;
      for (; i + kRowsPerTile <= r1; i += kRowsPerTile) {
        const T* const xs[kRowsPerTile] = {data + i * d + k0, data + (i + 1) * d + k0};
        tile_row<M, T, kRowsPerTile>(xs, noise, d, k0, len, j0, j1, out + (i - r0) * n, n);
      }
      for (; i < r1; ++i) {
        const T* const xs[1] = {data + i * d + k0};
        tile_row<M, T, 1>(xs, noise, d, k0, len, j0, j1, out + (i - r0) * n, n);
      }
    }
  }
  if constexpr (M == Metric::L2) {
    for (std::size_t idx = 0; idx < (r1 - r0) * n; ++idx) out[idx] = std::sqrt(out[idx]);
  }
}

template <class T>
void cost_rows_dispatch(Metric metric, const T* data, const T* noise, std::size_t n, std::size_t d,
                        std::size_t r0, std::size_t r1, double* out) {
  switch (metric) {
    case Metric::L1:
      return cost_rows<Metric::L1>(data, noise, n, d, r0, r1, out);
    case Metric::L2:
      return cost_rows<Metric::L2>(data, noise, n, d, r0, r1, out);
    case Metric::L2Sq:
      return cost_rows<Metric::L2Sq>(data, noise, n, d, r0, r1, out);
  }
}

void check_shapes(const Matrix& data, const Matrix& noise) {
  if (data.rows() != noise.rows() || data.cols() != noise.cols()) {
    throw DimensionError("data is " + std::to_string(data.rows()) + "x" +
                         std::to_string(data.cols()) + " but noise is " +
                         std::to_string(noise.rows()) + "x" + std::to_string(noise.cols()));
  }
  if (data.rows() == 0 || data.cols() == 0) throw DimensionError("empty batch");
}

template <class T>
CostMatrix compute(const T* data, const T* noise, std::size_t n, std::size_t d, Metric metric,
                   std::size_t shards) {
  if (shards < 1 || shards > n) {
    throw ArgumentError("shard count " + std::to_string(shards) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  std::vector<double> out(n * n);
  auto bound = [&](std::size_t s) { return s * n / shards; };
  if (shards == 1) {
    cost_rows_dispatch(metric, data, noise, n, d, 0, n, out.data());
  } else {
    std::vector<std::jthread> workers;
    workers.reserve(shards - 1);
    for (std::size_t s = 1; s < shards; ++s) {
      const std::size_t r0 = bound(s), r1 = bound(s + 1);
      workers.emplace_back([&, r0, r1] {
        cost_rows_dispatch(metric, data, noise, n, d, r0, r1, out.data() + r0 * n);
      });
    }
    cost_rows_dispatch(metric, data, noise, n, d, 0, bound(1), out.data());
  }
  return CostMatrix(Matrix(n, n, std::move(out)));
}

}  // namespace

Metric parse_metric(std::string_view name) {
  if (name == "l1" || name == "L1") return Metric::L1;
  if (name == "l2" || name == "L2") return Metric::L2;
  if (name == "l2sq" || name == "L2SQ") return Metric::L2Sq;
  throw ArgumentError("unknown metric '" + std::string(name) + "' (expected l1, l2 or l2sq)");
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::L1:
      return "l1";
    case Metric::L2:
      return "l2";
    case Metric::L2Sq:
      return "l2sq";
  }
  return "?";
}

CostMatrix pairwise_cost(const Batch& data, const NoiseBatch& noise, Metric metric) {
  return sharded_pairwise_cost(data, noise, metric, 1);
}

CostMatrix sharded_pairwise_cost(const Batch& data, const NoiseBatch& noise, Metric metric,
                                 std::size_t shards) {
  check_shapes(data, noise);
  return compute(data.values().data(), noise.values().data(), data.rows(), data.cols(), metric,
                 shards);
}

template <class M>
M quantize_batch(const M& batch) {
  M out(batch.rows(), batch.cols());
  auto src = batch.values();
  auto dst = out.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = fp16::round(src[k]);
  return out;
}

template Batch quantize_batch(const Batch&);
template NoiseBatch quantize_batch(const NoiseBatch&);

CostMatrix pairwise_cost_half(const Batch& data, const NoiseBatch& noise, Metric metric,
                              std::size_t shards) {
  check_shapes(data, noise);
  auto narrow = [](std::span<const double> v) {
    std::vector<float> out(v.size());
    // binary16 values are exactly representable in single precision
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = static_cast<float>(fp16::round(v[k]));
    return out;
  };
  const std::vector<float> x = narrow(data.values());
  const std::vector<float> y = narrow(noise.values());
  return compute(x.data(), y.data(), data.rows(), data.cols(), metric, shards);
}

}  // namespace immiscible

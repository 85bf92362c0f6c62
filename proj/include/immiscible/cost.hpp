#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "immiscible/lap.hpp"
#include "immiscible/matrix.hpp"

namespace immiscible {

enum class Metric { L1, L2, L2Sq };

Metric parse_metric(std::string_view name);  // "l1", "l2", "l2sq"
std::string to_string(Metric m);

// costs(i, j) = distance between data row i and noise row j.
CostMatrix pairwise_cost(const Batch& data, const NoiseBatch& noise, Metric metric);

// Same result as pairwise_cost, bit for bit, with the data rows split into
// `shards` contiguous ranges evaluated on separate threads and concatenated.
CostMatrix sharded_pairwise_cost(const Batch& data, const NoiseBatch& noise, Metric metric,
                                 std::size_t shards);

// Every entry rounded to the nearest binary16 value. Throws RangeError for
// entries outside the binary16 range.
template <class M>
M quantize_batch(const M& batch);

extern template Batch quantize_batch(const Batch&);
extern template NoiseBatch quantize_batch(const NoiseBatch&);

// Cost over binary16-quantized copies of both operands. The quantized values
// are held in single precision, so this path moves half the memory of the
// double-precision kernel; partial sums are flushed to double every block.
CostMatrix pairwise_cost_half(const Batch& data, const NoiseBatch& noise, Metric metric,
                              std::size_t shards = 1);

}  // namespace immiscible

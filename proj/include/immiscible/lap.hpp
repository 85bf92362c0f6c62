#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "immiscible/matrix.hpp"

namespace immiscible {

// Square matrix of finite, nonnegative pairwise costs. Rows index data
// points, columns index noise points.
class CostMatrix {
 public:
  // Throws DimensionError if not square, InvalidCostError on NaN/inf/negative.
  explicit CostMatrix(Matrix costs);

  std::size_t n() const { return costs_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return costs_(i, j); }
  std::span<const double> row(std::size_t i) const { return costs_.row(i); }
  const Matrix& matrix() const { return costs_; }

 private:
  Matrix costs_;
};

struct Assignment {
  std::vector<int> perm;  // perm[i] = column assigned to row i
  double total_cost = 0.0;
};

// Sum of cost(i, perm[i]) accumulated in row order.
double permutation_cost(const CostMatrix& cost, std::span<const int> perm);

bool is_permutation_of_range(std::span<const int> perm);

// Exact minimum-cost assignment using successive shortest augmenting paths
// with dual potentials (O(n^3) worst case). Among equally short candidates
// the lowest column index is taken, so output is deterministic.
Assignment solve_lap(const CostMatrix& cost);

// Exhaustive search over all n! permutations in lexicographic order. The
// first minimizer wins, i.e. the lexicographically smallest one. n <= 10.
Assignment brute_force_lap(const CostMatrix& cost);

inline constexpr std::size_t kBruteForceLimit = 10;

// Number of solve_lap calls made by this process so far.
std::uint64_t lap_invocations();

}  // namespace immiscible

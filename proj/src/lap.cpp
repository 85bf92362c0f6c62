#include "immiscible/lap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "immiscible/errors.hpp"

namespace immiscible {
namespace {

std::atomic<std::uint64_t> g_lap_calls{0};

}  // namespace

CostMatrix::CostMatrix(Matrix costs) : costs_(std::move(costs)) {
  if (costs_.rows() != costs_.cols()) {
    throw DimensionError("cost matrix must be square, got " + std::to_string(costs_.rows()) + "x" +
                         std::to_string(costs_.cols()));
  }
  if (costs_.rows() == 0) throw DimensionError("cost matrix is empty");
  for (std::size_t i = 0; i < costs_.rows(); ++i) {
    for (std::size_t j = 0; j < costs_.cols(); ++j) {
      const double c = costs_(i, j);
      if (!std::isfinite(c) || c < 0.0) {
        throw InvalidCostError("invalid cost " + std::to_string(c) + " at (" + std::to_string(i) +
                               ", " + std::to_string(j) + ")");
      }
    }
  }
}

double permutation_cost(const CostMatrix& cost, std::span<const int> perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += cost(i, static_cast<std::size_t>(perm[i]));
  return total;
}

bool is_permutation_of_range(std::span<const int> perm) {
  std::vector<bool> seen(perm.size(), false);
  for (int p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= perm.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

Assignment solve_lap(const CostMatrix& cost) {
  g_lap_calls.fetch_add(1, std::memory_order_relaxed);

  const std::size_t n = cost.n();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr int kNone = -1;

  std::vector<double> u(n, 0.0);  // row potentials
  std::vector<double> v(n, 0.0);  // column potentials
  std::vector<int> col_of_row(n, kNone);
  std::vector<int> row_of_col(n, kNone);

  std::vector<double> shortest(n);
  std::vector<int> pred(n);
  std::vector<char> col_done(n);
  std::vector<int> remaining(n);  // columns not yet reached by the current search
  std::vector<int> scanned_rows;
  scanned_rows.reserve(n);

  for (std::size_t start = 0; start < n; ++start) {
    std::fill(shortest.begin(), shortest.end(), kInf);
    std::fill(pred.begin(), pred.end(), kNone);
    std::fill(col_done.begin(), col_done.end(), 0);
    std::iota(remaining.begin(), remaining.end(), 0);
    std::size_t num_remaining = n;
    scanned_rows.clear();

    int sink = kNone;
    double min_val = 0.0;
    std::size_t i = start;

    // Dijkstra over reduced costs until a free column is reached.
    while (sink == kNone) {
      scanned_rows.push_back(static_cast<int>(i));
      const double* crow = cost.row(i).data();
      const double ui = u[i];

      double lowest = kInf;
      std::size_t best_pos = n;
      int best = kNone;
      for (std::size_t pos = 0; pos < num_remaining; ++pos) {
        const int j = remaining[pos];
        const double r = min_val + crow[j] - ui - v[j];
        if (r < shortest[j]) {
          shortest[j] = r;
          pred[j] = static_cast<int>(i);
        }
        // Remaining columns are unordered, so equal distances compare by index.
        if (shortest[j] < lowest || (shortest[j] == lowest && j < best)) {
          lowest = shortest[j];
          best = j;
          best_pos = pos;
        }
      }
      if (best == kNone || lowest == kInf) throw InvalidCostError("assignment problem is infeasible");

      min_val = lowest;
      col_done[best] = 1;
      remaining[best_pos] = remaining[--num_remaining];
      if (row_of_col[best] == kNone) {
        sink = best;
      } else {
        i = static_cast<std::size_t>(row_of_col[best]);
      }
    }

    // Dual update keeps reduced costs nonnegative and tight on the tree.
    u[start] += min_val;
    for (int r : scanned_rows) {
      if (static_cast<std::size_t>(r) == start) continue;
      u[r] += min_val - shortest[col_of_row[r]];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (col_done[j]) v[j] -= min_val - shortest[j];
    }

    // Augment along the predecessor chain.
    int j = sink;
    while (true) {
      const int r = pred[j];
      row_of_col[j] = r;
      std::swap(col_of_row[r], j);
      if (static_cast<std::size_t>(r) == start) break;
    }
  }

  Assignment out;
  out.perm = std::move(col_of_row);
  out.total_cost = permutation_cost(cost, out.perm);
  return out;
}

Assignment brute_force_lap(const CostMatrix& cost) {
  const std::size_t n = cost.n();
  if (n > kBruteForceLimit) {
    throw SizeLimitError("brute force assignment limited to n <= " +
                         std::to_string(kBruteForceLimit) + ", got " + std::to_string(n));
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  Assignment best{perm, permutation_cost(cost, perm)};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double c = permutation_cost(cost, perm);
    if (c < best.total_cost) best = {perm, c};
  }
  return best;
}

std::uint64_t lap_invocations() { return g_lap_calls.load(std::memory_order_relaxed); }

}  // namespace immiscible

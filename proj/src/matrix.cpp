#include "immiscible/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "immiscible/errors.hpp"

namespace immiscible {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix storage holds " + std::to_string(data_.size()) +
                         " values, expected " + std::to_string(rows_ * cols_));
  }
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw DimensionError("ragged rows: row " + std::to_string(r) + " has " +
                           std::to_string(rows[r].size()) + " entries, expected " +
                           std::to_string(cols));
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

}  // namespace immiscible

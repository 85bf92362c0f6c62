#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace immiscible {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Data points x0, one per row.
class Batch : public Matrix {
 public:
  using Matrix::Matrix;
  explicit Batch(Matrix m) : Matrix(std::move(m)) {}
};

// Standard-normal noise samples, one per row.
class NoiseBatch : public Matrix {
 public:
  using Matrix::Matrix;
  explicit NoiseBatch(Matrix m) : Matrix(std::move(m)) {}
};

// Builds a matrix from nested rows; every row must have the same length.
Matrix from_rows(const std::vector<std::vector<double>>& rows);

// Rows of `m` reordered so that row i of the result is row order[i] of `m`.
template <class M>
M gather_rows(const M& m, std::span<const int> order) {
  M out(order.size(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto src = m.row(static_cast<std::size_t>(order[i]));
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

}  // namespace immiscible

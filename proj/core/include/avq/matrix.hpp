#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace avq {

// Dense row-major matrix of doubles. Feature matrices follow the convention
// rows = feature dimensions, columns = time frames.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Reshape in place; keeps the underlying capacity, so a scratch matrix can
  // be reused across calls without reallocating.
  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.resize(rows * cols);
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> col(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  void set_col(std::size_t c, std::span<const double> v) {
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
  }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = alpha * op(A) * op(B) + beta * C, dispatched to BLAS when built with it.
void gemm(const Matrix& a, bool transpose_a, const Matrix& b, bool transpose_b,
          Matrix& c, double alpha = 1.0, double beta = 0.0);

Matrix matmul(const Matrix& a, const Matrix& b);

// Reference triple loop, kept as the independent check for the BLAS path.
Matrix matmul_naive(const Matrix& a, const Matrix& b);

}  // namespace avq

#include "avq/matrix.hpp"

#include <cassert>
#include <stdexcept>

#if AVQ_USE_OPENBLAS
#include <cblas.h>
#endif

namespace avq {

#if AVQ_USE_OPENBLAS
namespace {
// Training determinism relies on a fixed reduction order; pin one BLAS thread.
struct BlasInit {
  BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init;
}  // namespace
#endif

void gemm(const Matrix& a, bool transpose_a, const Matrix& b, bool transpose_b,
          Matrix& c, double alpha, double beta) {
  const std::size_t m = transpose_a ? a.cols() : a.rows();
  const std::size_t k = transpose_a ? a.rows() : a.cols();
  const std::size_t kb = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (k != kb || c.rows() != m || c.cols() != n)
    throw std::invalid_argument("gemm: inconsistent dimensions");

#if AVQ_USE_OPENBLAS
  cblas_dgemm(CblasRowMajor, transpose_a ? CblasTrans : CblasNoTrans,
              transpose_b ? CblasTrans : CblasNoTrans, static_cast<blasint>(m),
              static_cast<blasint>(n), static_cast<blasint>(k), alpha, a.data(),
              static_cast<blasint>(a.cols()), b.data(),
              static_cast<blasint>(b.cols()), beta, c.data(),
              static_cast<blasint>(c.cols()));
#else
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = transpose_a ? a(p, i) : a(i, p);
        const double bv = transpose_b ? b(j, p) : b(p, j);
        acc += av * bv;
      }
      c(i, j) = alpha * acc + beta * c(i, j);
    }
  }
#endif
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  gemm(a, false, b, false, c);
  return c;
}

Matrix matmul_naive(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double av = a(i, p);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += av * b(p, j);
    }
  return c;
}

}  // namespace avq

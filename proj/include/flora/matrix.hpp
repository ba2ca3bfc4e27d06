#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#if defined(__AVX__) && defined(__FMA__)
#include <immintrin.h>
#define FLORA_HAVE_AVX_FMA 1
#endif

#include "flora/error.hpp"

namespace flora {

/// Dense row-major matrix of doubles. Batches are stored one sample per row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    FLORA_REQUIRE(data_.size() == rows * cols, InvalidArgument,
                  "matrix data length " + std::to_string(data_.size()) +
                      " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      FLORA_REQUIRE(r.size() == cols_, InvalidArgument, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix row_vector(std::span<const double> v) {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t.data_[c * rows_ + r] = data_[r * cols_ + c];
    return t;
  }

  /// Rows `ids[0], ids[1], ...` copied into a new matrix.
  template <class Index>
  Matrix gather_rows(std::span<const Index> ids) const {
    Matrix out(ids.size(), cols_);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto src = row(static_cast<std::size_t>(ids[i]));
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

// Every output entry is the fused-multiply-add chain
//   c = fma(a[K-1], b[K-1], ... fma(a[0], b[0], 0))
// regardless of which code path computed it, so a row's result does not
// depend on the batch it was computed in.
inline void gemm_row(const double* a, const double* b, double* c, std::size_t K, std::size_t J) {
  std::size_t j = 0;
#ifdef FLORA_HAVE_AVX_FMA
  for (; j + 8 <= J; j += 8) {
    __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
    for (std::size_t k = 0; k < K; ++k) {
      const double* br = b + k * J + j;
      const __m256d av = _mm256_broadcast_sd(a + k);
      c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(br), c0);
      c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(br + 4), c1);
    }
    _mm256_storeu_pd(c + j, c0);
    _mm256_storeu_pd(c + j + 4, c1);
  }
#endif
  for (; j < J; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s = std::fma(a[k], b[k * J + j], s);
    c[j] = s;
  }
}

inline void gemm(const double* A, const double* B, double* C, std::size_t n, std::size_t K,
                 std::size_t J) {
  std::size_t i = 0;
#ifdef FLORA_HAVE_AVX_FMA
  for (; i + 4 <= n; i += 4) {
    const double* a0 = A + i * K;
    const double* a1 = a0 + K;
    const double* a2 = a1 + K;
    const double* a3 = a2 + K;
    std::size_t j = 0;
    for (; j + 8 <= J; j += 8) {
      __m256d c00 = _mm256_setzero_pd(), c01 = c00, c10 = c00, c11 = c00;
      __m256d c20 = c00, c21 = c00, c30 = c00, c31 = c00;
      for (std::size_t k = 0; k < K; ++k) {
        const double* br = B + k * J + j;
        const __m256d b0 = _mm256_loadu_pd(br);
        const __m256d b1 = _mm256_loadu_pd(br + 4);
        __m256d x = _mm256_broadcast_sd(a0 + k);
        c00 = _mm256_fmadd_pd(x, b0, c00);
        c01 = _mm256_fmadd_pd(x, b1, c01);
        x = _mm256_broadcast_sd(a1 + k);
        c10 = _mm256_fmadd_pd(x, b0, c10);
        c11 = _mm256_fmadd_pd(x, b1, c11);
        x = _mm256_broadcast_sd(a2 + k);
        c20 = _mm256_fmadd_pd(x, b0, c20);
        c21 = _mm256_fmadd_pd(x, b1, c21);
        x = _mm256_broadcast_sd(a3 + k);
        c30 = _mm256_fmadd_pd(x, b0, c30);
        c31 = _mm256_fmadd_pd(x, b1, c31);
      }
      double* c = C + i * J + j;
      _mm256_storeu_pd(c, c00);
      _mm256_storeu_pd(c + 4, c01);
      c += J;
      _mm256_storeu_pd(c, c10);
      _mm256_storeu_pd(c + 4, c11);
      c += J;
      _mm256_storeu_pd(c, c20);
      _mm256_storeu_pd(c + 4, c21);
      c += J;
      _mm256_storeu_pd(c, c30);
      _mm256_storeu_pd(c + 4, c31);
    }
    // leftover columns: the four rows' chains run side by side in one register
    for (; j < J; ++j) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t k = 0; k < K; ++k) {
        const __m256d av = _mm256_setr_pd(a0[k], a1[k], a2[k], a3[k]);
        acc = _mm256_fmadd_pd(av, _mm256_broadcast_sd(B + k * J + j), acc);
      }
      alignas(32) double lanes[4];
      _mm256_store_pd(lanes, acc);
      for (std::size_t r = 0; r < 4; ++r) C[(i + r) * J + j] = lanes[r];
    }
  }
#endif
  for (; i < n; ++i) gemm_row(A + i * K, B, C + i * J, K, J);
}

}  // namespace detail

/// out = a * b
inline void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  FLORA_REQUIRE(a.cols() == b.rows(), InvalidArgument,
                "matmul: inner dims " + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()));
  if (out.rows() != a.rows() || out.cols() != b.cols()) out = Matrix(a.rows(), b.cols());
  detail::gemm(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out;
  matmul(a, b, out);
  return out;
}

/// aᵀ * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) { return matmul(a.transposed(), b); }

/// a * bᵀ
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) { return matmul(a, b.transposed()); }

inline Matrix& operator+=(Matrix& a, const Matrix& b) {
  FLORA_REQUIRE(a.rows() == b.rows() && a.cols() == b.cols(), InvalidArgument,
                "matrix add: shape mismatch");
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
  return a;
}

inline Matrix& operator*=(Matrix& a, double s) {
  for (double& v : a.values()) v *= s;
  return a;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  FLORA_REQUIRE(a.rows() == b.rows() && a.cols() == b.cols(), InvalidArgument,
                "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace flora

// Compiled with -mavx2 only. Multiplies and adds stay separate instructions
// so rounding matches the scalar reference exactly.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace pasta::kernels::avx2 {

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d vy = _mm256_loadu_pd(y + k);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + k)));
    _mm256_storeu_pd(y + k, vy);
  }
  for (; k < n; ++k) y[k] += a * x[k];
}

void mul_add(const double* x, const double* w, double* y, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(w + k));
    _mm256_storeu_pd(y + k, _mm256_add_pd(_mm256_loadu_pd(y + k), prod));
  }
  for (; k < n; ++k) y[k] += x[k] * w[k];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4)
    _mm256_storeu_pd(out + k, _mm256_add_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  for (; k < n; ++k) out[k] = x[k] + y[k];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4)
    _mm256_storeu_pd(out + k, _mm256_mul_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  for (; k < n; ++k) out[k] = x[k] * y[k];
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double total = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; k < n; ++k) total += x[k] * y[k];
  return total;
}

void vecmat(const double* x, const double* a, double* y, std::size_t rows, std::size_t cols) {
  std::size_t c = 0;
  for (; c + 8 <= cols; c += 8) {
    __m256d acc0 = _mm256_loadu_pd(y + c);
    __m256d acc1 = _mm256_loadu_pd(y + c + 4);
    for (std::size_t r = 0; r < rows; ++r) {
      const __m256d xr = _mm256_set1_pd(x[r]);
      const double* row = a + r * cols + c;
      acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(xr, _mm256_loadu_pd(row)));
      acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(xr, _mm256_loadu_pd(row + 4)));
    }
    _mm256_storeu_pd(y + c, acc0);
    _mm256_storeu_pd(y + c + 4, acc1);
  }
  for (; c + 4 <= cols; c += 4) {
    __m256d acc = _mm256_loadu_pd(y + c);
    for (std::size_t r = 0; r < rows; ++r)
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(x[r]), _mm256_loadu_pd(a + r * cols + c)));
    _mm256_storeu_pd(y + c, acc);
  }
  for (; c < cols; ++c) {
    double acc = y[c];
    for (std::size_t r = 0; r < rows; ++r) acc += x[r] * a[r * cols + c];
    y[c] = acc;
  }
}

void matvec(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot(a + r * cols, x, cols);
}

void ger(const double* x, const double* g, double* a, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], g, a + r * cols, cols);
}

}  // namespace pasta::kernels::avx2

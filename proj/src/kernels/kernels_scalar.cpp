#include "kernels_impl.hpp"

namespace pasta::kernels::scalar {

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

void mul_add(const double* x, const double* w, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += x[k] * w[k];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = x[k] + y[k];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = x[k] * y[k];
}

double dot(const double* x, const double* y, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    lane[0] += x[k] * y[k];
    lane[1] += x[k + 1] * y[k + 1];
    lane[2] += x[k + 2] * y[k + 2];
    lane[3] += x[k + 3] * y[k + 3];
  }
  double acc = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; k < n; ++k) acc += x[k] * y[k];
  return acc;
}

void vecmat(const double* x, const double* a, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

void matvec(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot(a + r * cols, x, cols);
}

void ger(const double* x, const double* g, double* a, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], g, a + r * cols, cols);
}

}  // namespace pasta::kernels::scalar

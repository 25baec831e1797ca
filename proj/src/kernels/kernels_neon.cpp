// AArch64 variant. Two float64x2 registers emulate the four dot() lanes.

#include <arm_neon.h>

#include "kernels_impl.hpp"

namespace pasta::kernels::neon {

void axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2)
    vst1q_f64(y + k, vaddq_f64(vld1q_f64(y + k), vmulq_f64(va, vld1q_f64(x + k))));
  for (; k < n; ++k) y[k] += a * x[k];
}

void mul_add(const double* x, const double* w, double* y, std::size_t n) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2)
    vst1q_f64(y + k, vaddq_f64(vld1q_f64(y + k), vmulq_f64(vld1q_f64(x + k), vld1q_f64(w + k))));
  for (; k < n; ++k) y[k] += x[k] * w[k];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) vst1q_f64(out + k, vaddq_f64(vld1q_f64(x + k), vld1q_f64(y + k)));
  for (; k < n; ++k) out[k] = x[k] + y[k];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) vst1q_f64(out + k, vmulq_f64(vld1q_f64(x + k), vld1q_f64(y + k)));
  for (; k < n; ++k) out[k] = x[k] * y[k];
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(x + k), vld1q_f64(y + k)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(x + k + 2), vld1q_f64(y + k + 2)));
  }
  double total = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
                 (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (; k < n; ++k) total += x[k] * y[k];
  return total;
}

void vecmat(const double* x, const double* a, double* y, std::size_t rows, std::size_t cols) {
  std::size_t c = 0;
  for (; c + 2 <= cols; c += 2) {
    float64x2_t acc = vld1q_f64(y + c);
    for (std::size_t r = 0; r < rows; ++r)
      acc = vaddq_f64(acc, vmulq_f64(vdupq_n_f64(x[r]), vld1q_f64(a + r * cols + c)));
    vst1q_f64(y + c, acc);
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

}  // namespace pasta::kernels::neon

#pragma once

#include <cstddef>

namespace pasta::kernels {

#define PASTA_DECLARE_KERNELS(ns)                                          \
  namespace ns {                                                           \
  void axpy(double a, const double* x, double* y, std::size_t n);          \
  void mul_add(const double* x, const double* w, double* y, std::size_t n); \
  void add(const double* x, const double* y, double* out, std::size_t n);  \
  void mul(const double* x, const double* y, double* out, std::size_t n);  \
  double dot(const double* x, const double* y, std::size_t n);             \
  void vecmat(const double* x, const double* a, double* y, std::size_t rows, \
              std::size_t cols);                                           \
  void matvec(const double* a, const double* x, double* y, std::size_t rows, \
              std::size_t cols);                                           \
  void ger(const double* x, const double* g, double* a, std::size_t rows,  \
           std::size_t cols);                                              \
  }

PASTA_DECLARE_KERNELS(scalar)
#if defined(PASTA_HAVE_AVX2)
PASTA_DECLARE_KERNELS(avx2)
#endif
#if defined(PASTA_HAVE_NEON)
PASTA_DECLARE_KERNELS(neon)
#endif

#undef PASTA_DECLARE_KERNELS

}  // namespace pasta::kernels

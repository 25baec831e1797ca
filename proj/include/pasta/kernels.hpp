#pragma once

// Vector primitives behind the tensor engine. Every variant performs the
// same sequence of IEEE operations per output element (separate multiply
// and add, no FMA), so all dispatch targets are bit-identical.
//
// dot() contract: lanes l = 0..3 accumulate x[k]*y[k] for k = 4q + l over
// full blocks in ascending q; the lanes are combined as (l0 + l1) + (l2 + l3);
// the remaining n % 4 products are then added in ascending order.

#include <cstddef>
#include <string_view>
#include <vector>

namespace pasta::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // y[k] += a * x[k]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y[k] += x[k] * w[k]
  void (*mul_add)(const double* x, const double* w, double* y, std::size_t n);
  // out[k] = x[k] + y[k]
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  // out[k] = x[k] * y[k]
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[c] += sum_r x[r] * a[r*cols + c], accumulated in ascending r
  void (*vecmat)(const double* x, const double* a, double* y, std::size_t rows, std::size_t cols);
  // y[r] += dot(a[r*cols ...], x, cols)
  void (*matvec)(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
  // a[r*cols + c] += x[r] * g[c]
  void (*ger)(const double* x, const double* g, double* a, std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_table();

/// ISAs compiled into this build and supported by the running CPU.
std::vector<Isa> available();
bool is_available(Isa isa);

/// Table for a specific ISA; throws InvalidArgument if unavailable.
const KernelTable& table(Isa isa);

/// Currently selected table. On first use the best available ISA is chosen,
/// unless PASTA_SIMD=scalar|avx2|neon is set in the environment.
const KernelTable& active();

/// Override the active table (tests, benchmarks).
void select(Isa isa);

}  // namespace pasta::kernels

#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "pasta/error.hpp"
#include "pasta/kernels.hpp"

namespace pasta::kernels {
namespace {

constexpr KernelTable kScalar{Isa::Scalar, scalar::axpy, scalar::mul_add,
                              scalar::add, scalar::mul, scalar::dot,
                              scalar::vecmat, scalar::matvec, scalar::ger};
#if defined(PASTA_HAVE_AVX2)
constexpr KernelTable kAvx2{Isa::Avx2, avx2::axpy, avx2::mul_add,
                            avx2::add, avx2::mul, avx2::dot,
                              avx2::vecmat, avx2::matvec, avx2::ger};
#endif
#if defined(PASTA_HAVE_NEON)
constexpr KernelTable kNeon{Isa::Neon, neon::axpy, neon::mul_add,
                            neon::add, neon::mul, neon::dot,
                              neon::vecmat, neon::matvec, neon::ger};
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(PASTA_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(PASTA_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("PASTA_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &kScalar;
    if (want == "avx2" && cpu_supports(Isa::Avx2)) return &table(Isa::Avx2);
    if (want == "neon" && cpu_supports(Isa::Neon)) return &table(Isa::Neon);
  }
  if (cpu_supports(Isa::Avx2)) return &table(Isa::Avx2);
  if (cpu_supports(Isa::Neon)) return &table(Isa::Neon);
  return &kScalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{pick_default()};
  return ptr;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable& scalar_table() { return kScalar; }

std::vector<Isa> available() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
    if (cpu_supports(isa)) out.push_back(isa);
  return out;
}

bool is_available(Isa isa) { return cpu_supports(isa); }

const KernelTable& table(Isa isa) {
  if (!cpu_supports(isa))
    throw InvalidArgument("kernel ISA not available: " + std::string(isa_name(isa)));
  switch (isa) {
#if defined(PASTA_HAVE_AVX2)
    case Isa::Avx2: return kAvx2;
#endif
#if defined(PASTA_HAVE_NEON)
    case Isa::Neon: return kNeon;
#endif
    default: return kScalar;
  }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

}  // namespace pasta::kernels

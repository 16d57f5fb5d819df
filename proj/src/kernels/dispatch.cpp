#include "cycloop/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace cycloop::kernels {

namespace {

constexpr KernelTable kGeneric{Isa::generic, "generic",       generic::dot,   generic::axpy,
                               generic::gemm_nn, generic::gemm_tn, generic::to_f32};

#if defined(CYCLOOP_HAVE_AVX2)
constexpr KernelTable kAvx2{Isa::avx2,     "avx2",        avx2::dot,   avx2::axpy,
                            avx2::gemm_nn, avx2::gemm_tn, avx2::to_f32};
#endif

const KernelTable& select() {
  const char* forced = std::getenv("CYCLOOP_SIMD");
  const std::string_view want = forced ? std::string_view(forced) : std::string_view();
  if (want == "generic" || want == "scalar") return kGeneric;
  if (const KernelTable* t = avx2_table(); t != nullptr && cpu_supports(Isa::avx2)) return *t;
  return kGeneric;
}

}  // namespace

const KernelTable& generic_table() { return kGeneric; }

const KernelTable* avx2_table() {
#if defined(CYCLOOP_HAVE_AVX2)
  return &kAvx2;
#else
  return nullptr;
#endif
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::generic:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace cycloop::kernels

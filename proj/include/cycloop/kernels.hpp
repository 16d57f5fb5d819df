#pragma once

// Dense arithmetic kernels behind the Matrix operations.
//
// Every kernel has a portable scalar reference implementation (generic) and,
// when the build enables it, an AVX2/FMA variant. The active table is picked
// once at runtime from CPU support; setting CYCLOOP_SIMD=generic forces the
// reference path. All matrices are row-major with explicit leading dimensions.

#include <cstddef>
#include <string_view>

namespace cycloop::kernels {

enum class Isa { generic, avx2 };

using DotFn = double (*)(const double* a, const double* b, std::size_t n);
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
// c(m x n) += a(m x k) * b(k x n)
using GemmNnFn = void (*)(std::size_t m, std::size_t n, std::size_t k,
                          const double* a, std::size_t lda,
                          const double* b, std::size_t ldb,
                          double* c, std::size_t ldc);
// c(m x n) += a(k x m)^T * b(k x n)
using GemmTnFn = GemmNnFn;
using ToF32Fn = void (*)(const double* src, float* dst, std::size_t n);

struct KernelTable {
  Isa isa;
  std::string_view name;
  DotFn dot;
  AxpyFn axpy;
  GemmNnFn gemm_nn;
  GemmTnFn gemm_tn;
  ToF32Fn to_f32;
};

const KernelTable& generic_table();

// nullptr when the variant was not compiled in.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);

// Table used by Matrix operations. Resolved on first use.
const KernelTable& active();

namespace generic {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void to_f32(const double* src, float* dst, std::size_t n);
}  // namespace generic

#if defined(CYCLOOP_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void to_f32(const double* src, float* dst, std::size_t n);
}  // namespace avx2
#endif

}  // namespace cycloop::kernels

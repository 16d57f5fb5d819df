// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "cycloop/kernels.hpp"

#include <immintrin.h>

namespace cycloop::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

// crow[0..n) += s0*b0 + s1*b1 + s2*b2 + s3*b3
inline void update_row4(double* crow, std::size_t n, double s0, const double* b0, double s1,
                        const double* b1, double s2, const double* b2, double s3,
                        const double* b3) {
  const __m256d v0 = _mm256_set1_pd(s0);
  const __m256d v1 = _mm256_set1_pd(s1);
  const __m256d v2 = _mm256_set1_pd(s2);
  const __m256d v3 = _mm256_set1_pd(s3);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_loadu_pd(crow + j);
    acc = _mm256_fmadd_pd(v0, _mm256_loadu_pd(b0 + j), acc);
    acc = _mm256_fmadd_pd(v1, _mm256_loadu_pd(b1 + j), acc);
    acc = _mm256_fmadd_pd(v2, _mm256_loadu_pd(b2 + j), acc);
    acc = _mm256_fmadd_pd(v3, _mm256_loadu_pd(b3 + j), acc);
    _mm256_storeu_pd(crow + j, acc);
  }
  for (; j < n; ++j) crow[j] += s0 * b0[j] + s1 * b1[j] + s2 * b2[j] + s3 * b3[j];
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  }
  double sum = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    const double* arow = a + i * lda;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      update_row4(crow, n, arow[p], b + p * ldb, arow[p + 1], b + (p + 1) * ldb, arow[p + 2],
                  b + (p + 2) * ldb, arow[p + 3], b + (p + 3) * ldb);
    }
    for (; p < k; ++p) axpy(arow[p], b + p * ldb, crow, n);
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      update_row4(crow, n, a[p * lda + i], b + p * ldb, a[(p + 1) * lda + i], b + (p + 1) * ldb,
                  a[(p + 2) * lda + i], b + (p + 2) * ldb, a[(p + 3) * lda + i],
                  b + (p + 3) * ldb);
    }
    for (; p < k; ++p) axpy(a[p * lda + i], b + p * ldb, crow, n);
  }
}

void to_f32(const double* src, float* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm_storeu_ps(dst + i, _mm256_cvtpd_ps(_mm256_loadu_pd(src + i)));
  for (; i < n; ++i) dst[i] = static_cast<float>(src[i]);
}

}  // namespace cycloop::kernels::avx2

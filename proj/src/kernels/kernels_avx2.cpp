// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "ifx/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <cmath>

namespace ifx::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

double sum_squares_avx2(const double* x, std::size_t n) { return dot_avx2(x, x, n); }

// MR x 8 register tile per step, then 4-wide and scalar column tails.
template <std::size_t MR>
void gemm_rows(std::size_t i0, std::size_t n, std::size_t k, const double* a, std::size_t a_rs,
               std::size_t a_cs, const double* b, double* c, bool accumulate) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d lo[MR], hi[MR];
    for (std::size_t r = 0; r < MR; ++r) {
      lo[r] = _mm256_setzero_pd();
      hi[r] = _mm256_setzero_pd();
    }
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
      const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
      for (std::size_t r = 0; r < MR; ++r) {
        const __m256d av = _mm256_set1_pd(a[(i0 + r) * a_rs + p * a_cs]);
        lo[r] = _mm256_fmadd_pd(av, b0, lo[r]);
        hi[r] = _mm256_fmadd_pd(av, b1, hi[r]);
      }
    }
    for (std::size_t r = 0; r < MR; ++r) {
      double* cr = c + (i0 + r) * n + j;
      if (accumulate) {
        lo[r] = _mm256_add_pd(lo[r], _mm256_loadu_pd(cr));
        hi[r] = _mm256_add_pd(hi[r], _mm256_loadu_pd(cr + 4));
      }
      _mm256_storeu_pd(cr, lo[r]);
      _mm256_storeu_pd(cr + 4, hi[r]);
    }
  }
  for (; j + 4 <= n; j += 4) {
    __m256d acc[MR];
    for (std::size_t r = 0; r < MR; ++r) acc[r] = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
      for (std::size_t r = 0; r < MR; ++r) {
        acc[r] = _mm256_fmadd_pd(_mm256_set1_pd(a[(i0 + r) * a_rs + p * a_cs]), b0, acc[r]);
      }
    }
    for (std::size_t r = 0; r < MR; ++r) {
      double* cr = c + (i0 + r) * n + j;
      if (accumulate) acc[r] = _mm256_add_pd(acc[r], _mm256_loadu_pd(cr));
      _mm256_storeu_pd(cr, acc[r]);
    }
  }
  for (; j < n; ++j) {
    for (std::size_t r = 0; r < MR; ++r) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[(i0 + r) * a_rs + p * a_cs] * b[p * n + j];
      double* cr = c + (i0 + r) * n + j;
      *cr = accumulate ? *cr + s : s;
    }
  }
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_rs,
               std::size_t a_cs, const double* b, double* c, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<4>(i, n, k, a, a_rs, a_cs, b, c, accumulate);
  for (; i < m; ++i) gemm_rows<1>(i, n, k, a, a_rs, a_cs, b, c, accumulate);
}

void adamw_avx2(double* param, const double* grad, double* m, double* v, std::size_t n,
                double lr, double beta1, double beta2, double bias1, double bias2, double eps,
                double decay) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ib1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ib2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d inv_bias1 = _mm256_set1_pd(1.0 / bias1);
  const __m256d inv_bias2 = _mm256_set1_pd(1.0 / bias2);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d vdecay = _mm256_set1_pd(decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(ib1, g));
    const __m256d vi =
        _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i), _mm256_mul_pd(ib2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, inv_bias2)), veps);
    const __m256d p = _mm256_loadu_pd(param + i);
    const __m256d step =
        _mm256_fmadd_pd(vdecay, p, _mm256_div_pd(_mm256_mul_pd(mi, inv_bias1), denom));
    _mm256_storeu_pd(param + i, _mm256_fnmadd_pd(vlr, step, p));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    param[i] -= lr * ((m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps) + decay * param[i]);
  }
}

}  // namespace

const Table* avx2_table() {
  static const Table table{dot_avx2, axpy_avx2, scale_avx2, sum_squares_avx2, gemm_avx2,
                           adamw_avx2};
  return &table;
}

}  // namespace ifx::kernels

#else

namespace ifx::kernels {
const Table* avx2_table() { return nullptr; }
}  // namespace ifx::kernels

#endif

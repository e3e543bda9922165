#include "sadiar/kernels.hpp"

// AVX2+FMA variants. Compiled only on x86-64 (this translation unit gets
// -mavx2 -mfma); callers must check CPU support before using the table —
// the dispatcher does.

#if defined(SADIAR_HAVE_AVX2)

#include <immintrin.h>

namespace sadiar::kernels {
namespace {

// ---- f32: 8 lanes ----

void gemm_nn_avx2_f32(int m, int n, int k, const float* a, int lda,
                      const float* b, int ldb, float* c, int ldc, bool acc) {
  const int n8 = n & ~7;
  for (int i = 0; i < m; ++i) {
    float* ci = c + static_cast<long>(i) * ldc;
    if (!acc) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0f;
    }
    const float* ai = a + static_cast<long>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const float aip = ai[p];
      if (aip == 0.0f) continue;
      const __m256 va = _mm256_set1_ps(aip);
      const float* bp = b + static_cast<long>(p) * ldb;
      int j = 0;
      for (; j < n8; j += 8) {
        __m256 vc = _mm256_loadu_ps(ci + j);
        vc = _mm256_fmadd_ps(va, _mm256_loadu_ps(bp + j), vc);
        _mm256_storeu_ps(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

inline float hsum8(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 0x55));
  return _mm_cvtss_f32(lo);
}

void gemm_nt_avx2_f32(int m, int n, int k, const float* a, int lda,
                      const float* b, int ldb, float* c, int ldc, bool acc) {
  const int k8 = k & ~7;
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<long>(i) * lda;
    float* ci = c + static_cast<long>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const float* bj = b + static_cast<long>(j) * ldb;
      __m256 vs = _mm256_setzero_ps();
      int p = 0;
      for (; p < k8; p += 8)
        vs = _mm256_fmadd_ps(_mm256_loadu_ps(ai + p), _mm256_loadu_ps(bj + p),
                             vs);
      float s = hsum8(vs);
      for (; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void gemm_tn_avx2_f32(int m, int n, int k, const float* a, int lda,
                      const float* b, int ldb, float* c, int ldc, bool acc) {
  if (!acc) {
    for (int i = 0; i < m; ++i) {
      float* ci = c + static_cast<long>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = 0.0f;
    }
  }
  const int n8 = n & ~7;
  for (int p = 0; p < k; ++p) {
    const float* ap = a + static_cast<long>(p) * lda;
    const float* bp = b + static_cast<long>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const float api = ap[i];
      if (api == 0.0f) continue;
      const __m256 va = _mm256_set1_ps(api);
      float* ci = c + static_cast<long>(i) * ldc;
      int j = 0;
      for (; j < n8; j += 8) {
        __m256 vc = _mm256_loadu_ps(ci + j);
        vc = _mm256_fmadd_ps(va, _mm256_loadu_ps(bp + j), vc);
        _mm256_storeu_ps(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

float dot_avx2_f32(const float* x, const float* y, int n) {
  const int n8 = n & ~7;
  __m256 vs = _mm256_setzero_ps();
  int i = 0;
  for (; i < n8; i += 8)
    vs = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), vs);
  float s = hsum8(vs);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2_f32(int n, float alpha, const float* x, float* y) {
  const int n8 = n & ~7;
  const __m256 va = _mm256_set1_ps(alpha);
  int i = 0;
  for (; i < n8; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// ---- f64: 4 lanes ----

void gemm_nn_avx2_f64(int m, int n, int k, const double* a, int lda,
                      const double* b, int ldb, double* c, int ldc, bool acc) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * ldc;
    if (!acc) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    }
    const double* ai = a + static_cast<long>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const __m256d va = _mm256_set1_pd(aip);
      const double* bp = b + static_cast<long>(p) * ldb;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d vc = _mm256_loadu_pd(ci + j);
        vc = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j), vc);
        _mm256_storeu_pd(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
  return _mm_cvtsd_f64(lo);
}

void gemm_nt_avx2_f64(int m, int n, int k, const double* a, int lda,
                      const double* b, int ldb, double* c, int ldc, bool acc) {
  const int k4 = k & ~3;
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<long>(i) * lda;
    double* ci = c + static_cast<long>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<long>(j) * ldb;
      __m256d vs = _mm256_setzero_pd();
      int p = 0;
      for (; p < k4; p += 4)
        vs = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p),
                             vs);
      double s = hsum4(vs);
      for (; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void gemm_tn_avx2_f64(int m, int n, int k, const double* a, int lda,
                      const double* b, int ldb, double* c, int ldc, bool acc) {
  if (!acc) {
    for (int i = 0; i < m; ++i) {
      double* ci = c + static_cast<long>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    }
  }
  const int n4 = n & ~3;
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<long>(p) * lda;
    const double* bp = b + static_cast<long>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const double api = ap[i];
      if (api == 0.0) continue;
      const __m256d va = _mm256_set1_pd(api);
      double* ci = c + static_cast<long>(i) * ldc;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d vc = _mm256_loadu_pd(ci + j);
        vc = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j), vc);
        _mm256_storeu_pd(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

double dot_avx2_f64(const double* x, const double* y, int n) {
  const int n4 = n & ~3;
  __m256d vs = _mm256_setzero_pd();
  int i = 0;
  for (; i < n4; i += 4)
    vs = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), vs);
  double s = hsum4(vs);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2_f64(int n, double alpha, const double* x, double* y) {
  const int n4 = n & ~3;
  const __m256d va = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i < n4; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table = {
      "avx2",
      gemm_nn_avx2_f32, gemm_nt_avx2_f32, gemm_tn_avx2_f32,
      gemm_nn_avx2_f64, gemm_nt_avx2_f64, gemm_tn_avx2_f64,
      dot_avx2_f32,     dot_avx2_f64,
      axpy_avx2_f32,    axpy_avx2_f64,
  };
  return &table;
}

}  // namespace sadiar::kernels

#endif  // SADIAR_HAVE_AVX2

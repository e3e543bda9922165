#include "sadiar/kernels.hpp"

// NEON variants for aarch64, where NEON is baseline (no runtime check
// needed beyond being on the architecture at all).

#if defined(SADIAR_HAVE_NEON)

#include <arm_neon.h>

namespace sadiar::kernels {
namespace {

void gemm_nn_neon_f32(int m, int n, int k, const float* a, int lda,
                      const float* b, int ldb, float* c, int ldc, bool acc) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    float* ci = c + static_cast<long>(i) * ldc;
    if (!acc) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0f;
    }
    const float* ai = a + static_cast<long>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const float aip = ai[p];
      if (aip == 0.0f) continue;
      const float32x4_t va = vdupq_n_f32(aip);
      const float* bp = b + static_cast<long>(p) * ldb;
      int j = 0;
      for (; j < n4; j += 4) {
        float32x4_t vc = vld1q_f32(ci + j);
        vc = vfmaq_f32(vc, va, vld1q_f32(bp + j));
        vst1q_f32(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt_neon_f32(int m, int n, int k, const float* a, int lda,
                      const float* b, int ldb, float* c, int ldc, bool acc) {
  const int k4 = k & ~3;
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<long>(i) * lda;
    float* ci = c + static_cast<long>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const float* bj = b + static_cast<long>(j) * ldb;
      float32x4_t vs = vdupq_n_f32(0.0f);
      int p = 0;
      for (; p < k4; p += 4)
        vs = vfmaq_f32(vs, vld1q_f32(ai + p), vld1q_f32(bj + p));
      float s = vaddvq_f32(vs);
      for (; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void gemm_tn_neon_f32(int m, int n, int k, const float* a, int lda,
                      const float* b, int ldb, float* c, int ldc, bool acc) {
  if (!acc) {
    for (int i = 0; i < m; ++i) {
      float* ci = c + static_cast<long>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = 0.0f;
    }
  }
  const int n4 = n & ~3;
  for (int p = 0; p < k; ++p) {
    const float* ap = a + static_cast<long>(p) * lda;
    const float* bp = b + static_cast<long>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const float api = ap[i];
      if (api == 0.0f) continue;
      const float32x4_t va = vdupq_n_f32(api);
      float* ci = c + static_cast<long>(i) * ldc;
      int j = 0;
      for (; j < n4; j += 4) {
        float32x4_t vc = vld1q_f32(ci + j);
        vc = vfmaq_f32(vc, va, vld1q_f32(bp + j));
        vst1q_f32(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

float dot_neon_f32(const float* x, const float* y, int n) {
  const int n4 = n & ~3;
  float32x4_t vs = vdupq_n_f32(0.0f);
  int i = 0;
  for (; i < n4; i += 4) vs = vfmaq_f32(vs, vld1q_f32(x + i), vld1q_f32(y + i));
  float s = vaddvq_f32(vs);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_neon_f32(int n, float alpha, const float* x, float* y) {
  const int n4 = n & ~3;
  const float32x4_t va = vdupq_n_f32(alpha);
  int i = 0;
  for (; i < n4; i += 4) {
    float32x4_t vy = vld1q_f32(y + i);
    vy = vfmaq_f32(vy, va, vld1q_f32(x + i));
    vst1q_f32(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_neon_f64(int m, int n, int k, const double* a, int lda,
                      const double* b, int ldb, double* c, int ldc, bool acc) {
  const int n2 = n & ~1;
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * ldc;
    if (!acc) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    }
    const double* ai = a + static_cast<long>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const float64x2_t va = vdupq_n_f64(aip);
      const double* bp = b + static_cast<long>(p) * ldb;
      int j = 0;
      for (; j < n2; j += 2) {
        float64x2_t vc = vld1q_f64(ci + j);
        vc = vfmaq_f64(vc, va, vld1q_f64(bp + j));
        vst1q_f64(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt_neon_f64(int m, int n, int k, const double* a, int lda,
                      const double* b, int ldb, double* c, int ldc, bool acc) {
  const int k2 = k & ~1;
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<long>(i) * lda;
    double* ci = c + static_cast<long>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<long>(j) * ldb;
      float64x2_t vs = vdupq_n_f64(0.0);
      int p = 0;
      for (; p < k2; p += 2)
        vs = vfmaq_f64(vs, vld1q_f64(ai + p), vld1q_f64(bj + p));
      double s = vaddvq_f64(vs);
      for (; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void gemm_tn_neon_f64(int m, int n, int k, const double* a, int lda,
                      const double* b, int ldb, double* c, int ldc, bool acc) {
  if (!acc) {
    for (int i = 0; i < m; ++i) {
      double* ci = c + static_cast<long>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    }
  }
  const int n2 = n & ~1;
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<long>(p) * lda;
    const double* bp = b + static_cast<long>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const double api = ap[i];
      if (api == 0.0) continue;
      const float64x2_t va = vdupq_n_f64(api);
      double* ci = c + static_cast<long>(i) * ldc;
      int j = 0;
      for (; j < n2; j += 2) {
        float64x2_t vc = vld1q_f64(ci + j);
        vc = vfmaq_f64(vc, va, vld1q_f64(bp + j));
        vst1q_f64(ci + j, vc);
      }
      for (; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

double dot_neon_f64(const double* x, const double* y, int n) {
  const int n2 = n & ~1;
  float64x2_t vs = vdupq_n_f64(0.0);
  int i = 0;
  for (; i < n2; i += 2) vs = vfmaq_f64(vs, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(vs);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_neon_f64(int n, double alpha, const double* x, double* y) {
  const int n2 = n & ~1;
  const float64x2_t va = vdupq_n_f64(alpha);
  int i = 0;
  for (; i < n2; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vfmaq_f64(vy, va, vld1q_f64(x + i));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable* neon_table_impl() {
  static const KernelTable table = {
      "neon",
      gemm_nn_neon_f32, gemm_nt_neon_f32, gemm_tn_neon_f32,
      gemm_nn_neon_f64, gemm_nt_neon_f64, gemm_tn_neon_f64,
      dot_neon_f32,     dot_neon_f64,
      axpy_neon_f32,    axpy_neon_f64,
  };
  return &table;
}

}  // namespace sadiar::kernels

#endif  // SADIAR_HAVE_NEON

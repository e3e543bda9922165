#include "sadiar/kernels.hpp"

// Reference kernels: plain loops, no intrinsics. These define the semantics
// the SIMD tables are tested against.

namespace sadiar::kernels {
namespace {

template <typename T>
void gemm_nn_ref(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
                 T* c, int ldc, bool acc) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + static_cast<long>(i) * ldc;
    if (!acc) {
      for (int j = 0; j < n; ++j) ci[j] = T(0);
    }
    const T* ai = a + static_cast<long>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* bp = b + static_cast<long>(p) * ldb;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <typename T>
void gemm_nt_ref(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
                 T* c, int ldc, bool acc) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<long>(i) * lda;
    T* ci = c + static_cast<long>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + static_cast<long>(j) * ldb;
      T s = T(0);
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

template <typename T>
void gemm_tn_ref(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
                 T* c, int ldc, bool acc) {
  if (!acc) {
    for (int i = 0; i < m; ++i) {
      T* ci = c + static_cast<long>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = T(0);
    }
  }
  for (int p = 0; p < k; ++p) {
    const T* ap = a + static_cast<long>(p) * lda;
    const T* bp = b + static_cast<long>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const T api = ap[i];
      T* ci = c + static_cast<long>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

template <typename T>
T dot_ref(const T* x, const T* y, int n) {
  T s = T(0);
  for (int i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy_ref(int n, T alpha, const T* x, T* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      "scalar",
      gemm_nn_ref<float>,  gemm_nt_ref<float>,  gemm_tn_ref<float>,
      gemm_nn_ref<double>, gemm_nt_ref<double>, gemm_tn_ref<double>,
      dot_ref<float>,      dot_ref<double>,
      axpy_ref<float>,     axpy_ref<double>,
  };
  return table;
}

}  // namespace sadiar::kernels

#pragma once

// Dense row-major compute kernels used by the tensor layer.
//
// Every entry point has a scalar reference implementation plus optional
// SIMD variants (AVX2 on x86-64, NEON on aarch64) selected once at runtime.
// The scalar table is the semantic reference; SIMD tables must match it to
// floating-point reassociation tolerance and are equivalence-tested.
//
// GEMM conventions (all matrices row-major, explicit leading dimensions):
//   nn: C[m x n] (+)= A[m x k] * B[k x n]
//   nt: C[m x n] (+)= A[m x k] * B[n x k]^T
//   tn: C[m x n] (+)= A[k x m]^T * B[k x n]
// With accumulate == false the destination is overwritten, otherwise added to.

#include <string_view>
#include <vector>

namespace sadiar::kernels {

using GemmF32 = void (*)(int m, int n, int k, const float* a, int lda,
                         const float* b, int ldb, float* c, int ldc,
                         bool accumulate);
using GemmF64 = void (*)(int m, int n, int k, const double* a, int lda,
                         const double* b, int ldb, double* c, int ldc,
                         bool accumulate);
using DotF32 = float (*)(const float* x, const float* y, int n);
using DotF64 = double (*)(const double* x, const double* y, int n);
using AxpyF32 = void (*)(int n, float alpha, const float* x, float* y);
using AxpyF64 = void (*)(int n, double alpha, const double* x, double* y);

struct KernelTable {
  const char* name;
  GemmF32 gemm_nn_f32;
  GemmF32 gemm_nt_f32;
  GemmF32 gemm_tn_f32;
  GemmF64 gemm_nn_f64;
  GemmF64 gemm_nt_f64;
  GemmF64 gemm_tn_f64;
  DotF32 dot_f32;
  DotF64 dot_f64;
  AxpyF32 axpy_f32;
  AxpyF64 axpy_f64;
};

// Always-available reference implementation.
const KernelTable& scalar_table();

// Table by name ("scalar", "avx2", "neon"); nullptr if not compiled in or
// not supported by the running CPU.
const KernelTable* table_by_name(std::string_view name);

// All tables usable on this machine (scalar first).
std::vector<const KernelTable*> available_tables();

// Active table: SADIAR_KERNELS env var if set (unknown/unsupported value is
// an error), otherwise the best available variant. Resolved once.
const KernelTable& active();

// Typed convenience wrappers over active().
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
T dot(const T* x, const T* y, int n);
template <typename T>
void axpy(int n, T alpha, const T* x, T* y);

template <>
inline void gemm_nn<float>(int m, int n, int k, const float* a, int lda,
                           const float* b, int ldb, float* c, int ldc,
                           bool acc) {
  active().gemm_nn_f32(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
template <>
inline void gemm_nn<double>(int m, int n, int k, const double* a, int lda,
                            const double* b, int ldb, double* c, int ldc,
                            bool acc) {
  active().gemm_nn_f64(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
template <>
inline void gemm_nt<float>(int m, int n, int k, const float* a, int lda,
                           const float* b, int ldb, float* c, int ldc,
                           bool acc) {
  active().gemm_nt_f32(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
template <>
inline void gemm_nt<double>(int m, int n, int k, const double* a, int lda,
                            const double* b, int ldb, double* c, int ldc,
                            bool acc) {
  active().gemm_nt_f64(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
template <>
inline void gemm_tn<float>(int m, int n, int k, const float* a, int lda,
                           const float* b, int ldb, float* c, int ldc,
                           bool acc) {
  active().gemm_tn_f32(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
template <>
inline void gemm_tn<double>(int m, int n, int k, const double* a, int lda,
                            const double* b, int ldb, double* c, int ldc,
                            bool acc) {
  active().gemm_tn_f64(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
template <>
inline float dot<float>(const float* x, const float* y, int n) {
  return active().dot_f32(x, y, n);
}
template <>
inline double dot<double>(const double* x, const double* y, int n) {
  return active().dot_f64(x, y, n);
}
template <>
inline void axpy<float>(int n, float alpha, const float* x, float* y) {
  active().axpy_f32(n, alpha, x, y);
}
template <>
inline void axpy<double>(int n, double alpha, const double* x, double* y) {
  active().axpy_f64(n, alpha, x, y);
}

}  // namespace sadiar::kernels

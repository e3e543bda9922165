#pragma once

// Differentiable primitives over Tensor<T>. Each op computes its value with
// the dispatched kernels (dense inner loops) or plain loops (cheap
// elementwise work), and, when grad recording is on and an input requires
// grad, attaches an op record whose closure accumulates into input
// gradients. Matrices are row-major; the last dim is the feature axis.

#include <cmath>
#include <memory>
#include <vector>

#include "sadiar/kernels.hpp"
#include "sadiar/tensor.hpp"

namespace sadiar::num {

namespace detail {

template <typename T>
bool wants_grad(std::initializer_list<const Tensor<T>*> ts) {
  if (!grad_recording()) return false;
  for (const Tensor<T>* t : ts)
    if (t != nullptr && t->defined() && t->requires_grad) return true;
  return false;
}

template <typename T>
std::shared_ptr<std::vector<T>> prep_grad(Tensor<T>& out) {
  out.requires_grad = true;
  out.grad = std::make_shared<std::vector<T>>(out.data->size(), T(0));
  return out.grad;
}

template <typename T>
void set_node(Tensor<T>& out, const char* kind,
              std::vector<Tensor<T>> parents, std::function<void()> fn) {
  out.node = std::make_shared<Node<T>>();
  out.node->kind = kind;
  out.node->parents = std::move(parents);
  out.node->backward_fn = std::move(fn);
}

template <typename T>
std::shared_ptr<std::vector<T>> grad_or_null(const Tensor<T>& t) {
  return t.requires_grad ? t.grad : nullptr;
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (const T v : *t.data)
    if (!std::isfinite(static_cast<double>(v)))
      throw InternalError(std::string(op) + ": non-finite input");
}

inline int as_int(long v) { return static_cast<int>(v); }

}  // namespace detail

// ---------------------------------------------------------------- add ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape != b.shape)
    throw InternalError("add: shape mismatch " + shape_str(a.shape) + " vs " +
                        shape_str(b.shape));
  auto out = Tensor<T>::zeros(a.shape);
  const long n = a.size();
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  for (long i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (detail::wants_grad<T>({&a, &b})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "add", {a, b},
                     [ag = detail::grad_or_null(a),
                      bg = detail::grad_or_null(b), og, n]() {
                       const T* g = og->data();
                       if (ag)
                         for (long i = 0; i < n; ++i) (*ag)[i] += g[i];
                       if (bg)
                         for (long i = 0; i < n; ++i) (*bg)[i] += g[i];
                     });
  }
  return out;
}

// Broadcast a length-C row vector over every row of a {R,C} matrix.
template <typename T>
Tensor<T> add_row(const Tensor<T>& mat, const Tensor<T>& row) {
  const long rws = mat.rows(), c = mat.cols();
  if (row.size() != c)
    throw InternalError("add_row: row length " + shape_str(row.shape) +
                        " vs cols " + shape_str(mat.shape));
  auto out = Tensor<T>::zeros(mat.shape);
  const T* pm = mat.ptr();
  const T* pr = row.ptr();
  T* po = out.ptr();
  for (long r = 0; r < rws; ++r)
    for (long j = 0; j < c; ++j) po[r * c + j] = pm[r * c + j] + pr[j];
  if (detail::wants_grad<T>({&mat, &row})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "add_row", {mat, row},
                     [mg = detail::grad_or_null(mat),
                      rg = detail::grad_or_null(row), og, rws, c]() {
                       const T* g = og->data();
                       if (mg)
                         for (long i = 0; i < rws * c; ++i) (*mg)[i] += g[i];
                       if (rg)
                         for (long r = 0; r < rws; ++r)
                           for (long j = 0; j < c; ++j)
                             (*rg)[j] += g[r * c + j];
                     });
  }
  return out;
}

// -------------------------------------------------------------- scale ----

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  auto out = Tensor<T>::zeros(a.shape);
  const long n = a.size();
  const T* pa = a.ptr();
  T* po = out.ptr();
  for (long i = 0; i < n; ++i) po[i] = c * pa[i];
  if (detail::wants_grad<T>({&a})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "scale", {a}, [ag = a.grad, og, c, n]() {
      const T* g = og->data();
      for (long i = 0; i < n; ++i) (*ag)[i] += c * g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------- mul ----

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape != b.shape)
    throw InternalError("mul: shape mismatch " + shape_str(a.shape) + " vs " +
                        shape_str(b.shape));
  auto out = Tensor<T>::zeros(a.shape);
  const long n = a.size();
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  for (long i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  if (detail::wants_grad<T>({&a, &b})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "mul", {a, b},
                     [ag = detail::grad_or_null(a),
                      bg = detail::grad_or_null(b), ad = a.data, bd = b.data,
                      og, n]() {
                       const T* g = og->data();
                       if (ag)
                         for (long i = 0; i < n; ++i)
                           (*ag)[i] += (*bd)[i] * g[i];
                       if (bg)
                         for (long i = 0; i < n; ++i)
                           (*bg)[i] += (*ad)[i] * g[i];
                     });
  }
  return out;
}

// ------------------------------------------------------------- matmul ----

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
    throw InternalError("matmul: incompatible shapes " + shape_str(a.shape) +
                        " x " + shape_str(b.shape));
  const long r = a.shape[0], k = a.shape[1], c = b.shape[1];
  auto out = Tensor<T>::zeros({r, c});
  using detail::as_int;
  kernels::gemm_nn<T>(as_int(r), as_int(c), as_int(k), a.ptr(), as_int(k),
                      b.ptr(), as_int(c), out.ptr(), as_int(c), false);
  if (detail::wants_grad<T>({&a, &b})) {
    auto og = detail::prep_grad(out);
    detail::set_node(
        out, "matmul", {a, b},
        [ag = detail::grad_or_null(a), bg = detail::grad_or_null(b),
         ad = a.data, bd = b.data, og, r, k, c]() {
          using detail::as_int;
          if (ag)  // dA += G * B^T
            kernels::gemm_nt<T>(as_int(r), as_int(k), as_int(c), og->data(),
                                as_int(c), bd->data(), as_int(c), ag->data(),
                                as_int(k), true);
          if (bg)  // dB += A^T * G
            kernels::gemm_tn<T>(as_int(k), as_int(c), as_int(r), ad->data(),
                                as_int(k), og->data(), as_int(c), bg->data(),
                                as_int(c), true);
        });
  }
  return out;
}

// ---------------------------------------------------------- matmul_nt ----

// a {r,k} * b^T where b is {c,k}; result {r,c}.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[1])
    throw InternalError("matmul_nt: incompatible shapes " +
                        shape_str(a.shape) + " x " + shape_str(b.shape));
  const long r = a.shape[0], k = a.shape[1], c = b.shape[0];
  auto out = Tensor<T>::zeros({r, c});
  using detail::as_int;
  kernels::gemm_nt<T>(as_int(r), as_int(c), as_int(k), a.ptr(), as_int(k),
                      b.ptr(), as_int(k), out.ptr(), as_int(c), false);
  if (detail::wants_grad<T>({&a, &b})) {
    auto og = detail::prep_grad(out);
    detail::set_node(
        out, "matmul_nt", {a, b},
        [ag = detail::grad_or_null(a), bg = detail::grad_or_null(b),
         ad = a.data, bd = b.data, og, r, k, c]() {
          using detail::as_int;
          if (ag)  // dA += G * B
            kernels::gemm_nn<T>(as_int(r), as_int(k), as_int(c), og->data(),
                                as_int(c), bd->data(), as_int(k), ag->data(),
                                as_int(k), true);
          if (bg)  // dB += G^T * A
            kernels::gemm_tn<T>(as_int(c), as_int(k), as_int(r), og->data(),
                                as_int(c), ad->data(), as_int(k), bg->data(),
                                as_int(k), true);
        });
  }
  return out;
}

// -------------------------------------------------------- permute_cols ----

// out[:, j] = x[:, perm[j]]. perm must be a permutation of 0..cols-1; the
// reorder is exact (no arithmetic), so it commutes with any later reduction.
template <typename T>
Tensor<T> permute_cols(const Tensor<T>& x, const std::vector<int>& perm) {
  const long rws = x.rows(), c = x.cols();
  if (long(perm.size()) != c)
    throw InternalError("permute_cols: perm size mismatch");
  std::vector<char> seen(size_t(c), 0);
  for (int p : perm) {
    if (p < 0 || p >= c || seen[size_t(p)])
      throw InternalError("permute_cols: not a permutation");
    seen[size_t(p)] = 1;
  }
  auto out = Tensor<T>::zeros(x.shape);
  const T* px = x.ptr();
  T* po = out.ptr();
  for (long r = 0; r < rws; ++r)
    for (long j = 0; j < c; ++j) po[r * c + j] = px[r * c + perm[size_t(j)]];
  if (detail::wants_grad<T>({&x})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "permute_cols", {x},
                     [xg = x.grad, og, perm, rws, c]() {
                       const T* g = og->data();
                       for (long r = 0; r < rws; ++r)
                         for (long j = 0; j < c; ++j)
                           (*xg)[r * c + perm[size_t(j)]] += g[r * c + j];
                     });
  }
  return out;
}

// ------------------------------------------------------------- linear ----

// y = x * w^T (+ bias). x: {N,in}, w: {out,in}, bias: {out} or undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& bias = Tensor<T>{}) {
  if (w.shape.size() != 2 || x.cols() != w.shape[1])
    throw InternalError("linear: input cols " + shape_str(x.shape) +
                        " vs weight " + shape_str(w.shape));
  const long n = x.rows(), in = w.shape[1], out_dim = w.shape[0];
  const bool has_bias = bias.defined();
  if (has_bias && bias.size() != out_dim)
    throw InternalError("linear: bias size mismatch");
  Shape out_shape = x.shape;
  out_shape.back() = out_dim;
  auto out = Tensor<T>::zeros(out_shape);
  using detail::as_int;
  kernels::gemm_nt<T>(as_int(n), as_int(out_dim), as_int(in), x.ptr(),
                      as_int(in), w.ptr(), as_int(in), out.ptr(),
                      as_int(out_dim), false);
  if (has_bias) {
    T* po = out.ptr();
    const T* pb = bias.ptr();
    for (long r = 0; r < n; ++r)
      for (long j = 0; j < out_dim; ++j) po[r * out_dim + j] += pb[j];
  }
  const Tensor<T>* bias_ptr = has_bias ? &bias : nullptr;
  if (detail::wants_grad<T>({&x, &w, bias_ptr})) {
    auto og = detail::prep_grad(out);
    std::vector<Tensor<T>> parents = {x, w};
    if (has_bias) parents.push_back(bias);
    detail::set_node(
        out, "linear", std::move(parents),
        [xg = detail::grad_or_null(x), wg = detail::grad_or_null(w),
         bg = has_bias ? detail::grad_or_null(bias) : nullptr, xd = x.data,
         wd = w.data, og, n, in, out_dim]() {
          using detail::as_int;
          if (xg)  // dX += G * W
            kernels::gemm_nn<T>(as_int(n), as_int(in), as_int(out_dim),
                                og->data(), as_int(out_dim), wd->data(),
                                as_int(in), xg->data(), as_int(in), true);
          if (wg)  // dW += G^T * X
            kernels::gemm_tn<T>(as_int(out_dim), as_int(in), as_int(n),
                                og->data(), as_int(out_dim), xd->data(),
                                as_int(in), wg->data(), as_int(in), true);
          if (bg) {
            const T* g = og->data();
            for (long r = 0; r < n; ++r)
              for (long j = 0; j < out_dim; ++j) (*bg)[j] += g[r * out_dim + j];
          }
        });
  }
  return out;
}

// --------------------------------------------------------------- gelu ----

// Exact GELU: x * Phi(x). Smooth everywhere, so central differences behave.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  auto out = Tensor<T>::zeros(x.shape);
  const long n = x.size();
  const T* px = x.ptr();
  T* po = out.ptr();
  for (long i = 0; i < n; ++i) {
    const double v = static_cast<double>(px[i]);
    po[i] = static_cast<T>(v * 0.5 * (1.0 + std::erf(v * kInvSqrt2)));
  }
  if (detail::wants_grad<T>({&x})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "gelu", {x}, [xg = x.grad, xd = x.data, og, n]() {
      const T* g = og->data();
      for (long i = 0; i < n; ++i) {
        const double v = static_cast<double>((*xd)[i]);
        const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        (*xg)[i] += g[i] * static_cast<T>(phi + v * pdf);
      }
    });
  }
  return out;
}

// ------------------------------------------------------- softmax_rows ----

// Row-wise softmax over the last dim, max-subtracted. Errors on non-finite
// input; output rows sum to 1.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  detail::check_finite(x, "softmax");
  const long rws = x.rows(), c = x.cols();
  auto out = Tensor<T>::zeros(x.shape);
  const T* px = x.ptr();
  T* po = out.ptr();
  for (long r = 0; r < rws; ++r) {
    const T* xr = px + r * c;
    T* orow = po + r * c;
    T m = xr[0];
    for (long j = 1; j < c; ++j) m = xr[j] > m ? xr[j] : m;
    T s = T(0);
    for (long j = 0; j < c; ++j) {
      orow[j] = std::exp(xr[j] - m);
      s += orow[j];
    }
    const T inv = T(1) / s;
    for (long j = 0; j < c; ++j) orow[j] *= inv;
  }
  if (detail::wants_grad<T>({&x})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "softmax", {x},
                     [xg = x.grad, pd = out.data, og, rws, c]() {
                       const T* g = og->data();
                       const T* p = pd->data();
                       for (long r = 0; r < rws; ++r) {
                         const T* gr = g + r * c;
                         const T* pr = p + r * c;
                         T dotv = T(0);
                         for (long j = 0; j < c; ++j) dotv += gr[j] * pr[j];
                         for (long j = 0; j < c; ++j)
                           (*xg)[r * c + j] += pr[j] * (gr[j] - dotv);
                       }
                     });
  }
  return out;
}

// ----------------------------------------------------- layer_norm_rows ----

// Per-row normalization over the last dim (population variance), then
// elementwise gain/bias. Before the affine part every row has mean 0 and
// variance 1 up to eps.
template <typename T>
Tensor<T> layer_norm_rows(const Tensor<T>& x, const Tensor<T>& gain,
                          const Tensor<T>& bias, T eps = T(1e-8)) {
  const long rws = x.rows(), c = x.cols();
  if (gain.size() != c || bias.size() != c)
    throw InternalError("layer_norm: gain/bias must match last dim");
  auto out = Tensor<T>::zeros(x.shape);
  auto xhat = std::make_shared<std::vector<T>>(rws * c);
  auto inv_sd = std::make_shared<std::vector<T>>(rws);
  const T* px = x.ptr();
  const T* pg = gain.ptr();
  const T* pb = bias.ptr();
  T* po = out.ptr();
  for (long r = 0; r < rws; ++r) {
    const T* xr = px + r * c;
    T mu = T(0);
    for (long j = 0; j < c; ++j) mu += xr[j];
    mu /= T(c);
    T var = T(0);
    for (long j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= T(c);
    const T isd = T(1) / std::sqrt(var + eps);
    (*inv_sd)[r] = isd;
    for (long j = 0; j < c; ++j) {
      const T h = (xr[j] - mu) * isd;
      (*xhat)[r * c + j] = h;
      po[r * c + j] = pg[j] * h + pb[j];
    }
  }
  if (detail::wants_grad<T>({&x, &gain, &bias})) {
    auto og = detail::prep_grad(out);
    detail::set_node(
        out, "layer_norm", {x, gain, bias},
        [xg = detail::grad_or_null(x), gg = detail::grad_or_null(gain),
         bg = detail::grad_or_null(bias), gd = gain.data, xhat, inv_sd, og,
         rws, c]() {
          const T* g = og->data();
          for (long r = 0; r < rws; ++r) {
            const T* gr = g + r * c;
            const T* hr = xhat->data() + r * c;
            if (gg)
              for (long j = 0; j < c; ++j) (*gg)[j] += gr[j] * hr[j];
            if (bg)
              for (long j = 0; j < c; ++j) (*bg)[j] += gr[j];
            if (xg) {
              T mean_dh = T(0), mean_dh_h = T(0);
              for (long j = 0; j < c; ++j) {
                const T dh = gr[j] * (*gd)[j];
                mean_dh += dh;
                mean_dh_h += dh * hr[j];
              }
              mean_dh /= T(c);
              mean_dh_h /= T(c);
              const T isd = (*inv_sd)[r];
              for (long j = 0; j < c; ++j) {
                const T dh = gr[j] * (*gd)[j];
                (*xg)[r * c + j] += isd * (dh - mean_dh - hr[j] * mean_dh_h);
              }
            }
          }
        });
  }
  return out;
}

// ---------------------------------------------------------- embedding ----

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids) {
  if (table.shape.size() != 2)
    throw InternalError("embedding: table must be 2-D");
  const long v = table.shape[0], f = table.shape[1];
  const long n = static_cast<long>(ids.size());
  if (n == 0) throw InternalError("embedding: empty id list");
  for (int id : ids)
    if (id < 0 || id >= v)
      throw InternalError("embedding: id out of range");
  auto out = Tensor<T>::zeros({n, f});
  const T* pt = table.ptr();
  T* po = out.ptr();
  for (long r = 0; r < n; ++r)
    for (long j = 0; j < f; ++j) po[r * f + j] = pt[ids[r] * f + j];
  if (detail::wants_grad<T>({&table})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "embedding", {table},
                     [tg = table.grad, og, ids, f]() {
                       const T* g = og->data();
                       for (size_t r = 0; r < ids.size(); ++r)
                         for (long j = 0; j < f; ++j)
                           (*tg)[static_cast<long>(ids[r]) * f + j] +=
                               g[static_cast<long>(r) * f + j];
                     });
  }
  return out;
}

// Absolute sinusoidal position table {n, d}; a plain constant.
template <typename T>
Tensor<T> sinusoidal_pe(long n, long d) {
  auto out = Tensor<T>::zeros({n, d});
  T* po = out.ptr();
  for (long pos = 0; pos < n; ++pos) {
    for (long i = 0; 2 * i < d; ++i) {
      const double omega = std::pow(10000.0, -2.0 * double(i) / double(d));
      po[pos * d + 2 * i] = static_cast<T>(std::sin(double(pos) * omega));
      if (2 * i + 1 < d)
        po[pos * d + 2 * i + 1] = static_cast<T>(std::cos(double(pos) * omega));
    }
  }
  return out;
}

// -------------------------------------------------- attention internals ----

// Scaled per-head score matrices. q: {Nq,f}, k: {Nk,f} -> {heads,Nq,Nk},
// entry = (q_h[i] . k_h[j]) / sqrt(f/heads); with causal=true entries j > i
// are set to a large negative constant so softmax sends them to exactly 0.
template <typename T>
Tensor<T> attn_scores(const Tensor<T>& q, const Tensor<T>& k, int heads,
                      bool causal) {
  if (q.shape.size() != 2 || k.shape.size() != 2 || q.shape[1] != k.shape[1])
    throw InternalError("attn_scores: shape mismatch " + shape_str(q.shape) +
                        " vs " + shape_str(k.shape));
  const long f = q.shape[1];
  if (heads <= 0 || f % heads != 0)
    throw InternalError("attn_scores: model dim not divisible by heads");
  const long nq = q.shape[0], nk = k.shape[0], dh = f / heads;
  if (causal && nq != nk)
    throw InternalError("attn_scores: causal mask needs square scores");
  const T inv = T(1) / static_cast<T>(std::sqrt(double(dh)));
  auto out = Tensor<T>::zeros({heads, nq, nk});
  using detail::as_int;
  for (int h = 0; h < heads; ++h) {
    kernels::gemm_nt<T>(as_int(nq), as_int(nk), as_int(dh), q.ptr() + h * dh,
                        as_int(f), k.ptr() + h * dh, as_int(f),
                        out.ptr() + long(h) * nq * nk, as_int(nk), false);
  }
  T* po = out.ptr();
  const T masked = T(-1e30);
  for (long h = 0; h < heads; ++h)
    for (long i = 0; i < nq; ++i)
      for (long j = 0; j < nk; ++j) {
        T& s = po[(h * nq + i) * nk + j];
        s = (causal && j > i) ? masked : s * inv;
      }
  if (detail::wants_grad<T>({&q, &k})) {
    auto og = detail::prep_grad(out);
    detail::set_node(
        out, "attn_scores", {q, k},
        [qg = detail::grad_or_null(q), kg = detail::grad_or_null(k),
         qd = q.data, kd = k.data, og, heads, nq, nk, dh, f, inv, causal]() {
          using detail::as_int;
          std::vector<T> tmp(nq * nk);
          for (int h = 0; h < heads; ++h) {
            const T* gh = og->data() + long(h) * nq * nk;
            for (long i = 0; i < nq; ++i)
              for (long j = 0; j < nk; ++j)
                tmp[i * nk + j] =
                    (causal && j > i) ? T(0) : gh[i * nk + j] * inv;
            if (qg)  // dQ_h += tmp * K_h
              kernels::gemm_nn<T>(as_int(nq), as_int(dh), as_int(nk),
                                  tmp.data(), as_int(nk), kd->data() + h * dh,
                                  as_int(f), qg->data() + h * dh, as_int(f),
                                  true);
            if (kg)  // dK_h += tmp^T * Q_h
              kernels::gemm_tn<T>(as_int(nk), as_int(dh), as_int(nq),
                                  tmp.data(), as_int(nk), qd->data() + h * dh,
                                  as_int(f), kg->data() + h * dh, as_int(f),
                                  true);
          }
        });
  }
  return out;
}

// Head-wise probability/value mix: p {heads,Nq,Nk} x v {Nk,f} -> {Nq,f},
// writing each head's product into its column block (head concat).
template <typename T>
Tensor<T> attn_mix(const Tensor<T>& p, const Tensor<T>& v) {
  if (p.shape.size() != 3 || v.shape.size() != 2 || p.shape[2] != v.shape[0])
    throw InternalError("attn_mix: shape mismatch " + shape_str(p.shape) +
                        " vs " + shape_str(v.shape));
  const long heads = p.shape[0], nq = p.shape[1], nk = p.shape[2];
  const long f = v.shape[1];
  if (f % heads != 0)
    throw InternalError("attn_mix: value dim not divisible by heads");
  const long dh = f / heads;
  auto out = Tensor<T>::zeros({nq, f});
  using detail::as_int;
  for (long h = 0; h < heads; ++h)
    kernels::gemm_nn<T>(as_int(nq), as_int(dh), as_int(nk),
                        p.ptr() + h * nq * nk, as_int(nk), v.ptr() + h * dh,
                        as_int(f), out.ptr() + h * dh, as_int(f), false);
  if (detail::wants_grad<T>({&p, &v})) {
    auto og = detail::prep_grad(out);
    detail::set_node(
        out, "attn_mix", {p, v},
        [pg = detail::grad_or_null(p), vg = detail::grad_or_null(v),
         pd = p.data, vd = v.data, og, heads, nq, nk, dh, f]() {
          using detail::as_int;
          for (long h = 0; h < heads; ++h) {
            if (pg)  // dP_h += G_h * V_h^T
              kernels::gemm_nt<T>(as_int(nq), as_int(nk), as_int(dh),
                                  og->data() + h * dh, as_int(f),
                                  vd->data() + h * dh, as_int(f),
                                  pg->data() + h * nq * nk, as_int(nk), true);
            if (vg)  // dV_h += P_h^T * G_h
              kernels::gemm_tn<T>(as_int(nk), as_int(dh), as_int(nq),
                                  pd->data() + h * nq * nk, as_int(nk),
                                  og->data() + h * dh, as_int(f),
                                  vg->data() + h * dh, as_int(f), true);
          }
        });
  }
  return out;
}

template <typename T>
struct MhaParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

// Standard multi-head attention block: project, per-head scaled dot-product
// with optional causal mask, softmax, mix, output projection.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q_in, const Tensor<T>& kv_in,
                               const MhaParams<T>& p, int heads, bool causal) {
  auto q = linear(q_in, p.wq, p.bq);
  auto k = linear(kv_in, p.wk, p.bk);
  auto v = linear(kv_in, p.wv, p.bv);
  auto scores = attn_scores(q, k, heads, causal);
  auto probs = softmax_rows(scores);
  auto mixed = attn_mix(probs, v);
  return linear(mixed, p.wo, p.bo);
}

// ------------------------------------------------------- cosine_rows ----

// Pairwise cosine similarity: q {N,d} x p {K,d} -> {N,K}. Row/profile norms
// are floored at a tiny constant so a zero row yields 0 similarity rather
// than a division error.
template <typename T>
Tensor<T> cosine_rows(const Tensor<T>& q, const Tensor<T>& p) {
  if (q.shape.size() != 2 || p.shape.size() != 2 || q.shape[1] != p.shape[1])
    throw InternalError("cosine_rows: shape mismatch " + shape_str(q.shape) +
                        " vs " + shape_str(p.shape));
  const long n = q.shape[0], kk = p.shape[0], d = q.shape[1];
  const T tiny = T(1e-20);
  auto out = Tensor<T>::zeros({n, kk});
  auto qn = std::make_shared<std::vector<T>>(n);
  auto pn = std::make_shared<std::vector<T>>(kk);
  for (long i = 0; i < n; ++i) {
    const T s = kernels::dot<T>(q.ptr() + i * d, q.ptr() + i * d,
                                detail::as_int(d));
    (*qn)[i] = std::max(std::sqrt(s), tiny);
  }
  for (long j = 0; j < kk; ++j) {
    const T s = kernels::dot<T>(p.ptr() + j * d, p.ptr() + j * d,
                                detail::as_int(d));
    (*pn)[j] = std::max(std::sqrt(s), tiny);
  }
  T* po = out.ptr();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < kk; ++j)
      po[i * kk + j] = kernels::dot<T>(q.ptr() + i * d, p.ptr() + j * d,
                                       detail::as_int(d)) /
                       ((*qn)[i] * (*pn)[j]);
  if (detail::wants_grad<T>({&q, &p})) {
    auto og = detail::prep_grad(out);
    detail::set_node(
        out, "cosine_rows", {q, p},
        [qg = detail::grad_or_null(q), pg = detail::grad_or_null(p),
         qd = q.data, pd = p.data, cd = out.data, qn, pn, og, n, kk, d]() {
          const T* g = og->data();
          const T* c = cd->data();
          for (long i = 0; i < n; ++i) {
            const T* qi = qd->data() + i * d;
            for (long j = 0; j < kk; ++j) {
              const T gij = g[i * kk + j];
              if (gij == T(0)) continue;
              const T* pj = pd->data() + j * d;
              const T cij = c[i * kk + j];
              const T inq = T(1) / (*qn)[i];
              const T inp = T(1) / (*pn)[j];
              if (qg)
                for (long t = 0; t < d; ++t)
                  (*qg)[i * d + t] +=
                      gij * (pj[t] * inq * inp - cij * qi[t] * inq * inq);
              if (pg)
                for (long t = 0; t < d; ++t)
                  (*pg)[j * d + t] +=
                      gij * (qi[t] * inq * inp - cij * pj[t] * inp * inp);
            }
          }
        });
  }
  return out;
}

// ------------------------------------------------------ cross entropy ----

// Weighted sum over rows of (logsumexp(row) - row[target]): the stable form
// of -log softmax(row)[target]. Gradient w.r.t. the logits of row r is
// weight_r * (softmax(row) - onehot(target_r)).
template <typename T>
Tensor<T> ce_logits_sum(const Tensor<T>& logits, const std::vector<int>& targets,
                        const std::vector<T>& row_weights = {}) {
  detail::check_finite(logits, "ce_logits_sum");
  const long rws = logits.rows(), c = logits.cols();
  if (static_cast<long>(targets.size()) != rws)
    throw InternalError("ce_logits_sum: one target per row required");
  if (!row_weights.empty() && static_cast<long>(row_weights.size()) != rws)
    throw InternalError("ce_logits_sum: one weight per row required");
  for (long r = 0; r < rws; ++r)
    if (targets[r] < 0 || targets[r] >= c)
      throw InternalError("ce_logits_sum: target out of range");
  auto probs = std::make_shared<std::vector<T>>(rws * c);
  const T* px = logits.ptr();
  double loss = 0.0;
  for (long r = 0; r < rws; ++r) {
    const T w = row_weights.empty() ? T(1) : row_weights[r];
    const T* xr = px + r * c;
    T m = xr[0];
    for (long j = 1; j < c; ++j) m = xr[j] > m ? xr[j] : m;
    double s = 0.0;
    for (long j = 0; j < c; ++j) s += std::exp(double(xr[j] - m));
    const double lse = std::log(s) + double(m);
    for (long j = 0; j < c; ++j)
      (*probs)[r * c + j] = static_cast<T>(std::exp(double(xr[j]) - lse));
    loss += double(w) * (lse - double(xr[targets[r]]));
  }
  auto out = Tensor<T>::from({1}, {static_cast<T>(loss)});
  if (detail::wants_grad<T>({&logits})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "ce_logits_sum", {logits},
                     [xg = logits.grad, probs, og, targets, row_weights, rws,
                      c]() {
                       const T go = (*og)[0];
                       for (long r = 0; r < rws; ++r) {
                         const T w =
                             row_weights.empty() ? T(1) : row_weights[r];
                         if (w == T(0)) continue;
                         for (long j = 0; j < c; ++j) {
                           T delta = (*probs)[r * c + j];
                           if (j == targets[r]) delta -= T(1);
                           (*xg)[r * c + j] += go * w * delta;
                         }
                       }
                     });
  }
  return out;
}

// -log p[target] on an explicit probability vector.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& p, int target) {
  detail::check_finite(p, "cross_entropy");
  const long n = p.size();
  if (target < 0 || target >= n)
    throw InternalError("cross_entropy: target out of range");
  const T pt = (*p.data)[target];
  if (!(pt > T(0)))
    throw InternalError("cross_entropy: probability at target must be > 0");
  auto out = Tensor<T>::from({1}, {static_cast<T>(-std::log(double(pt)))});
  if (detail::wants_grad<T>({&p})) {
    auto og = detail::prep_grad(out);
    detail::set_node(out, "cross_entropy", {p},
                     [pg = p.grad, pd = p.data, og, target]() {
                       (*pg)[target] += -(*og)[0] / (*pd)[target];
                     });
  }
  return out;
}

// --------------------------------------------------------- conv1d_s2 ----

// Width-3, stride-2, zero-padded 1-D convolution over rows (time), the
// subsampling front-end unit: x {T,in} * w {out,3*in} + b -> {ceil(T/2),out}.
template <typename T>
Tensor<T> conv1d_s2(const Tensor<T>& x, const Tensor<T>& w,
                    const Tensor<T>& bias) {
  if (x.shape.size() != 2 || w.shape.size() != 2 ||
      w.shape[1] != 3 * x.shape[1])
    throw InternalError("conv1d_s2: weight must be {out, 3*in}");
  const long t_in = x.shape[0], in = x.shape[1], out_dim = w.shape[0];
  if (bias.size() != out_dim) throw InternalError("conv1d_s2: bias mismatch");
  const long t_out = (t_in + 1) / 2;
  auto col = std::make_shared<std::vector<T>>(t_out * 3 * in, T(0));
  const T* px = x.ptr();
  for (long tau = 0; tau < t_out; ++tau) {
    const long center = 2 * tau;
    for (int off = -1; off <= 1; ++off) {
      const long src = center + off;
      if (src < 0 || src >= t_in) continue;
      T* dst = col->data() + tau * 3 * in + (off + 1) * in;
      for (long j = 0; j < in; ++j) dst[j] = px[src * in + j];
    }
  }
  auto out = Tensor<T>::zeros({t_out, out_dim});
  using detail::as_int;
  kernels::gemm_nt<T>(as_int(t_out), as_int(out_dim), as_int(3 * in),
                      col->data(), as_int(3 * in), w.ptr(), as_int(3 * in),
                      out.ptr(), as_int(out_dim), false);
  {
    T* po = out.ptr();
    const T* pb = bias.ptr();
    for (long r = 0; r < t_out; ++r)
      for (long j = 0; j < out_dim; ++j) po[r * out_dim + j] += pb[j];
  }
  if (detail::wants_grad<T>({&x, &w, &bias})) {
    auto og = detail::prep_grad(out);
    detail::set_node(
        out, "conv1d_s2", {x, w, bias},
        [xg = detail::grad_or_null(x), wg = detail::grad_or_null(w),
         bg = detail::grad_or_null(bias), wd = w.data, col, og, t_in, in,
         out_dim, t_out]() {
          using detail::as_int;
          if (wg)  // dW += G^T * col
            kernels::gemm_tn<T>(as_int(out_dim), as_int(3 * in), as_int(t_out),
                                og->data(), as_int(out_dim), col->data(),
                                as_int(3 * in), wg->data(), as_int(3 * in),
                                true);
          if (bg) {
            const T* g = og->data();
            for (long r = 0; r < t_out; ++r)
              for (long j = 0; j < out_dim; ++j) (*bg)[j] += g[r * out_dim + j];
          }
          if (xg) {
            std::vector<T> dcol(t_out * 3 * in, T(0));
            kernels::gemm_nn<T>(as_int(t_out), as_int(3 * in), as_int(out_dim),
                                og->data(), as_int(out_dim), wd->data(),
                                as_int(3 * in), dcol.data(), as_int(3 * in),
                                false);
            for (long tau = 0; tau < t_out; ++tau) {
              const long center = 2 * tau;
              for (int off = -1; off <= 1; ++off) {
                const long src = center + off;
                if (src < 0 || src >= t_in) continue;
                const T* s = dcol.data() + tau * 3 * in + (off + 1) * in;
                for (long j = 0; j < in; ++j) (*xg)[src * in + j] += s[j];
              }
            }
          }
        });
  }
  return out;
}

}  // namespace sadiar::num

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

// Reference kernels, templated on the scalar type. The float specialization
// of these exact loops is the scalar lane that the SIMD variants are
// equivalence-tested against; double instantiations back the high-precision
// finite-difference checks.
namespace lomo::kern::ref {

// C[M,N] = alpha * A[M,K] * B[K,N] + beta * C
template <typename T>
void gemm_nn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  for (int i = 0; i < M; ++i) {
    T* c = C + static_cast<size_t>(i) * ldc;
    if (beta == T(0)) {
      for (int j = 0; j < N; ++j) c[j] = T(0);
    } else if (beta != T(1)) {
      for (int j = 0; j < N; ++j) c[j] *= beta;
    }
    const T* a = A + static_cast<size_t>(i) * lda;
    for (int k = 0; k < K; ++k) {
      const T aik = alpha * a[k];
      if (aik == T(0)) continue;
      const T* b = B + static_cast<size_t>(k) * ldb;
      for (int j = 0; j < N; ++j) c[j] += aik * b[j];
    }
  }
}

// C[M,N] = alpha * A[M,K] * B[N,K]^T + beta * C
template <typename T>
void gemm_nt(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<size_t>(i) * lda;
    T* c = C + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < N; ++j) {
      const T* b = B + static_cast<size_t>(j) * ldb;
      T acc = T(0);
      for (int k = 0; k < K; ++k) acc += a[k] * b[k];
      c[j] = alpha * acc + (beta == T(0) ? T(0) : beta * c[j]);
    }
  }
}

template <typename T>
void add(const T* a, const T* b, T* c, size_t n) {
  for (size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

template <typename T>
void sub(const T* a, const T* b, T* c, size_t n) {
  for (size_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* c, size_t n) {
  for (size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

// y += a * x
template <typename T>
void axpy(T a, const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scal(T a, T* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= a;
}

template <typename T>
T sum(const T* x, size_t n) {
  T s(0);
  for (size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
T dot(const T* a, const T* b, size_t n) {
  T s(0);
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T sumsq(const T* x, size_t n) {
  T s(0);
  for (size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

template <typename T>
void vexp(const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

template <typename T>
void silu(const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    T s = T(1) / (T(1) + std::exp(-x[i]));
    y[i] = x[i] * s;
  }
}

// gx = gy * d silu(x)/dx
template <typename T>
void silu_bwd(const T* x, const T* gy, T* gx, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    T s = T(1) / (T(1) + std::exp(-x[i]));
    gx[i] = gy[i] * (s * (T(1) + x[i] * (T(1) - s)));
  }
}

// In-place row-wise softmax with max subtraction.
template <typename T>
void softmax_rows(T* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    T* p = x + static_cast<size_t>(r) * cols;
    T m = p[0];
    for (int j = 1; j < cols; ++j) m = p[j] > m ? p[j] : m;
    T s(0);
    for (int j = 0; j < cols; ++j) {
      p[j] = std::exp(p[j] - m);
      s += p[j];
    }
    T inv = T(1) / s;
    for (int j = 0; j < cols; ++j) p[j] *= inv;
  }
}

// Adam update with bias corrections c1 = 1/(1-b1^t), c2 = 1/(1-b2^t).
template <typename T>
void adam(T* w, const T* g, T* m, T* v, size_t n, T lr, T beta1, T beta2,
          T eps, T c1, T c2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

template <typename T>
void transpose(const T* a, int rows, int cols, T* out) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out[static_cast<size_t>(j) * rows + i] = a[static_cast<size_t>(i) * cols + j];
}

}  // namespace lomo::kern::ref

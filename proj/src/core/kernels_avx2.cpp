#include "lomo/core/kernels.hpp"

// AVX2+FMA lane. This translation unit is the only one built with -mavx2;
// callers reach it through the dispatch table after a cpuid check.

#ifdef __AVX2__

#include <immintrin.h>

#include <cmath>

namespace lomo::kern {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehl_ps(lo, lo);
  lo = _mm_add_ps(lo, sh);
  sh = _mm_shuffle_ps(lo, lo, 1);
  lo = _mm_add_ss(lo, sh);
  return _mm_cvtss_f32(lo);
}

inline float hmax(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_max_ps(lo, hi);
  __m128 sh = _mm_movehl_ps(lo, lo);
  lo = _mm_max_ps(lo, sh);
  sh = _mm_shuffle_ps(lo, lo, 1);
  lo = _mm_max_ss(lo, sh);
  return _mm_cvtss_f32(lo);
}

// Polynomial exp after range reduction x = n*ln2 + r (Cephes coefficients).
inline __m256 exp256(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
  const __m256 p0 = _mm256_set1_ps(1.9875691500e-4f);
  const __m256 p1 = _mm256_set1_ps(1.3981999507e-3f);
  const __m256 p2 = _mm256_set1_ps(8.3334519073e-3f);
  const __m256 p3 = _mm256_set1_ps(4.1665795894e-2f);
  const __m256 p4 = _mm256_set1_ps(1.6666665459e-1f);
  const __m256 p5 = _mm256_set1_ps(5.0000001201e-1f);
  const __m256 one = _mm256_set1_ps(1.0f);

  x = _mm256_max_ps(_mm256_min_ps(x, hi), lo);

  __m256 fx = _mm256_fmadd_ps(x, log2e, _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, c1, x);
  x = _mm256_fnmadd_ps(fx, c2, x);

  __m256 z = _mm256_mul_ps(x, x);
  __m256 y = p0;
  y = _mm256_fmadd_ps(y, x, p1);
  y = _mm256_fmadd_ps(y, x, p2);
  y = _mm256_fmadd_ps(y, x, p3);
  y = _mm256_fmadd_ps(y, x, p4);
  y = _mm256_fmadd_ps(y, x, p5);
  y = _mm256_fmadd_ps(y, z, x);
  y = _mm256_add_ps(y, one);

  __m256i n = _mm256_cvttps_epi32(fx);
  n = _mm256_add_epi32(n, _mm256_set1_epi32(0x7f));
  n = _mm256_slli_epi32(n, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

inline __m256 sigmoid256(__m256 x) {
  __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), x));
  return _mm256_div_ps(_mm256_set1_ps(1.0f), _mm256_add_ps(_mm256_set1_ps(1.0f), e));
}

void gemm_nn(int M, int N, int K, float alpha, const float* A, int lda,
             const float* B, int ldb, float beta, float* C, int ldc) {
  const int N8 = N & ~7;
  const __m256 va = _mm256_set1_ps(alpha);
  const __m256 vb = _mm256_set1_ps(beta);

  int i = 0;
  for (; i + 4 <= M; i += 4) {
    const float* a0 = A + static_cast<size_t>(i) * lda;
    const float* a1 = a0 + lda;
    const float* a2 = a1 + lda;
    const float* a3 = a2 + lda;
    float* c0 = C + static_cast<size_t>(i) * ldc;
    float* c1 = c0 + ldc;
    float* c2 = c1 + ldc;
    float* c3 = c2 + ldc;
    for (int j = 0; j < N8; j += 8) {
      __m256 s0 = _mm256_setzero_ps();
      __m256 s1 = _mm256_setzero_ps();
      __m256 s2 = _mm256_setzero_ps();
      __m256 s3 = _mm256_setzero_ps();
      const float* bp = B + j;
      for (int k = 0; k < K; ++k, bp += ldb) {
        const __m256 b = _mm256_loadu_ps(bp);
        s0 = _mm256_fmadd_ps(_mm256_set1_ps(a0[k]), b, s0);
        s1 = _mm256_fmadd_ps(_mm256_set1_ps(a1[k]), b, s1);
        s2 = _mm256_fmadd_ps(_mm256_set1_ps(a2[k]), b, s2);
        s3 = _mm256_fmadd_ps(_mm256_set1_ps(a3[k]), b, s3);
      }
      if (beta == 0.0f) {
        _mm256_storeu_ps(c0 + j, _mm256_mul_ps(va, s0));
        _mm256_storeu_ps(c1 + j, _mm256_mul_ps(va, s1));
        _mm256_storeu_ps(c2 + j, _mm256_mul_ps(va, s2));
        _mm256_storeu_ps(c3 + j, _mm256_mul_ps(va, s3));
      } else {
        _mm256_storeu_ps(c0 + j, _mm256_fmadd_ps(va, s0, _mm256_mul_ps(vb, _mm256_loadu_ps(c0 + j))));
        _mm256_storeu_ps(c1 + j, _mm256_fmadd_ps(va, s1, _mm256_mul_ps(vb, _mm256_loadu_ps(c1 + j))));
        _mm256_storeu_ps(c2 + j, _mm256_fmadd_ps(va, s2, _mm256_mul_ps(vb, _mm256_loadu_ps(c2 + j))));
        _mm256_storeu_ps(c3 + j, _mm256_fmadd_ps(va, s3, _mm256_mul_ps(vb, _mm256_loadu_ps(c3 + j))));
      }
    }
  }
  for (; i < M; ++i) {
    const float* a = A + static_cast<size_t>(i) * lda;
    float* c = C + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < N8; j += 8) {
      __m256 s = _mm256_setzero_ps();
      const float* bp = B + j;
      for (int k = 0; k < K; ++k, bp += ldb)
        s = _mm256_fmadd_ps(_mm256_set1_ps(a[k]), _mm256_loadu_ps(bp), s);
      if (beta == 0.0f)
        _mm256_storeu_ps(c + j, _mm256_mul_ps(va, s));
      else
        _mm256_storeu_ps(c + j, _mm256_fmadd_ps(va, s, _mm256_mul_ps(vb, _mm256_loadu_ps(c + j))));
    }
  }
  if (N8 < N) {
    for (int r = 0; r < M; ++r) {
      const float* a = A + static_cast<size_t>(r) * lda;
      float* c = C + static_cast<size_t>(r) * ldc;
      for (int j = N8; j < N; ++j) {
        float s = 0.0f;
        for (int k = 0; k < K; ++k) s += a[k] * B[static_cast<size_t>(k) * ldb + j];
        c[j] = alpha * s + (beta == 0.0f ? 0.0f : beta * c[j]);
      }
    }
  }
}

void gemm_nt(int M, int N, int K, float alpha, const float* A, int lda,
             const float* B, int ldb, float beta, float* C, int ldc) {
  const int K8 = K & ~7;
  for (int i = 0; i < M; ++i) {
    const float* a = A + static_cast<size_t>(i) * lda;
    float* c = C + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < N; ++j) {
      const float* b = B + static_cast<size_t>(j) * ldb;
      __m256 acc = _mm256_setzero_ps();
      for (int k = 0; k < K8; k += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), acc);
      float s = hsum(acc);
      for (int k = K8; k < K; ++k) s += a[k] * b[k];
      c[j] = alpha * s + (beta == 0.0f ? 0.0f : beta * c[j]);
    }
  }
}

void add(const float* a, const float* b, float* c, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub(const float* a, const float* b, float* c, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul(const float* a, const float* b, float* c, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void axpy(float a, const float* x, float* y, size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void scal(float a, float* x, size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

float sum(const float* x, size_t n) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

float dot(const float* a, const float* b, size_t n) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  float s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

float sumsq(const float* x, size_t n) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    acc = _mm256_fmadd_ps(v, v, acc);
  }
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void vexp(const float* x, float* y, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, exp256(_mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] = std::exp(x[i]);
}

void silu(const float* x, float* y, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    _mm256_storeu_ps(y + i, _mm256_mul_ps(v, sigmoid256(v)));
  }
  for (; i < n; ++i) {
    float s = 1.0f / (1.0f + std::exp(-x[i]));
    y[i] = x[i] * s;
  }
}

void silu_bwd(const float* x, const float* gy, float* gx, size_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 s = sigmoid256(v);
    // d/dx (x*s) = s * (1 + x*(1-s))
    const __m256 d = _mm256_mul_ps(s, _mm256_fmadd_ps(v, _mm256_sub_ps(one, s), one));
    _mm256_storeu_ps(gx + i, _mm256_mul_ps(_mm256_loadu_ps(gy + i), d));
  }
  for (; i < n; ++i) {
    float s = 1.0f / (1.0f + std::exp(-x[i]));
    gx[i] = gy[i] * (s * (1.0f + x[i] * (1.0f - s)));
  }
}

void softmax_rows(float* x, int rows, int cols) {
  const int c8 = cols & ~7;
  for (int r = 0; r < rows; ++r) {
    float* p = x + static_cast<size_t>(r) * cols;
    __m256 vm = _mm256_set1_ps(-3.4e38f);
    int j = 0;
    for (; j < c8; j += 8) vm = _mm256_max_ps(vm, _mm256_loadu_ps(p + j));
    float m = c8 > 0 ? hmax(vm) : p[0];
    for (; j < cols; ++j) m = p[j] > m ? p[j] : m;

    const __m256 vmax = _mm256_set1_ps(m);
    __m256 vs = _mm256_setzero_ps();
    for (j = 0; j < c8; j += 8) {
      const __m256 e = exp256(_mm256_sub_ps(_mm256_loadu_ps(p + j), vmax));
      _mm256_storeu_ps(p + j, e);
      vs = _mm256_add_ps(vs, e);
    }
    float s = hsum(vs);
    for (; j < cols; ++j) {
      p[j] = std::exp(p[j] - m);
      s += p[j];
    }

    const float inv = 1.0f / s;
    const __m256 vi = _mm256_set1_ps(inv);
    for (j = 0; j < c8; j += 8)
      _mm256_storeu_ps(p + j, _mm256_mul_ps(vi, _mm256_loadu_ps(p + j)));
    for (; j < cols; ++j) p[j] *= inv;
  }
}

void adam(float* w, const float* g, float* m, float* v, size_t n, float lr,
          float beta1, float beta2, float eps, float c1, float c2) {
  const __m256 vb1 = _mm256_set1_ps(beta1);
  const __m256 vb2 = _mm256_set1_ps(beta2);
  const __m256 v1m = _mm256_set1_ps(1.0f - beta1);
  const __m256 v2m = _mm256_set1_ps(1.0f - beta2);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 vc1 = _mm256_set1_ps(c1);
  const __m256 vc2 = _mm256_set1_ps(c2);
  const __m256 veps = _mm256_set1_ps(eps);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    __m256 mv = _mm256_fmadd_ps(vb1, _mm256_loadu_ps(m + i), _mm256_mul_ps(v1m, gv));
    __m256 vv = _mm256_fmadd_ps(vb2, _mm256_loadu_ps(v + i), _mm256_mul_ps(v2m, _mm256_mul_ps(gv, gv)));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    const __m256 den = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vv, vc2)), veps);
    const __m256 step = _mm256_div_ps(_mm256_mul_ps(vlr, _mm256_mul_ps(mv, vc1)), den);
    _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops table = {
      &gemm_nn, &gemm_nt, &add,  &sub,   &mul,  &axpy,    &scal,         &sum,
      &dot,     &sumsq,   &vexp, &silu,  &silu_bwd, &softmax_rows, &adam,
  };
  return table;
}

}  // namespace lomo::kern

#else

namespace lomo::kern {
const Ops& avx2_ops() { return scalar_ops(); }
}  // namespace lomo::kern

#endif

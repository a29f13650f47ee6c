#pragma once

#include <cstddef>
#include <string>

#include "lomo/core/kern_generic.hpp"

// Float compute kernels behind a function-pointer table. Two lanes are
// compiled in: a scalar lane (the templated reference loops) and an AVX2+FMA
// lane. The active lane is picked once at startup from cpuid, and can be
// pinned with the LOMO_KERNELS env var ("scalar" or "avx2") or force_lane().
namespace lomo::kern {

struct Ops {
  void (*gemm_nn)(int M, int N, int K, float alpha, const float* A, int lda,
                  const float* B, int ldb, float beta, float* C, int ldc);
  void (*gemm_nt)(int M, int N, int K, float alpha, const float* A, int lda,
                  const float* B, int ldb, float beta, float* C, int ldc);
  void (*add)(const float* a, const float* b, float* c, size_t n);
  void (*sub)(const float* a, const float* b, float* c, size_t n);
  void (*mul)(const float* a, const float* b, float* c, size_t n);
  void (*axpy)(float a, const float* x, float* y, size_t n);
  void (*scal)(float a, float* x, size_t n);
  float (*sum)(const float* x, size_t n);
  float (*dot)(const float* a, const float* b, size_t n);
  float (*sumsq)(const float* x, size_t n);
  void (*vexp)(const float* x, float* y, size_t n);
  void (*silu)(const float* x, float* y, size_t n);
  void (*silu_bwd)(const float* x, const float* gy, float* gx, size_t n);
  void (*softmax_rows)(float* x, int rows, int cols);
  void (*adam)(float* w, const float* g, float* m, float* v, size_t n,
               float lr, float beta1, float beta2, float eps, float c1,
               float c2);
};

enum class Lane { scalar, avx2 };

const Ops& scalar_ops();
const Ops& avx2_ops();

bool avx2_supported();

// Active table. Resolved on first use; stable afterwards unless forced.
const Ops& ops();
Lane active_lane();
void force_lane(Lane lane);
std::string lane_name(Lane lane);

// Type-dispatched kernel access: float goes through the runtime table,
// double always runs the reference loops. Lets numeric code be written once
// and instantiated at double for gradient checks.
template <typename T>
struct Kern;

template <>
struct Kern<float> {
  static void gemm_nn(int M, int N, int K, float alpha, const float* A,
                      int lda, const float* B, int ldb, float beta, float* C,
                      int ldc) {
    ops().gemm_nn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
  }
  static void gemm_nt(int M, int N, int K, float alpha, const float* A,
                      int lda, const float* B, int ldb, float beta, float* C,
                      int ldc) {
    ops().gemm_nt(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
  }
  static void add(const float* a, const float* b, float* c, size_t n) {
    ops().add(a, b, c, n);
  }
  static void sub(const float* a, const float* b, float* c, size_t n) {
    ops().sub(a, b, c, n);
  }
  static void mul(const float* a, const float* b, float* c, size_t n) {
    ops().mul(a, b, c, n);
  }
  static void axpy(float a, const float* x, float* y, size_t n) {
    ops().axpy(a, x, y, n);
  }
  static void scal(float a, float* x, size_t n) { ops().scal(a, x, n); }
  static float sum(const float* x, size_t n) { return ops().sum(x, n); }
  static float dot(const float* a, const float* b, size_t n) {
    return ops().dot(a, b, n);
  }
  static float sumsq(const float* x, size_t n) { return ops().sumsq(x, n); }
  static void vexp(const float* x, float* y, size_t n) { ops().vexp(x, y, n); }
  static void silu(const float* x, float* y, size_t n) { ops().silu(x, y, n); }
  static void silu_bwd(const float* x, const float* gy, float* gx, size_t n) {
    ops().silu_bwd(x, gy, gx, n);
  }
  static void softmax_rows(float* x, int rows, int cols) {
    ops().softmax_rows(x, rows, cols);
  }
  static void adam(float* w, const float* g, float* m, float* v, size_t n,
                   float lr, float beta1, float beta2, float eps, float c1,
                   float c2) {
    ops().adam(w, g, m, v, n, lr, beta1, beta2, eps, c1, c2);
  }
};

template <>
struct Kern<double> {
  static void gemm_nn(int M, int N, int K, double alpha, const double* A,
                      int lda, const double* B, int ldb, double beta,
                      double* C, int ldc) {
    ref::gemm_nn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
  }
  static void gemm_nt(int M, int N, int K, double alpha, const double* A,
                      int lda, const double* B, int ldb, double beta,
                      double* C, int ldc) {
    ref::gemm_nt(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
  }
  static void add(const double* a, const double* b, double* c, size_t n) {
    ref::add(a, b, c, n);
  }
  static void sub(const double* a, const double* b, double* c, size_t n) {
    ref::sub(a, b, c, n);
  }
  static void mul(const double* a, const double* b, double* c, size_t n) {
    ref::mul(a, b, c, n);
  }
  static void axpy(double a, const double* x, double* y, size_t n) {
    ref::axpy(a, x, y, n);
  }
  static void scal(double a, double* x, size_t n) { ref::scal(a, x, n); }
  static double sum(const double* x, size_t n) { return ref::sum(x, n); }
  static double dot(const double* a, const double* b, size_t n) {
    return ref::dot(a, b, n);
  }
  static double sumsq(const double* x, size_t n) { return ref::sumsq(x, n); }
  static void vexp(const double* x, double* y, size_t n) {
    ref::vexp(x, y, n);
  }
  static void silu(const double* x, double* y, size_t n) {
    ref::silu(x, y, n);
  }
  static void silu_bwd(const double* x, const double* gy, double* gx,
                       size_t n) {
    ref::silu_bwd(x, gy, gx, n);
  }
  static void softmax_rows(double* x, int rows, int cols) {
    ref::softmax_rows(x, rows, cols);
  }
  static void adam(double* w, const double* g, double* m, double* v, size_t n,
                   double lr, double beta1, double beta2, double eps,
                   double c1, double c2) {
    ref::adam(w, g, m, v, n, lr, beta1, beta2, eps, c1, c2);
  }
};

}  // namespace lomo::kern

#pragma once

#include <cstddef>

// Dense double-precision primitives behind the network engine and the
// attack inner loops. Every operation has a scalar reference implementation;
// on x86-64 with AVX2+FMA a vectorized variant is selected at runtime.
// The environment variable IMCLAB_KERNELS=scalar|avx2 overrides the choice.

namespace imclab::kernels {

// Name of the active backend: "scalar" or "avx2".
const char* backend();

double dot(const double* a, const double* b, std::size_t n);
void   axpy(double a, const double* x, double* y, std::size_t n);  // y += a*x
double sum(const double* x, std::size_t n);
double l1_diff(const double* a, const double* b, std::size_t n);
double l2sq_diff(const double* a, const double* b, std::size_t n);
double linf_diff(const double* a, const double* b, std::size_t n);

void relu(const double* x, double* y, std::size_t n);
// delta[i] = 0 where pre[i] <= 0 (subgradient at 0 is 0)
void relu_bwd(const double* pre, double* delta, std::size_t n);
void square(const double* x, double* y, std::size_t n);
// delta[i] *= 2*pre[i]
void square_bwd(const double* pre, double* delta, std::size_t n);

void clamp01(double* x, std::size_t n);

// One signed projected-gradient step:
// x[i] = clip(x[i] - step*sign(g[i]), max(x0[i]-eps, 0), min(x0[i]+eps, 1))
void pgd_step(double* x, const double* g, const double* x0,
              double step, double eps, std::size_t n);

void sgd_step(double* p, const double* g, double lr, std::size_t n);
// bias1 = 1 - beta1^t, bias2 = 1 - beta2^t
void adam_step(double* p, double* m, double* v, const double* g,
               double lr, double beta1, double beta2, double eps,
               double bias1, double bias2, std::size_t n);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void   axpy(double a, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double l1_diff(const double* a, const double* b, std::size_t n);
double l2sq_diff(const double* a, const double* b, std::size_t n);
double linf_diff(const double* a, const double* b, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_bwd(const double* pre, double* delta, std::size_t n);
void square(const double* x, double* y, std::size_t n);
void square_bwd(const double* pre, double* delta, std::size_t n);
void clamp01(double* x, std::size_t n);
void pgd_step(double* x, const double* g, const double* x0,
              double step, double eps, std::size_t n);
void sgd_step(double* p, const double* g, double lr, std::size_t n);
void adam_step(double* p, double* m, double* v, const double* g,
               double lr, double beta1, double beta2, double eps,
               double bias1, double bias2, std::size_t n);
}  // namespace scalar

#if IMCLAB_KERNELS_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void   axpy(double a, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double l1_diff(const double* a, const double* b, std::size_t n);
double l2sq_diff(const double* a, const double* b, std::size_t n);
double linf_diff(const double* a, const double* b, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_bwd(const double* pre, double* delta, std::size_t n);
void square(const double* x, double* y, std::size_t n);
void square_bwd(const double* pre, double* delta, std::size_t n);
void clamp01(double* x, std::size_t n);
void pgd_step(double* x, const double* g, const double* x0,
              double step, double eps, std::size_t n);
void sgd_step(double* p, const double* g, double lr, std::size_t n);
void adam_step(double* p, double* m, double* v, const double* g,
               double lr, double beta1, double beta2, double eps,
               double bias1, double bias2, std::size_t n);
}  // namespace avx2
#endif

}  // namespace imclab::kernels

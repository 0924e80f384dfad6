#include "imclab/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace imclab::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double l1_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

double l2sq_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double linf_diff(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void relu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(const double* pre, double* delta, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (pre[i] <= 0.0) delta[i] = 0.0;
  }
}

void square(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * x[i];
}

void square_bwd(const double* pre, double* delta, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) delta[i] *= 2.0 * pre[i];
}

void clamp01(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::min(std::max(x[i], 0.0), 1.0);
}

void pgd_step(double* x, const double* g, const double* x0,
              double step, double eps, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (g[i] > 0.0) ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
    const double lo = std::max(x0[i] - eps, 0.0);
    const double hi = std::min(x0[i] + eps, 1.0);
    x[i] = std::min(std::max(x[i] - step * s, lo), hi);
  }
}

void sgd_step(double* p, const double* g, double lr, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) p[i] -= lr * g[i];
}

void adam_step(double* p, double* m, double* v, const double* g,
               double lr, double beta1, double beta2, double eps,
               double bias1, double bias2, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace imclab::kernels::scalar

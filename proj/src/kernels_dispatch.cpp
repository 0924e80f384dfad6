#include "imclab/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace imclab::kernels {

namespace {

struct Ops {
  const char* name;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*l1_diff)(const double*, const double*, std::size_t);
  double (*l2sq_diff)(const double*, const double*, std::size_t);
  double (*linf_diff)(const double*, const double*, std::size_t);
  void (*relu)(const double*, double*, std::size_t);
  void (*relu_bwd)(const double*, double*, std::size_t);
  void (*square)(const double*, double*, std::size_t);
  void (*square_bwd)(const double*, double*, std::size_t);
  void (*clamp01)(double*, std::size_t);
  void (*pgd_step)(double*, const double*, const double*, double, double, std::size_t);
  void (*sgd_step)(double*, const double*, double, std::size_t);
  void (*adam_step)(double*, double*, double*, const double*,
                    double, double, double, double, double, double, std::size_t);
};

constexpr Ops kScalarOps = {
    "scalar",
    scalar::dot, scalar::axpy, scalar::sum,
    scalar::l1_diff, scalar::l2sq_diff, scalar::linf_diff,
    scalar::relu, scalar::relu_bwd, scalar::square, scalar::square_bwd,
    scalar::clamp01, scalar::pgd_step, scalar::sgd_step, scalar::adam_step,
};

#if IMCLAB_KERNELS_AVX2
constexpr Ops kAvx2Ops = {
    "avx2",
    avx2::dot, avx2::axpy, avx2::sum,
    avx2::l1_diff, avx2::l2sq_diff, avx2::linf_diff,
    avx2::relu, avx2::relu_bwd, avx2::square, avx2::square_bwd,
    avx2::clamp01, avx2::pgd_step, avx2::sgd_step, avx2::adam_step,
};

bool cpu_has_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const Ops& select_ops() {
  static const Ops& ops = []() -> const Ops& {
    const char* req = std::getenv("IMCLAB_KERNELS");
#if IMCLAB_KERNELS_AVX2
    if (req != nullptr) {
      if (std::strcmp(req, "scalar") == 0) return kScalarOps;
      if (std::strcmp(req, "avx2") == 0) {
        if (!cpu_has_avx2()) throw std::runtime_error("IMCLAB_KERNELS=avx2 but CPU lacks AVX2/FMA");
        return kAvx2Ops;
      }
    }
    return cpu_has_avx2() ? kAvx2Ops : kScalarOps;
#else
    (void)req;
    return kScalarOps;
#endif
  }();
  return ops;
}

}  // namespace

const char* backend() { return select_ops().name; }

double dot(const double* a, const double* b, std::size_t n) { return select_ops().dot(a, b, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { select_ops().axpy(a, x, y, n); }
double sum(const double* x, std::size_t n) { return select_ops().sum(x, n); }
double l1_diff(const double* a, const double* b, std::size_t n) { return select_ops().l1_diff(a, b, n); }
double l2sq_diff(const double* a, const double* b, std::size_t n) { return select_ops().l2sq_diff(a, b, n); }
double linf_diff(const double* a, const double* b, std::size_t n) { return select_ops().linf_diff(a, b, n); }
void relu(const double* x, double* y, std::size_t n) { select_ops().relu(x, y, n); }
void relu_bwd(const double* pre, double* delta, std::size_t n) { select_ops().relu_bwd(pre, delta, n); }
void square(const double* x, double* y, std::size_t n) { select_ops().square(x, y, n); }
void square_bwd(const double* pre, double* delta, std::size_t n) { select_ops().square_bwd(pre, delta, n); }
void clamp01(double* x, std::size_t n) { select_ops().clamp01(x, n); }
void pgd_step(double* x, const double* g, const double* x0,
              double step, double eps, std::size_t n) {
  select_ops().pgd_step(x, g, x0, step, eps, n);
}
void sgd_step(double* p, const double* g, double lr, std::size_t n) {
  select_ops().sgd_step(p, g, lr, n);
}
void adam_step(double* p, double* m, double* v, const double* g,
               double lr, double beta1, double beta2, double eps,
               double bias1, double bias2, std::size_t n) {
  select_ops().adam_step(p, m, v, g, lr, beta1, beta2, eps, bias1, bias2, n);
}

}  // namespace imclab::kernels

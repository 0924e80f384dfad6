#include "imclab/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "imclab/kernels.hpp"

namespace imclab {

double efficacy(const MicroNet& net, const Vec& x, int target) {
  if (target < 0 || target >= net.class_count()) {
    throw std::invalid_argument("target class out of range");
  }
  return forward(net, x)[static_cast<std::size_t>(target)];
}

double fidelity_loss(const Vec& x_star, const Vec& x0, Norm p) {
  if (x_star.size() != x0.size()) throw std::invalid_argument("dimension mismatch");
  switch (p) {
    case Norm::l1:
      return kernels::l1_diff(x_star.data(), x0.data(), x0.size());
    case Norm::l2:
      return std::sqrt(kernels::l2sq_diff(x_star.data(), x0.data(), x0.size()));
    case Norm::linf:
      return kernels::linf_diff(x_star.data(), x0.data(), x0.size());
  }
  return 0.0;
}

double specificity_loss(const MicroNet& theta_star, const MicroNet& theta0,
                        const LabeledSet& reference) {
  if (reference.size() == 0) throw std::invalid_argument("reference set is empty");
  std::size_t disagreements = 0;
  for (const Vec& x : reference.inputs) {
    if (predict(theta_star, x) != predict(theta0, x)) ++disagreements;
  }
  return static_cast<double>(disagreements) / static_cast<double>(reference.size());
}

TradeoffPoint normalize_tradeoff(double raw_fidelity, double raw_specificity, double kappa,
                                 double lambda, double nu, double pgd_baseline_fidelity,
                                 double poison_baseline_specificity) {
  if (pgd_baseline_fidelity <= 0.0 || poison_baseline_specificity <= 0.0) {
    throw std::invalid_argument("degenerate task: a normalization baseline is zero");
  }
  TradeoffPoint p;
  p.kappa = kappa;
  p.lambda = lambda;
  p.nu = nu;
  p.raw_fidelity = raw_fidelity;
  p.raw_specificity = raw_specificity;
  p.fidelity_norm = raw_fidelity / pgd_baseline_fidelity;
  p.specificity_norm = raw_specificity / poison_baseline_specificity;
  for (double* v : {&p.fidelity_norm, &p.specificity_norm}) {
    if (*v < 0.0 || *v > 1.0) {
      *v = std::min(std::max(*v, 0.0), 1.0);
      p.clamped = true;
    }
  }
  return p;
}

double empirical_leverage(const TradeoffPoint& point) {
  if (point.fidelity_norm <= 0.0) {
    throw std::invalid_argument("leverage is undefined at zero fidelity cost");
  }
  return (1.0 - point.specificity_norm) / point.fidelity_norm;
}

}  // namespace imclab

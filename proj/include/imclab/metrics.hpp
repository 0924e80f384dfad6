#pragma once

#include "imclab/micronet.hpp"

// Efficacy / fidelity / specificity measurements and the empirical leverage
// coefficient.

namespace imclab {

// Misclassification confidence f_t(x; theta).
double efficacy(const MicroNet& net, const Vec& x, int target);

enum class Norm { l1, l2, linf };

// ||x_star - x0||_p; the default norm across the harness is L-infinity.
double fidelity_loss(const Vec& x_star, const Vec& x0, Norm p = Norm::linf);

// Fraction of reference inputs on which the two models' predictions disagree.
double specificity_loss(const MicroNet& theta_star, const MicroNet& theta0,
                        const LabeledSet& reference);

struct TradeoffPoint {
  double kappa = 0.0;
  double fidelity_norm = 0.0;
  double specificity_norm = 0.0;
  double raw_fidelity = 0.0;
  double raw_specificity = 0.0;
  double lambda = 0.0;
  double nu = 0.0;
  bool clamped = false;  // a normalized value exceeded [0,1] and was clipped
};

// Divides raw losses by the single-vector baselines measured at the same
// kappa. Baselines must be positive.
TradeoffPoint normalize_tradeoff(double raw_fidelity, double raw_specificity, double kappa,
                                 double lambda, double nu, double pgd_baseline_fidelity,
                                 double poison_baseline_specificity);

// phi = (1 - specificity_norm) / fidelity_norm; undefined at fidelity_norm 0.
double empirical_leverage(const TradeoffPoint& point);

}  // namespace imclab

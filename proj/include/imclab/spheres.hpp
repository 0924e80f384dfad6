#pragma once

#include "imclab/micronet.hpp"

// Concentric-spheres study: the quadratic one-hidden-layer network reduces to
// f(x) = sum_i alpha_i z_i^2 - 1 with z a rotation of x, and a norm-preserving
// (rotation) adversarial search against it.

namespace imclab::spheres {

struct QuadraticNet {
  Matrix rotation;     // d x d, rows are the right singular vectors of W
  Vec alpha;           // alpha_i = -a s_i^2 / b
  double outer_radius = 2.0;  // R of the data distribution
};

// Derives (rotation, alpha) from the SVD of W for the network
// v^T sigma(W x) + b with sigma(x) = x^2 and v = a * ones. b must be nonzero.
QuadraticNet from_weights(const Matrix& w, double a, double b, double outer_radius);

// Direct evaluation of the network form v^T sigma(Wx) + b.
double network_form_value(const Matrix& w, double a, double b, const Vec& x);

// f(x) = sum_i alpha_i z_i^2 - 1.
double decision_value(const QuadraticNet& qnet, const Vec& x);

// f(x) > 0 -> class 1, otherwise class 0 (ties resolve to 0).
int predict(const QuadraticNet& qnet, const Vec& x);

// True iff every alpha_i lies strictly inside (1/R, 1).
bool is_perfect(const QuadraticNet& qnet);

// Projected gradient steps constrained to the sphere of radius ||x0||
// (gradient step, then renormalize), pushing f toward the opposite sign.
Vec rotation_attack(const QuadraticNet& qnet, const Vec& x0, int steps, double step_size);

bool attack_flips(const QuadraticNet& qnet, const Vec& x0, int steps, double step_size);

}  // namespace imclab::spheres

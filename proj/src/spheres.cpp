#include "imclab/spheres.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "imclab/kernels.hpp"

namespace imclab::spheres {

QuadraticNet from_weights(const Matrix& w, double a, double b, double outer_radius) {
  if (b == 0.0) throw std::invalid_argument("bias b must be nonzero");
  if (outer_radius <= 1.0) throw std::invalid_argument("outer radius must exceed 1");
  const auto hidden = static_cast<Eigen::Index>(w.rows);
  const auto d = static_cast<Eigen::Index>(w.cols);
  Eigen::MatrixXd ew(hidden, d);
  for (Eigen::Index i = 0; i < hidden; ++i)
    for (Eigen::Index j = 0; j < d; ++j) ew(i, j) = w.at(i, j);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ew, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();

  QuadraticNet qnet;
  qnet.outer_radius = outer_radius;
  qnet.alpha.assign(w.cols, 0.0);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    qnet.alpha[static_cast<std::size_t>(i)] = -a * s(i) * s(i) / b;
  }
  // rows of the rotation are V^T, so z = rotation * x.
  qnet.rotation = Matrix(w.cols, w.cols);
  const Eigen::MatrixXd vt = svd.matrixV().transpose();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      qnet.rotation.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = vt(i, j);
  return qnet;
}

double network_form_value(const Matrix& w, double a, double b, const Vec& x) {
  if (x.size() != w.cols) throw std::invalid_argument("dimension mismatch");
  double acc = b;
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double h = kernels::dot(w.row(i), x.data(), w.cols);
    acc += a * h * h;
  }
  return acc;
}

double decision_value(const QuadraticNet& qnet, const Vec& x) {
  if (x.size() != qnet.rotation.cols) throw std::invalid_argument("dimension mismatch");
  double acc = -1.0;
  for (std::size_t i = 0; i < qnet.rotation.rows; ++i) {
    const double z = kernels::dot(qnet.rotation.row(i), x.data(), x.size());
    acc += qnet.alpha[i] * z * z;
  }
  return acc;
}

int predict(const QuadraticNet& qnet, const Vec& x) {
  return decision_value(qnet, x) > 0.0 ? 1 : 0;
}

bool is_perfect(const QuadraticNet& qnet) {
  if (qnet.outer_radius <= 1.0) throw std::invalid_argument("outer radius must exceed 1");
  const double lo = 1.0 / qnet.outer_radius;
  for (double a : qnet.alpha) {
    if (!(a > lo && a < 1.0)) return false;
  }
  return true;
}

Vec rotation_attack(const QuadraticNet& qnet, const Vec& x0, int steps, double step_size) {
  const double radius = std::sqrt(kernels::dot(x0.data(), x0.data(), x0.size()));
  if (radius <= 0.0) throw std::invalid_argument("attack needs a nonzero starting point");
  const int source = predict(qnet, x0);
  const double direction = source == 1 ? -1.0 : 1.0;  // push f toward the opposite sign

  Vec x = x0;
  const std::size_t d = x.size();
  Vec z(qnet.rotation.rows), grad(d);
  for (int it = 0; it < steps; ++it) {
    for (std::size_t i = 0; i < qnet.rotation.rows; ++i) {
      z[i] = kernels::dot(qnet.rotation.row(i), x.data(), d);
    }
    // grad f = 2 * rotation^T (alpha .* z)
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < qnet.rotation.rows; ++i) {
      kernels::axpy(2.0 * qnet.alpha[i] * z[i], qnet.rotation.row(i), grad.data(), d);
    }
    kernels::axpy(direction * step_size, grad.data(), x.data(), d);
    const double norm = std::sqrt(kernels::dot(x.data(), x.data(), d));
    if (norm <= 0.0) {
      x = x0;  // degenerate step; restart from the benign point
      continue;
    }
    const double s = radius / norm;
    for (double& v : x) v *= s;
  }
  return x;
}

bool attack_flips(const QuadraticNet& qnet, const Vec& x0, int steps, double step_size) {
  const int before = predict(qnet, x0);
  const Vec x = rotation_attack(qnet, x0, steps, step_size);
  return predict(qnet, x) != before;
}

}  // namespace imclab::spheres

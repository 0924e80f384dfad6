#include <doctest.h>

#include <cmath>

#include "imclab/rng.hpp"
#include "imclab/spheres.hpp"
#include "imclab/synthdata.hpp"

using namespace imclab;
using namespace imclab::spheres;

namespace {

Matrix diag(const std::vector<double>& values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m.at(i, i) = values[i];
  return m;
}

Vec sphere_point(Rng& rng, std::size_t d, double radius) {
  Vec x(d);
  double n2 = 0.0;
  for (double& v : x) {
    v = rng.gaussian();
    n2 += v * v;
  }
  const double s = radius / std::sqrt(n2);
  for (double& v : x) v *= s;
  return x;
}

}  // namespace

TEST_CASE("from_weights: identity and diagonal weight matrices") {
  const QuadraticNet id = from_weights(diag({1.0, 1.0, 1.0}), 1.0, -1.0, 2.0);
  for (double a : id.alpha) CHECK(a == doctest::Approx(1.0).epsilon(1e-12));
  // f(x) = ||x||^2 - 1
  CHECK(decision_value(id, {0.5, 0.5, 0.5}) == doctest::Approx(0.75 - 1.0).epsilon(1e-12));

  const QuadraticNet d21 = from_weights(diag({2.0, 1.0}), 1.0, -1.0, 2.0);
  CHECK(d21.alpha[0] == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(d21.alpha[1] == doctest::Approx(1.0).epsilon(1e-10));

  CHECK_THROWS_AS(from_weights(diag({1.0}), 1.0, 0.0, 2.0), std::invalid_argument);
}

TEST_CASE("classifier form agrees with direct network evaluation") {
  Rng rng(1234);
  Matrix w(6, 5);
  for (double& v : w.a) v = rng.uniform(-1.0, 1.0);
  const double a = 0.8, b = -1.3;
  const QuadraticNet qnet = from_weights(w, a, b, 2.0);
  for (int k = 0; k < 100; ++k) {
    Vec x(5);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    const double network = network_form_value(w, a, b, x);
    const double classifier = decision_value(qnet, x);
    CHECK(classifier == doctest::Approx(network / (-b)).epsilon(1e-10));
  }
}

TEST_CASE("predict: sphere arithmetic and the tie convention") {
  QuadraticNet qnet;
  qnet.rotation = diag({1.0, 1.0});
  qnet.alpha = {0.8, 0.8};
  qnet.outer_radius = 1.3;
  CHECK(decision_value(qnet, {1.0, 0.0}) == doctest::Approx(-0.2));
  CHECK(predict(qnet, {1.0, 0.0}) == 0);
  // outer sphere: f = 0.8 * 1.69 - 1 = 0.352
  CHECK(decision_value(qnet, {1.3, 0.0}) == doctest::Approx(0.352));
  CHECK(predict(qnet, {1.3, 0.0}) == 1);
  // exact boundary resolves to class 0
  qnet.alpha = {1.0, 1.0};
  CHECK(decision_value(qnet, {1.0, 0.0}) == 0.0);
  CHECK(predict(qnet, {1.0, 0.0}) == 0);
}

TEST_CASE("is_perfect: strict open-interval membership") {
  QuadraticNet qnet;
  qnet.rotation = diag({1.0, 1.0, 1.0});
  qnet.outer_radius = 4.0;
  const double mid = 0.5 * (1.0 / 4.0 + 1.0);
  qnet.alpha = {mid, mid, mid};
  CHECK(is_perfect(qnet));
  qnet.alpha[1] = 1.0;  // endpoint excluded
  CHECK_FALSE(is_perfect(qnet));
  qnet.alpha[1] = 0.25;
  CHECK_FALSE(is_perfect(qnet));
}

TEST_CASE("perfect classifier makes no errors on sampled sphere points") {
  const double R = 1.6;
  QuadraticNet qnet;
  qnet.rotation = diag({1.0, 1.0, 1.0, 1.0});
  qnet.alpha = {0.7, 0.8, 0.9, 0.75};
  qnet.outer_radius = R;
  REQUIRE(is_perfect(qnet));
  Rng rng(55);
  for (int k = 0; k < 10000; ++k) {
    const int label = k % 2;
    const Vec x = sphere_point(rng, 4, label == 0 ? 1.0 : R);
    CHECK(predict(qnet, x) == label);
  }
}

TEST_CASE("rotation_attack: zero steps, norm preservation, perfect robustness") {
  const double R = 1.5;
  QuadraticNet perfect;
  perfect.rotation = diag({1.0, 1.0, 1.0});
  perfect.alpha = {0.75, 0.8, 0.85};
  perfect.outer_radius = R;
  REQUIRE(is_perfect(perfect));

  Rng rng(66);
  const Vec x0 = sphere_point(rng, 3, 1.0);
  CHECK(rotation_attack(perfect, x0, 0, 0.1) == x0);

  for (int k = 0; k < 100; ++k) {
    const Vec start = sphere_point(rng, 3, k % 2 == 0 ? 1.0 : R);
    const Vec moved = rotation_attack(perfect, start, 40, 0.1);
    const double n0 = std::sqrt(moved[0] * moved[0] + moved[1] * moved[1] +
                                moved[2] * moved[2]);
    const double target = k % 2 == 0 ? 1.0 : R;
    CHECK(std::abs(n0 - target) < 1e-10);
    CHECK_FALSE(attack_flips(perfect, start, 40, 0.1));
  }
}

TEST_CASE("imperfect classifier is flipped by rotating into the large-alpha axis") {
  QuadraticNet imperfect;
  imperfect.rotation = diag({1.0, 1.0});
  imperfect.alpha = {1.5, 0.5};
  imperfect.outer_radius = 1.5;
  REQUIRE_FALSE(is_perfect(imperfect));
  // generic inner-sphere point dominated by the small-alpha axis: class 0
  Vec x0{0.05, 1.0};
  const double n0 = std::sqrt(x0[0] * x0[0] + x0[1] * x0[1]);
  for (double& v : x0) v /= n0;
  REQUIRE(predict(imperfect, x0) == 0);
  CHECK(attack_flips(imperfect, x0, 200, 0.05));
}

#include <doctest.h>

#include <cmath>

#include "imclab/metrics.hpp"

using namespace imclab;

namespace {

MicroNet single_layer(std::size_t d, std::size_t c) {
  MicroNet net;
  net.input_dim = d;
  net.layers.push_back({Matrix(c, d), Vec(c, 0.0), Activation::identity});
  return net;
}

}  // namespace

TEST_CASE("efficacy: uniform net and saturated net") {
  const MicroNet uniform = single_layer(2, 4);
  for (int t = 0; t < 4; ++t) CHECK(efficacy(uniform, {0.3, 0.4}, t) == doctest::Approx(0.25));

  MicroNet confident = single_layer(1, 2);
  confident.layers[0].w.at(0, 0) = 2000.0;
  CHECK(efficacy(confident, {1.0}, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(efficacy(uniform, {0.3, 0.4}, 7), std::invalid_argument);
}

TEST_CASE("fidelity_loss: the three norms") {
  const Vec x0{0.2, 0.5, 0.9};
  CHECK(fidelity_loss(x0, x0) == 0.0);

  Vec bumped = x0;
  bumped[1] += 0.3;
  CHECK(fidelity_loss(bumped, x0, Norm::linf) == doctest::Approx(0.3));

  const Vec a{0.3, 0.4};
  const Vec b{0.0, 0.0};
  CHECK(fidelity_loss(a, b, Norm::l2) == doctest::Approx(0.5));
  CHECK(fidelity_loss(a, b, Norm::l1) == doctest::Approx(0.7));
}

TEST_CASE("fidelity_loss: norm axioms on scaled differences") {
  const Vec x0{0.1, 0.2, 0.3, 0.4};
  Vec xs = x0;
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] += 0.01 * static_cast<double>(i + 1);
  for (Norm p : {Norm::l1, Norm::l2, Norm::linf}) {
    const double base = fidelity_loss(xs, x0, p);
    CHECK(base >= 0.0);
    Vec doubled = x0;
    for (std::size_t i = 0; i < xs.size(); ++i) doubled[i] += 2.0 * (xs[i] - x0[i]);
    CHECK(fidelity_loss(doubled, x0, p) == doctest::Approx(2.0 * base).epsilon(1e-12));
  }
}

TEST_CASE("specificity_loss: identical models, half-space flip, order invariance") {
  // predictions keyed on the sign of x1 (class 0 iff positive)
  MicroNet a = single_layer(2, 2);
  a.layers[0].w.at(0, 0) = 1.0;
  // flipped on points with large x2: logit0 = x1 - 10*x2
  MicroNet b = a;
  b.layers[0].w.at(0, 1) = -10.0;

  LabeledSet ref;
  ref.dim = 2;
  ref.class_count = 2;
  ref.inputs = {{1.0, 0.0}, {-1.0, 0.0}, {1.0, 1.0}, {-1.0, -1.0}};
  ref.labels = {0, 1, 0, 1};

  CHECK(specificity_loss(a, a, ref) == 0.0);
  CHECK(specificity_loss(b, a, ref) == doctest::Approx(0.5));

  LabeledSet reversed = ref;
  std::reverse(reversed.inputs.begin(), reversed.inputs.end());
  CHECK(specificity_loss(b, a, reversed) == doctest::Approx(0.5));

  CHECK_THROWS_AS(specificity_loss(a, a, LabeledSet{}), std::invalid_argument);
}

TEST_CASE("normalize_tradeoff: anchors and interior points") {
  const TradeoffPoint at_pgd = normalize_tradeoff(0.08, 0.0, 0.9, 1.0, 1.0, 0.08, 0.02);
  CHECK(at_pgd.fidelity_norm == doctest::Approx(1.0));
  CHECK(at_pgd.specificity_norm == doctest::Approx(0.0));

  const TradeoffPoint at_poison = normalize_tradeoff(0.0, 0.02, 0.9, 1.0, 1.0, 0.08, 0.02);
  CHECK(at_poison.fidelity_norm == doctest::Approx(0.0));
  CHECK(at_poison.specificity_norm == doctest::Approx(1.0));

  const TradeoffPoint mid = normalize_tradeoff(0.02, 0.01, 0.9, 1.0, 1.0, 0.08, 0.02);
  CHECK(mid.fidelity_norm == doctest::Approx(0.25));
  CHECK(mid.specificity_norm == doctest::Approx(0.5));
  CHECK_FALSE(mid.clamped);

  const TradeoffPoint over = normalize_tradeoff(0.1, 0.0, 0.9, 1.0, 1.0, 0.08, 0.02);
  CHECK(over.fidelity_norm == 1.0);
  CHECK(over.clamped);

  CHECK_THROWS_AS(normalize_tradeoff(0.1, 0.1, 0.9, 1.0, 1.0, 0.0, 0.02),
                  std::invalid_argument);
}

TEST_CASE("empirical_leverage: arithmetic and errors") {
  TradeoffPoint p;
  p.fidelity_norm = 0.5;
  p.specificity_norm = 0.5;
  CHECK(empirical_leverage(p) == doctest::Approx(1.0));

  p.fidelity_norm = 0.05;
  p.specificity_norm = 0.52;
  CHECK(empirical_leverage(p) == doctest::Approx(9.6));

  p.fidelity_norm = 0.0;
  CHECK_THROWS_AS(empirical_leverage(p), std::invalid_argument);
}

TEST_CASE("leverage is invariant to rescaling both baselines") {
  const TradeoffPoint a = normalize_tradeoff(0.03, 0.004, 0.75, 2.0, 1.0, 0.06, 0.016);
  const TradeoffPoint b = normalize_tradeoff(0.03, 0.004, 0.75, 2.0, 1.0, 0.06, 0.016);
  // doubling raw losses and baselines together changes nothing
  const TradeoffPoint c = normalize_tradeoff(0.06, 0.008, 0.75, 2.0, 1.0, 0.12, 0.032);
  CHECK(empirical_leverage(a) == doctest::Approx(empirical_leverage(b)));
  CHECK(a.fidelity_norm == doctest::Approx(c.fidelity_norm).epsilon(1e-12));
  CHECK(a.specificity_norm == doctest::Approx(c.specificity_norm).epsilon(1e-12));
  CHECK(empirical_leverage(a) == doctest::Approx(empirical_leverage(c)).epsilon(1e-12));
}

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "imclab/analytics.hpp"

using namespace imclab::analytics;

TEST_CASE("sin_power_integral: antiderivative checks") {
  CHECK(sin_power_integral(3, 0.0) == 0.0);
  CHECK(sin_power_integral(1, M_PI / 2.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sin_power_integral(2, M_PI / 2.0) == doctest::Approx(M_PI / 4.0).epsilon(1e-10));
  // d = 1 over the full half period: integral of sin = 2
  CHECK(sin_power_integral(1, M_PI) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK_THROWS_AS(sin_power_integral(0, 1.0), std::invalid_argument);
}

TEST_CASE("flat_form_integral: boundary values") {
  CHECK(flat_form_integral(4, 1.0) == 0.0);
  CHECK(flat_form_integral(1, 0.0) == doctest::Approx(1.0).epsilon(1e-10));
  // d = 3: integral of (1-t^2) over [0,1] = 2/3
  CHECK(flat_form_integral(3, 0.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("the two quadrature forms agree across the verification grid") {
  for (int d : {1, 2, 5, 10, 50}) {
    for (int i = 0; i <= 20; ++i) {
      const double x = -1.0 + 0.1 * i;
      const double lhs = sin_power_integral(d, std::acos(x));
      const double rhs = flat_form_integral(d, x);
      CHECK(std::abs(lhs - rhs) < 1e-9);
    }
  }
}

TEST_CASE("log-space evaluation handles large dimensions") {
  const double lhs = sin_power_integral(150, std::acos(0.2));
  const double rhs = flat_form_integral(150, 0.2);
  CHECK(lhs > 0.0);
  CHECK(std::abs(lhs - rhs) < 1e-9);
  CHECK(std::isfinite(flat_form_integral(200, -1.0)));
}

TEST_CASE("gamma_fn known values") {
  CHECK(gamma_fn(1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gamma_fn(5.0) == doctest::Approx(24.0).epsilon(1e-12));
  CHECK(gamma_fn(0.5) == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-12));
  CHECK_THROWS_AS(gamma_fn(0.0), std::invalid_argument);
  CHECK_THROWS_AS(gamma_fn(-2.0), std::invalid_argument);
}

TEST_CASE("cap_specificity: flat boundary and the half-disk") {
  LeverageQuery q;
  q.d = 3;
  q.h_over_r = 0.0;
  CHECK(cap_specificity(q) == 0.0);

  // d=2, r=1, h=1: half disk of area pi/2
  q.d = 2;
  q.h_over_r = 1.0;
  q.r = 1.0;
  q.p_data = 1.0;
  CHECK(cap_specificity(q) == doctest::Approx(M_PI / 2.0).epsilon(1e-9));

  q.h_over_r = 2.5;
  CHECK_THROWS_AS(cap_specificity(q), std::invalid_argument);
}

TEST_CASE("cap_specificity scales exactly as r^d") {
  for (int d : {2, 5, 11}) {
    LeverageQuery q1;
    q1.d = d;
    q1.h_over_r = 0.6;
    q1.r = 1.0;
    LeverageQuery q2 = q1;
    q2.r = 2.0;
    const double ratio = cap_specificity(q2) / cap_specificity(q1);
    CHECK(ratio == std::exp2(static_cast<double>(d)));
  }
}

TEST_CASE("cap_specificity matches the Monte-Carlo cap oracle") {
  // quick version; the acceptance suite runs 10^6 samples at 2%
  for (int d : {2, 3}) {
    for (double a : {0.3, 1.0}) {
      LeverageQuery q;
      q.d = d;
      q.h_over_r = a;
      q.r = 1.0;
      const double exact = cap_specificity(q);
      const double mc = mc_cap_volume(d, a, 1.0, 200000, 99);
      CHECK(std::abs(mc - exact) / exact < 0.05);
    }
  }
}

TEST_CASE("relative_specificity: endpoints and monotonicity") {
  CHECK(relative_specificity(5, 0.4, 0.0) == 1.0);
  CHECK(relative_specificity(5, 0.4, 1.0) == 0.0);
  for (int d : {2, 10, 50}) {
    for (double a : {0.1, 0.5, 1.0}) {
      double prev = 1.0 + 1e-12;
      for (int k = 0; k < 20; ++k) {
        const double z = (k + 0.5) / 20.0;
        const double v = relative_specificity(d, a, z);
        CHECK(v < prev);
        prev = v;
      }
    }
  }
}

TEST_CASE("leverage_phi: boundary value, positivity, and the z->0 limit") {
  CHECK(leverage_phi(7, 0.5, 1.0) == 1.0);
  CHECK_THROWS_AS(leverage_phi(7, 0.5, 0.0), std::invalid_argument);

  for (int d : {2, 10, 50}) {
    for (double a : {0.1, 0.5, 1.0}) {
      for (int k = 1; k <= 19; ++k) {
        CHECK(leverage_phi(d, a, 0.05 * k) > 1.0);
      }
      // the gap to the limit closes linearly in z; d=50 needs a smaller probe
      const double z_probe = d >= 50 ? 1e-5 : 1e-4;
      const double limit = leverage_phi_zero_limit(d, a);
      const double near = leverage_phi(d, a, z_probe);
      CHECK(std::abs(near - limit) / limit < 1e-3);
    }
  }
}

TEST_CASE("phi equals (1 - relative_specificity) / z") {
  for (double z : {0.1, 0.35, 0.8}) {
    const double lhs = leverage_phi(12, 0.7, z);
    const double rhs = (1.0 - relative_specificity(12, 0.7, z)) / z;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("verify_prop2 passes on the default grid") {
  Prop2Grid grid;
  grid.dims = {2};
  grid.g_points = 50;
  const Prop2Report rep = verify_prop2(grid);
  CHECK(rep.pass);
  CHECK(rep.min_phi > 1.0);
  CHECK(rep.max_abs_g_at_one < 1e-9);
  CHECK(rep.min_g > 0.0);
  CHECK(rep.max_g_prime < 0.0);
}

TEST_CASE("phi at small z is large for d=50, h/r=1") {
  // frozen after first computation; see the quadrature tolerances above
  const double phi = leverage_phi(50, 1.0, 0.1);
  CHECK(phi > 2.0);
  CHECK(phi == doctest::Approx(5.2380777).epsilon(1e-6));
}

#pragma once

#include <vector>

// Closed-form hyperspherical-cap analysis: cap-volume specificity, the
// leverage coefficient phi, and numeric verification of its properties.

namespace imclab::analytics {

// Integral of sin^d(t) over [0, upper], adaptive Simpson to 1e-10 absolute.
// For d > 100 the integrand is evaluated in log space.
double sin_power_integral(int d, double upper);

// Equivalent algebraic form: integral of (1-t^2)^((d-1)/2) over [x, 1].
double flat_form_integral(int d, double x_lower);

// Gamma function on the positive axis.
double gamma_fn(double x);

struct LeverageQuery {
  int d = 2;               // input dimensionality
  double h_over_r = 0.5;   // cap height over sphere radius, in [0, 2]
  double z = 0.5;          // relative fidelity loss kappa'/kappa, in [0, 1]
  double p_data = 1.0;     // local data density
  double r = 1.0;          // sphere radius

  double h() const { return h_over_r * r; }
  void validate() const;
};

// Volume of the d-dimensional spherical cap of height h on a radius-r sphere,
// scaled by p_data:
//   p_data * pi^((d-1)/2) r^d / Gamma((d+1)/2) * integral_0^arccos(1-h/r) sin^d
double cap_specificity(const LeverageQuery& q);

// Ratio of the cap volumes at heights (1-z)h and h; independent of r, p_data.
double relative_specificity(int d, double h_over_r, double z);

// Leverage coefficient: specificity saving over fidelity cost,
//   phi = (1 - relative_specificity) / z, computed from the quadratures.
// Undefined at z = 0; see leverage_phi_zero_limit for the limit.
double leverage_phi(int d, double h_over_r, double z);

// Analytic z->0+ limit: alpha (1-(1-alpha)^2)^((d-1)/2) / flat_form_integral(d, 1-alpha).
double leverage_phi_zero_limit(int d, double h_over_r);

struct Prop2Grid {
  std::vector<int> dims = {2, 10, 50};
  std::vector<double> h_over_r = {0.1, 0.5, 1.0};
  std::vector<double> z;  // defaults to 0.05..0.95 step 0.05 when empty
  int g_points = 50;      // interior grid size for the g-function checks
};

struct Prop2Report {
  bool pass = false;
  double min_phi = 0.0;
  int min_phi_d = 0;
  double min_phi_h_over_r = 0.0;
  double min_phi_z = 0.0;
  double max_abs_g_at_one = 0.0;  // want ~0
  double min_g = 0.0;             // over interior grid; want > 0
  double max_g_prime = 0.0;       // numeric derivative; want < 0
  double max_phi_one_error = 0.0; // |phi(1) - 1|
};

// Checks phi > 1 on the grid, phi(1) = 1, and the g-function argument:
// g(x) = (1+x)^((d-1)/2) (1-x)^((d+1)/2) - flat_form_integral(d, x) with
// g(1) = 0, g > 0 and g' < 0 on (0, 1).
Prop2Report verify_prop2(const Prop2Grid& grid);

double g_function(int d, double x);

// Monte-Carlo estimate of the cap volume (uniform sampling inside the ball);
// the independent oracle for cap_specificity.
double mc_cap_volume(int d, double h_over_r, double r, std::size_t samples,
                     unsigned long long seed);

}  // namespace imclab::analytics

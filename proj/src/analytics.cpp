#include "imclab/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "imclab/rng.hpp"

namespace imclab::analytics {

namespace {

constexpr double kQuadTol = 1e-10;

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adapt(const F& f, double a, double fa, double b, double fb, double m, double fm,
             double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson with interval halving to an absolute tolerance. Integrals
// far below the absolute tolerance (large d concentrates all mass near one
// endpoint) are refined again at a relative tolerance so that ratios of small
// cap volumes stay meaningful.
template <typename F>
double integrate(const F& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = simpson(a, fa, b, fb, fm);
  double result = adapt(f, a, fa, b, fb, m, fm, whole, tol, 45);
  if (result != 0.0 && std::abs(result) < 1e-4) {
    const double rel_tol = std::abs(result) * 1e-12;
    if (rel_tol < tol) {
      result = adapt(f, a, fa, b, fb, m, fm, whole, rel_tol, 45);
    }
  }
  return result;
}

double sin_pow(int d, double t) {
  const double s = std::sin(t);
  if (s <= 0.0) return 0.0;
  if (d > 100) return std::exp(static_cast<double>(d) * std::log(s));
  return std::pow(s, d);
}

double flat_form(int d, double t) {
  const double q = 1.0 - t * t;
  if (q <= 0.0) return 0.0;
  const double e = 0.5 * static_cast<double>(d - 1);
  if (d > 100) return std::exp(e * std::log1p(-t * t));
  return std::pow(q, e);
}

double clamp_to_unit(double x) { return std::min(1.0, std::max(-1.0, x)); }

}  // namespace

double sin_power_integral(int d, double upper) {
  if (d < 1) throw std::invalid_argument("sin_power_integral needs d >= 1");
  if (upper < 0.0 || upper > M_PI + 1e-12) {
    throw std::invalid_argument("upper limit must lie in [0, pi]");
  }
  return integrate([d](double t) { return sin_pow(d, t); }, 0.0, upper, kQuadTol);
}

double flat_form_integral(int d, double x_lower) {
  if (d < 1) throw std::invalid_argument("flat_form_integral needs d >= 1");
  if (x_lower < -1.0 || x_lower > 1.0) {
    throw std::invalid_argument("lower limit must lie in [-1, 1]");
  }
  return integrate([d](double t) { return flat_form(d, t); }, x_lower, 1.0, kQuadTol);
}

double gamma_fn(double x) {
  if (x <= 0.0) throw std::invalid_argument("gamma_fn is defined for x > 0 only");
  return std::tgamma(x);
}

void LeverageQuery::validate() const {
  if (d < 2) throw std::invalid_argument("dimension must be >= 2");
  if (h_over_r < 0.0 || h_over_r > 2.0) {
    throw std::invalid_argument("h/r must lie in [0, 2]: the cap height cannot exceed the diameter");
  }
  if (z < 0.0 || z > 1.0) throw std::invalid_argument("z must lie in [0, 1]");
  if (p_data <= 0.0) throw std::invalid_argument("p_data must be positive");
  if (r <= 0.0) throw std::invalid_argument("r must be positive");
}

double cap_specificity(const LeverageQuery& q) {
  q.validate();
  if (q.h_over_r == 0.0) return 0.0;
  const double upper = std::acos(clamp_to_unit(1.0 - q.h_over_r));
  const double integral = sin_power_integral(q.d, upper);
  // pi^((d-1)/2) / Gamma((d+1)/2) in log space; r^d kept as a separate factor
  // so that scaling r by 2 scales the result by exactly 2^d.
  const double log_pref = 0.5 * static_cast<double>(q.d - 1) * std::log(M_PI) -
                          std::lgamma(0.5 * static_cast<double>(q.d + 1));
  return q.p_data * std::exp(log_pref) * integral * std::pow(q.r, q.d);
}

double relative_specificity(int d, double h_over_r, double z) {
  if (z < 0.0 || z > 1.0) throw std::invalid_argument("z must lie in [0, 1]");
  if (h_over_r <= 0.0 || h_over_r > 2.0) throw std::invalid_argument("h/r must lie in (0, 2]");
  const double full = sin_power_integral(d, std::acos(clamp_to_unit(1.0 - h_over_r)));
  const double part =
      sin_power_integral(d, std::acos(clamp_to_unit(1.0 - h_over_r + z * h_over_r)));
  return part / full;
}

double leverage_phi(int d, double h_over_r, double z) {
  if (z <= 0.0 || z > 1.0) {
    throw std::invalid_argument("phi is undefined at z = 0; it requires z in (0, 1]");
  }
  const double full = sin_power_integral(d, std::acos(clamp_to_unit(1.0 - h_over_r)));
  const double part =
      sin_power_integral(d, std::acos(clamp_to_unit(1.0 - h_over_r + z * h_over_r)));
  return (full - part) / (z * full);
}

double leverage_phi_zero_limit(int d, double h_over_r) {
  const double x = 1.0 - h_over_r;
  const double density = flat_form(d, x);
  return h_over_r * density / flat_form_integral(d, x);
}

double g_function(int d, double x) {
  const double e1 = 0.5 * static_cast<double>(d - 1);
  const double e2 = 0.5 * static_cast<double>(d + 1);
  return std::pow(1.0 + x, e1) * std::pow(1.0 - x, e2) - flat_form_integral(d, x);
}

Prop2Report verify_prop2(const Prop2Grid& grid) {
  std::vector<double> zs = grid.z;
  if (zs.empty()) {
    for (int i = 1; i <= 19; ++i) zs.push_back(0.05 * i);
  }
  Prop2Report rep;
  rep.min_phi = std::numeric_limits<double>::infinity();
  rep.min_g = std::numeric_limits<double>::infinity();
  rep.max_g_prime = -std::numeric_limits<double>::infinity();

  for (int d : grid.dims) {
    for (double alpha : grid.h_over_r) {
      for (double z : zs) {
        const double phi = leverage_phi(d, alpha, z);
        if (phi < rep.min_phi) {
          rep.min_phi = phi;
          rep.min_phi_d = d;
          rep.min_phi_h_over_r = alpha;
          rep.min_phi_z = z;
        }
      }
      rep.max_phi_one_error =
          std::max(rep.max_phi_one_error, std::abs(leverage_phi(d, alpha, 1.0) - 1.0));
    }
    rep.max_abs_g_at_one = std::max(rep.max_abs_g_at_one, std::abs(g_function(d, 1.0)));
    const int n = std::max(grid.g_points, 3);
    for (int i = 1; i <= n; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(n + 1);
      rep.min_g = std::min(rep.min_g, g_function(d, x));
      const double hstep = 1e-5;
      const double gp = (g_function(d, x + hstep) - g_function(d, x - hstep)) / (2.0 * hstep);
      rep.max_g_prime = std::max(rep.max_g_prime, gp);
    }
  }
  rep.pass = rep.min_phi > 1.0 && rep.max_phi_one_error < 1e-9 &&
             rep.max_abs_g_at_one < 1e-9 && rep.min_g > 0.0 && rep.max_g_prime < 0.0;
  return rep;
}

double mc_cap_volume(int d, double h_over_r, double r, std::size_t samples,
                     unsigned long long seed) {
  if (d < 2 || samples == 0) throw std::invalid_argument("bad Monte-Carlo parameters");
  // Uniform inside the ball: Gaussian direction, radius ~ r * U^(1/d).
  // The cap {x : x_1 >= r - h} hit fraction times the ball volume.
  Rng rng(seed);
  const double cut = r * (1.0 - h_over_r);
  std::size_t hits = 0;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t s = 0; s < samples; ++s) {
    double norm_sq = 0.0;
    for (auto& v : x) {
      v = rng.gaussian();
      norm_sq += v * v;
    }
    const double rad = r * std::pow(rng.uniform01(), 1.0 / static_cast<double>(d));
    const double x1 = x[0] / std::sqrt(norm_sq) * rad;
    if (x1 >= cut) ++hits;
  }
  const double log_ball = 0.5 * static_cast<double>(d) * std::log(M_PI) -
                          std::lgamma(0.5 * static_cast<double>(d) + 1.0) +
                          static_cast<double>(d) * std::log(r);
  return std::exp(log_ball) * static_cast<double>(hits) / static_cast<double>(samples);
}

}  // namespace imclab::analytics

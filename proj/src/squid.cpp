#include "csq/squid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "csq/error.hpp"

namespace csq {
namespace {

// Both sides of the mode condition, kept separate so residuals can be
// reported in the equation's own terms.
double lhs_term(const SquidResonatorGeometry& g, double k) {
  double v2 = 1.0 / (g.l0 * g.c0);
  return g.c0 * v2 * k * std::tan(k * g.d);
}

double rhs_term(const SquidResonatorGeometry& g, double flux, double k) {
  double v2 = 1.0 / (g.l0 * g.c0);
  return 2.0 * g.ej * std::cos(flux) - 2.0 * g.cj * v2 * k * k;
}

// The condition multiplied through by cos(kd): regular across the tan
// poles, so pole-to-pole brackets always close with opposite signs.
double g_value(const SquidResonatorGeometry& g, double flux, double k) {
  double v2 = 1.0 / (g.l0 * g.c0);
  return g.c0 * v2 * k * std::sin(k * g.d) - rhs_term(g, flux, k) * std::cos(k * g.d);
}

double g_derivative(const SquidResonatorGeometry& g, double flux, double k) {
  double v2 = 1.0 / (g.l0 * g.c0);
  double kd = k * g.d;
  double rp = -4.0 * g.cj * v2 * k;
  return g.c0 * v2 * (std::sin(kd) + kd * std::cos(kd)) - rp * std::cos(kd) +
         rhs_term(g, flux, k) * g.d * std::sin(kd);
}

void check_stable_branch(double flux) {
  if (!std::isfinite(flux) || std::cos(flux) <= 0.0)
    throw Error(ErrorCode::InconsistentParameters,
                "flux point leaves the stable branch (cos(flux) <= 0)");
}

// One root in the open interval between consecutive tan poles, bisection to
// a relative width then a short Newton polish kept inside the bracket.
double branch_root(const SquidResonatorGeometry& g, double flux, int n) {
  double lo = (n == 0) ? 0.0 : (n - 0.5) * M_PI / g.d;
  double hi = (n + 0.5) * M_PI / g.d;
  double flo = g_value(g, flux, lo);
  double fhi = g_value(g, flux, hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "no sign change in branch %d: g(%.6g) = %.6g, g(%.6g) = %.6g", n,
                  lo, flo, hi, fhi);
    throw Error(ErrorCode::SpectrumAnomaly, buf);
  }
  double a = lo, b = hi, fa = flo;
  for (int it = 0; it < 200 && (b - a) > 1e-15 * b; ++it) {
    double m = 0.5 * (a + b);
    double fm = g_value(g, flux, m);
    if (fm == 0.0) return m;
    if ((fm > 0.0) == (fa > 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  double k = 0.5 * (a + b);
  for (int it = 0; it < 3; ++it) {
    double dg = g_derivative(g, flux, k);
    if (dg == 0.0) break;
    double step = g_value(g, flux, k) / dg;
    double next = k - step;
    if (next <= a || next >= b) break;
    k = next;
    if (std::abs(step) < 1e-15 * k) break;
  }
  return k;
}

// Relative residual of the original (tan form) equation. The Josephson term
// joins the scale so the ratio stays meaningful where both sides cross zero
// together (roots pinned at tan(kd) = 0).
double root_residual(const SquidResonatorGeometry& g, double flux, double k) {
  double l = lhs_term(g, k);
  double r = rhs_term(g, flux, k);
  return std::abs(l - r) / (std::abs(l) + std::abs(r) + 2.0 * g.ej * std::cos(flux));
}

double dk_dflux(const SquidResonatorGeometry& g, double flux, double k) {
  double dg = g_derivative(g, flux, k);
  if (std::abs(dg) < 1e-12)
    throw Error(ErrorCode::SingularDerivative,
                "mode condition has a near-degenerate root: |dG/dk| < 1e-12");
  return -2.0 * g.ej * std::sin(flux) * std::cos(k * g.d) / dg;
}

// Weighted norm squared of cos(k x): closed form of the cos^2 integral plus
// the junction endpoint term.
double norm_squared(const SquidResonatorGeometry& g, double k) {
  double kd = k * g.d;
  double body = g.c0 * (0.5 * g.d + std::sin(2.0 * kd) / (4.0 * k));
  double cend = std::cos(kd);
  return body + 2.0 * g.cj * cend * cend;
}

double norm_squared_dk(const SquidResonatorGeometry& g, double k) {
  double kd = k * g.d;
  double body = g.c0 * (g.d * std::cos(2.0 * kd) / (2.0 * k) -
                        std::sin(2.0 * kd) / (4.0 * k * k));
  return body - 2.0 * g.cj * g.d * std::sin(2.0 * kd);
}

template <typename F>
double adaptive_step(const F& f, double a, double m, double b, double fa, double fm,
                     double fb, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0)
    throw Error(ErrorCode::NumericFailure, "adaptive quadrature did not converge");
  return adaptive_step(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_step(f, a, m, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

std::vector<double> mode_wavenumbers(const SquidResonatorGeometry& g, double flux,
                                     int count) {
  g.validate();
  check_stable_branch(flux);
  if (count < 1)
    throw Error(ErrorCode::InconsistentParameters, "mode count must be at least 1");
  std::vector<double> ks;
  ks.reserve(count);
  for (int n = 0; n < count; ++n) ks.push_back(branch_root(g, flux, n));
  return ks;
}

double mode_flux_derivative(const SquidResonatorGeometry& g, int mode_index,
                            double flux) {
  if (mode_index < 0)
    throw Error(ErrorCode::InconsistentParameters, "mode index must be nonnegative");
  double k = mode_wavenumbers(g, flux, mode_index + 1).back();
  return g.wave_velocity() * dk_dflux(g, flux, k);
}

MatrixXd coupling_matrix(const SquidResonatorGeometry& g, double flux, int n_modes) {
  if (n_modes < 2)
    throw Error(ErrorCode::InvalidDimension, "coupling matrix needs at least 2 modes");
  std::vector<double> ks = mode_wavenumbers(g, flux, n_modes);
  std::vector<double> norm(n_modes), dnorm(n_modes), kdot(n_modes);
  for (int i = 0; i < n_modes; ++i) {
    double n2 = norm_squared(g, ks[i]);
    norm[i] = 1.0 / std::sqrt(n2);
    kdot[i] = dk_dflux(g, flux, ks[i]);
    // d/dk of N = n2^{-1/2}
    dnorm[i] = -0.5 * norm[i] / n2 * norm_squared_dk(g, ks[i]);
  }

  MatrixXd m(n_modes, n_modes);
  for (int i = 0; i < n_modes; ++i) {
    for (int j = 0; j < n_modes; ++j) {
      double ki = ks[i], kj = ks[j];
      double nj_dot = dnorm[j] * kdot[j];
      auto integrand = [&](double x) {
        double mode_i = norm[i] * std::cos(ki * x);
        double dmode_j =
            nj_dot * std::cos(kj * x) - norm[j] * kdot[j] * x * std::sin(kj * x);
        return g.c0 * mode_i * dmode_j;
      };
      double scale = std::abs(norm[i]) *
                     (std::abs(nj_dot) + std::abs(norm[j] * kdot[j]) * g.d) * g.c0 * g.d;
      double body = adaptive_simpson(integrand, 0.0, g.d, 1e-13 * std::max(scale, 1e-30));
      double end = 2.0 * g.cj * (norm[i] * std::cos(ki * g.d)) *
                   (nj_dot * std::cos(kj * g.d) -
                    norm[j] * kdot[j] * g.d * std::sin(kj * g.d));
      m(i, j) = body + end;
    }
  }
  return m;
}

ModeSpectrum mode_spectrum(const SquidResonatorGeometry& g, double flux, int count) {
  ModeSpectrum spec;
  spec.wavenumbers = mode_wavenumbers(g, flux, count);
  double v = g.wave_velocity();
  for (double k : spec.wavenumbers) {
    spec.frequencies.push_back(v * k);
    spec.flux_derivatives.push_back(v * dk_dflux(g, flux, k));
    spec.residuals.push_back(root_residual(g, flux, k));
  }
  if (count >= 2)
    spec.coupling = coupling_matrix(g, flux, count);
  else
    spec.coupling = MatrixXd::Zero(count, count);
  return spec;
}

ExtractedParams extract_model_params(const SquidResonatorGeometry& g, double flux,
                                     const DriveSpec& drive, int mode_index) {
  if (!(drive.epsilon >= 0.0) || !std::isfinite(drive.epsilon) ||
      !std::isfinite(drive.omega_d) || !std::isfinite(drive.theta))
    throw Error(ErrorCode::InconsistentParameters, "drive spec must be finite, epsilon >= 0");
  if (drive.epsilon > 0.0 && drive.omega_d <= 0.0)
    throw Error(ErrorCode::InconsistentParameters,
                "a nonzero drive needs a positive drive frequency");
  double omega_prime = mode_flux_derivative(g, mode_index, flux);
  double k = mode_wavenumbers(g, flux, mode_index + 1).back();

  ExtractedParams out;
  out.omega = g.wave_velocity() * k;
  out.g_d = omega_prime * kFluxQuantum / 2.0;
  out.sigma = participation_sigma(g, flux);
  out.k_squid_ratio = squid_kerr_ratio(g, flux);
  if (out.sigma > 0.1)
    throw Error(ErrorCode::RegimeViolation,
                "boundary participation sigma > 0.1: linear expansion of the "
                "junction is not trustworthy");
  return out;
}

}  // namespace csq

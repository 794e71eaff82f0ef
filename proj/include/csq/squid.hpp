#pragma once

#include <cmath>
#include <vector>

#include "csq/hilbert.hpp"

namespace csq {

// Flux-tunable boundary circuit of the resonator. Units: hbar = 1, 2e = 1
// (so the flux quantum is 2*pi and the resistance quantum is 1/(2e^2) = 2);
// the per-length inductance/capacitance and the junction capacitance carry
// the (1/2e)^2 prefactor of the phase-field Lagrangian absorbed into them.
// flux_bias is the junction phase argument itself (the "2e*phi_bar" symbol).
struct SquidResonatorGeometry {
  double l0 = 0.0;        // inductance per unit length
  double c0 = 0.0;        // capacitance per unit length
  double d = 0.0;         // resonator length
  double cj = 0.0;        // single-junction capacitance
  double ej = 0.0;        // single-junction Josephson energy (rad/ns)
  double flux_bias = 0.0; // junction phase argument at the working point

  void validate() const {
    if (l0 <= 0.0 || c0 <= 0.0 || d <= 0.0 || cj <= 0.0 || ej <= 0.0)
      throw Error(ErrorCode::InconsistentParameters,
                  "geometry parameters must all be positive");
    if (std::cos(flux_bias) <= 0.0)
      throw Error(ErrorCode::InconsistentParameters,
                  "flux bias leaves the stable branch (cos(flux) <= 0)");
  }

  double wave_velocity() const { return 1.0 / std::sqrt(l0 * c0); }
};

constexpr double kResistanceQuantum = 2.0;  // 1/(2e^2) with 2e = 1
constexpr double kFluxQuantum = 2.0 * M_PI; // 2*pi/(2e) with 2e = 1

// Ratio of the resonator's lumped inductive energy to the effective
// Josephson energy; the linear-boundary expansion assumes this is small.
inline double participation_sigma(const SquidResonatorGeometry& g, double flux) {
  return 1.0 / (g.l0 * g.d * 2.0 * g.ej * std::cos(flux));
}

inline double characteristic_impedance(const SquidResonatorGeometry& g) {
  return std::sqrt(g.l0 / g.c0);
}

// Self-Kerr of the boundary nonlinearity relative to the mode frequency,
// sigma^3 * pi * Z0 / (2 Rq).
inline double squid_kerr_ratio(const SquidResonatorGeometry& g, double flux) {
  double s = participation_sigma(g, flux);
  return s * s * s * M_PI * characteristic_impedance(g) / (2.0 * kResistanceQuantum);
}

// First `count` positive roots k_n of
//   c0 v^2 k tan(k d) = 2 ej cos(flux) - 2 cj v^2 k^2,
// one per branch interval ((n-1/2)pi/d, (n+1/2)pi/d).
std::vector<double> mode_wavenumbers(const SquidResonatorGeometry& g, double flux, int count);

// d omega_n / d flux at the given flux, via the implicit-function theorem on
// the transcendental equation.
double mode_flux_derivative(const SquidResonatorGeometry& g, int mode_index, double flux);

// M_ik = <psi_i, d psi_k / d flux> under the capacitive inner product with
// the endpoint delta term handled analytically. Antisymmetric.
MatrixXd coupling_matrix(const SquidResonatorGeometry& g, double flux, int n_modes);

struct ModeSpectrum {
  std::vector<double> wavenumbers;
  std::vector<double> frequencies;       // v * k_n
  std::vector<double> flux_derivatives;  // d omega_n / d flux
  std::vector<double> residuals;         // relative transcendental residuals
  MatrixXd coupling;                     // M_ik
};

ModeSpectrum mode_spectrum(const SquidResonatorGeometry& g, double flux, int count);

struct DriveSpec {
  double epsilon = 0.0;
  double omega_d = 0.0;
  double theta = 0.0;
};

// Parameters the circuit hands to the dispersive model: mode frequency, the
// drive coupling g_d = omega'_n * Phi0 / 2, and the Kerr ratio diagnostics.
struct ExtractedParams {
  double omega = 0.0;
  double g_d = 0.0;
  double sigma = 0.0;
  double k_squid_ratio = 0.0;
};

ExtractedParams extract_model_params(const SquidResonatorGeometry& g, double flux,
                                     const DriveSpec& drive, int mode_index);

}  // namespace csq

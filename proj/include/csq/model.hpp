#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csq/hilbert.hpp"
#include "csq/squid.hpp"

namespace csq {

// k_B / hbar in rad/ns per kelvin (SI-exact k_B, CODATA hbar).
constexpr double kBoltzmannOverHbar = 1.380649e-23 / 1.054571817e-34 * 1e-9;

// Dispersive model of the driven resonator-qubit pair. Units: hbar = 1,
// time in ns, angular frequency in rad/ns. Frequency-like inputs quoted
// "per 2pi" elsewhere are converted before they get here.
struct PhysicalParams {
  double omega = 0.0;    // resonator frequency
  double omega_q = 0.0;  // qubit frequency
  double chi = 0.0;      // dispersive shift magnitude (> 0; sign bookkeeping
                         // lives in the derived detuning)
  double g_d = 0.0;      // drive coupling rate
  double epsilon = 0.0;  // dimensionless drive amplitude, 0 <= eps < 1
  double theta = 0.0;    // drive phase (rad)
  std::optional<double> omega_d;  // drive frequency; empty -> 2*(omega - chi)
  double gate_time = 0.0;         // ns
  double temperature = 0.0;       // K
  double tau_r = 0.0;             // resonator decay time, ns
  double tau_q = 0.0;             // qubit decay time, ns
  double tau_phi = 0.0;           // qubit dephasing time, ns
  int resonator_dim = 90;         // Fock truncation
  double kerr_k = 0.0;  // optional self-Kerr K*(adag adag a a)/2, off by default

  double resolved_omega_d() const;
  void validate() const;  // throws on violated invariants
};

// The working point used throughout: omega/2pi = 6 GHz, omega_q/2pi = 4 GHz,
// chi/2pi = 8 MHz, g_d = 0.05 rad/ns, eps = 0.15, 200 ns gate, 60 mK bath,
// tau_r = tau_q = 200 us, tau_phi = 10 us, N = 90.
PhysicalParams reference_params();

struct DerivedQuantities {
  double omega_bar_0 = 0.0;  // omega + chi (qubit in |0>)
  double omega_bar_1 = 0.0;  // omega - chi (qubit in |1>)
  double delta = 0.0;        // omega_bar_1 - omega_bar_0 = -2 chi, kept signed;
                             // magnitudes enter the Hamiltonians
  double delta_tilde = 0.0;  // Stark-shifted detuning, delta*(1 - (g_d eps/delta)^2/2)
  double r_target = 0.0;     // g_d * eps * gate_time
  double phi_analytic = 0.0; // |delta_tilde| * gate_time
  bool perturbative = false; // |g_d eps / delta| < 0.2, validity of delta_tilde
};

DerivedQuantities derive(const PhysicalParams& p);

// (omega_q/2) sz + omega n + chi n sz + g_d eps sin(omega_d t - theta) (a + adag)^2.
OperatorMatrix lab_hamiltonian(const PhysicalParams& p, double t);

// (i/2) g_d eps (e^{-i theta} a^2 - e^{i theta} adag^2) (x) |1><1|
//   + |delta_tilde| n (x) |0><0|.
// The detuning enters as a magnitude so the |0>-branch rotation angle comes
// out positive; the sign of delta only flips the rotation direction.
OperatorMatrix rwa_hamiltonian(const PhysicalParams& p);

// Full drive in the frame rotating at omega_bar_1 on the resonator and
// omega_q/2 on the qubit, with the frame's phase origin chosen so the secular
// part is exactly the rwa_hamiltonian squeeze generator with r = g_d eps t:
//   |delta| n (x) |0><0|
//   + g_d eps sin(omega_d t - theta) [ -a^2 e^{-2i w1 t} - adag^2 e^{+2i w1 t}
//                                      + 2n + 1 ] (x) 1.
// Keeps every counter-rotating term; averaging over one drive period
// recovers the squeeze generator on both branches.
OperatorMatrix drive_frame_hamiltonian(const PhysicalParams& p, double t);

// dpsi/dt = -i H(t) psi for the drive-frame Hamiltonian, as an O(N) banded
// apply on a joint qubit-major vector. For adaptive integrators.
using GeneratorFn = std::function<void(double, const VectorXcd&, VectorXcd&)>;
GeneratorFn make_drive_frame_generator(const PhysicalParams& p);

struct QubitExtras {
  double e_cq = 2.0 * M_PI * 0.15;   // transmon capacitive energy, rad/ns
  std::optional<double> delta_q;     // qubit-resonator detuning; empty -> omega_q - omega
  std::optional<double> chi_signed;  // signed dispersive pull; empty -> -chi
};

struct KerrEstimates {
  std::optional<double> k_squid_ratio;  // only when a geometry is supplied
  double k_qubit_ratio = 0.0;           // K_qubit / omega
  double g_q = 0.0;  // qubit-resonator coupling implied by chi (diagnostic)
};

// Estimates of the two neglected Kerr channels, as ratios to the resonator
// frequency. The qubit-induced coupling g_q = sqrt(-chi dq (dq - E_Cq)/E_Cq)
// needs a positive radicand; a chi/detuning sign mismatch throws.
KerrEstimates kerr_estimates(
    const PhysicalParams& p,
    const std::optional<SquidResonatorGeometry>& geometry = std::nullopt,
    const QubitExtras& extras = QubitExtras{});

struct RegimeCheck {
  std::string check;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// Report-only sanity sweep: weak drive |g_d eps/delta| < 0.1, dispersive
// |g_q/delta_q| < 0.3 (when extras are given), squeeze headroom
// sinh^2(r_target) < dim/6, thermal occupations < 0.1. Never throws; a row
// that cannot be evaluated reports value = NaN, pass = false.
std::vector<RegimeCheck> validate_regimes(
    const PhysicalParams& p,
    const std::optional<QubitExtras>& extras = std::nullopt);

}  // namespace csq

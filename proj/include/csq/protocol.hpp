#pragma once

#include <string>
#include <vector>

#include "csq/dynamics.hpp"
#include "csq/gates.hpp"
#include "csq/hilbert.hpp"
#include "csq/model.hpp"

namespace csq {

// Input qubit state cos(theta_b/2)|0> + e^{i phi_b} sin(theta_b/2)|1>.
struct BlochPoint {
  double theta_b = 0.0;
  double phi_b = 0.0;

  Complex alpha() const;
  Complex beta() const;
  double p_z() const;  // |alpha|^2 - |beta|^2
  void validate() const;
};

// Even/odd superpositions of two squeezed vacua a half-turn apart in phase
// space: chi_pm = (|r,theta> pm |r,theta+pi>) / (sqrt(2) c_pm) with the
// analytic normalizers c_pm = sqrt(1 pm 1/sqrt(cosh 2r)). chi_plus lives on
// Fock numbers 0 mod 4, chi_minus on 2 mod 4, and the pair is orthonormal.
struct CodeStates {
  QuantumState chi_plus;
  QuantumState chi_minus;
  double c_plus = 0.0;
  double c_minus = 0.0;
  double r = 0.0;
  double theta_tilde = 0.0;
};

// Vectors come from the same truncated squeeze construction as the gates, so
// sequence outputs compare against them at matching truncation; the small
// truncation norm defect is renormalized away while c_pm stay analytic.
// r = 0 makes the two vacua coincide and is rejected as a degenerate code.
CodeStates chi_states(double r, double theta_tilde, int dim);

// 1/2 (1 + p_z^2) + 1/2 (1 - p_z^2) sqrt(1 - 1/cosh 2r): the exact average
// encoding fidelity of the ideal sequence over measurement outcomes.
double average_fidelity_exact(double r, double p_z);

enum class Backend { Ideal, Unitary, Lindblad };

struct ProtocolReport {
  BlochPoint bloch;
  Backend backend = Backend::Ideal;
  double p_plus = 0.0;        // probability of the qubit-|0> outcome
  double p_minus = 0.0;
  double f_plus = 0.0;        // fidelity vs alpha chi_+ + beta chi_-
  double f_minus = 0.0;       // fidelity vs alpha chi_- + beta chi_+
  double f_avg = 0.0;         // p_+ f_+ + p_- f_-
  double purity_plus = 1.0;   // of the collapsed resonator states
  double purity_minus = 1.0;
  double phi_used = 0.0;      // compensation angle the wait was computed from
  double wait_time = 0.0;     // ns
  bool long_wait = false;     // wait exceeded 10 / kappa1

  void validate() const;  // outcome probabilities sum to 1, everything in range
};

// Full outputs of one encoding run: the report plus the pre-measurement joint
// state and the post-measurement resonator states (mixed under lindblad).
// Integrator diagnostics are aggregated over all timed segments.
struct EncodeOutcome {
  ProtocolReport report;
  QuantumState joint_final;
  QuantumState resonator_plus;
  QuantumState resonator_minus;
  long steps = 0;
  double max_trace_drift = 0.0;
  double max_leakage = 0.0;
};

// Perfect-gate encoding sequence: Hadamard, C-Sqz(r, theta+pi), pi, C-Sqz(r,
// theta), pi, Hadamard, with no idle rotation on the |0> branch. The result
// is the closed-form code superposition at theta_tilde = theta.
EncodeOutcome ideal_encode(const BlochPoint& bloch, double r, double theta, int dim);

// The same sequence with the physical gate, which rotates the |0> branch by
// phi per gate, followed by a timed free-evolution wait before the last pi +
// Hadamard. The wait duration is the smallest tau >= 0 with
// |delta| tau + phi_star = 0 (mod 2pi), so an accurate phi_star restores the
// ideal code angle; targets are recomputed from the actually-applied residual.
// Backends: Ideal = gate matrices with the analytic branch rotation,
// Unitary = full-drive time-dependent integration, Lindblad = master-equation
// segments with thermally balanced rates from params.
EncodeOutcome compensated_encode(const BlochPoint& bloch, const PhysicalParams& params,
                                 double phi_star, Backend backend);

// Smallest tau >= 0 with delta_magnitude * tau + phi = 0 (mod 2pi); exact
// multiples of 2pi map to tau = 0.
double compensation_wait_time(double phi, double delta_magnitude);

struct OptimizationResult {
  double phi_star = 0.0;
  double f_at_star = 0.0;
  double phi_analytic = 0.0;  // |delta_tilde| * gate_time seed
  int evaluations = 0;
  bool multimodal = false;  // several comparable maxima in the search window
  bool degenerate = false;  // landscape flat (e.g. vanishing drive)
};

// Derivative-free maximization of f_avg(phi_star) for a probe input over
// [phi_analytic - pi, phi_analytic + pi]: coarse scan, then golden-section
// refinement of the peak nearest the analytic seed, to 1e-3 rad. The
// landscape is pi-periodic for lossless backends, so the window holds twin
// peaks and the multimodal flag is expected; fully deterministic.
// The default probe sits on the equator at azimuth pi/2: at azimuth 0 the
// odd code component enters with amplitude (alpha - beta)/sqrt(2) = 0 and
// the fidelity decouples from the wait angle entirely.
OptimizationResult optimize_compensation_angle(const PhysicalParams& params, Backend backend,
                                               const BlochPoint& probe = BlochPoint{M_PI / 2.0, M_PI / 2.0});

// Outer-product grid of Bloch angles, row-major over (theta_b, phi_b).
struct SweepGrid {
  std::vector<double> theta_b;
  std::vector<double> phi_b;
};

struct SweepEntry {
  ProtocolReport report;
  bool ok = false;
  std::string error;  // non-empty when this point failed
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // grid order preserved
  long steps = 0;                   // shared propagation diagnostics
  double max_trace_drift = 0.0;
  double max_leakage = 0.0;
};

// Encodes every grid point at a fixed compensation angle. The sequence does
// not depend on the input state, so its propagation is done once on basis
// states and each point is assembled by linearity; jobs > 1 fans the per-point
// assembly out over threads without changing output order.
SweepResult bloch_sweep(const PhysicalParams& params, const SweepGrid& grid, double phi_star,
                        Backend backend, int jobs = 1);

}  // namespace csq

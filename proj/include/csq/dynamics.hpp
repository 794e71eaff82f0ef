#pragma once

#include "csq/hilbert.hpp"
#include "csq/model.hpp"

namespace csq {

// Rates of the five-dissipator bath model: resonator decay/excitation,
// qubit decay/excitation, qubit dephasing. All in 1/ns.
struct LindbladSpec {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa1p = 0.0;
  double kappa2p = 0.0;
  double kappa_phi = 0.0;
  double n_th = 0.0;    // resonator thermal occupation behind kappa1/kappa2
  double n_th_q = 0.0;  // qubit thermal occupation behind kappa1p/kappa2p

  bool closed() const {
    return kappa1 == 0.0 && kappa2 == 0.0 && kappa1p == 0.0 && kappa2p == 0.0 &&
           kappa_phi == 0.0;
  }
  void validate() const;  // all rates >= 0
};

// Bose-Einstein occupation 1/(exp(omega/kB T) - 1); returns the T -> 0 limit
// of 0 at exactly T = 0, throws on negative T or non-positive omega.
double thermal_occupation(double omega, double temperature);

// Rates from the physical parameter record: kappa1 = (n_th + 1)/tau_r,
// kappa2 = n_th/tau_r (occupation at the resonator frequency), the primed
// pair likewise from tau_q at the qubit frequency, kappa_phi = 1/tau_phi.
LindbladSpec lindblad_spec(const PhysicalParams& p);

struct EvolutionResult {
  QuantumState final_state;
  long steps = 0;
  double max_trace_drift = 0.0;  // |trace - 1| (norm^2 for pure evolutions)
  double max_leakage = 0.0;      // population in the top 10 Fock levels
};

// Propagation under a constant Hermitian Hamiltonian, by exact
// eigendecomposition. state must be pure.
EvolutionResult evolve_unitary(const OperatorMatrix& hamiltonian, const QuantumState& state,
                               double duration, double tol = 1e-9);

// Propagation under a time-dependent generator computing dpsi/dt = -i H(t) psi,
// by an adaptive embedded Dormand-Prince 5(4) pair with per-step local error
// control at tol. Throws IntegrationFailure when the step size underflows.
EvolutionResult evolve_unitary(const GeneratorFn& generator, const QuantumState& state,
                               double duration, double tol = 1e-9);

// Master-equation propagation with the five-dissipator set
//   (kappa1/2)[2 a rho adag - adag a rho - rho adag a]
//   (kappa2/2)[2 adag rho a - a adag rho - rho a adag]
//   (kappa1p/2), (kappa2p/2) likewise with sigma_minus = |1><0| / sigma_plus
//   (1/2)(kappa_phi/2)[2 sz rho sz - 2 rho]            (literal form)
// around -i[H, rho]. The Hamiltonian must be Hermitian; a joint-layout H that
// is block-diagonal in the qubit (every Hamiltonian this model produces) runs
// on a fast per-branch interaction-picture path, anything else on a direct
// fallback. rho0 must be mixed (convert pure inputs with to_mixed()).
EvolutionResult evolve_lindblad(const OperatorMatrix& hamiltonian, const LindbladSpec& spec,
                                const QuantumState& rho0, double duration, double tol = 1e-9);

struct PropagationStats {
  long steps = 0;
  double max_trace_drift = 0.0;  // |trace(t) - trace(0)|
  double max_leakage = 0.0;
};

// The same master-equation flow applied to an arbitrary (not necessarily
// Hermitian or unit-trace) payload matrix. The flow is linear and maps
// adjoints to adjoints, so propagating a basis of initial payloads gives
// every initial state of interest by superposition.
MatrixXcd propagate_lindblad(const OperatorMatrix& hamiltonian, const LindbladSpec& spec,
                             const MatrixXcd& payload, double duration, double tol = 1e-9,
                             PropagationStats* stats = nullptr);

}  // namespace csq

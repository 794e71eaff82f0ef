#pragma once

#include <array>

#include "csq/hilbert.hpp"

namespace csq {

// Parameters of S(r, theta) = exp[(r/2)(e^{-i theta} a^2 - e^{i theta} a^+^2)].
// theta is stored as given so compositions like R(phi) S R(phi)^+ = S(r, theta - 2 phi)
// round-trip; theta_canonical() folds it into [0, 2 pi).
struct SqueezeParams {
  double r = 0.0;
  double theta = 0.0;

  double theta_canonical() const;
};

// Conservative headroom check: the squeezed vacuum population spread
// sinh^2(r) should stay well under the truncation edge.
bool squeeze_truncation_safe(int dim, double r);

OperatorMatrix squeeze(int dim, SqueezeParams sp);
OperatorMatrix displace(int dim, Complex gamma);
OperatorMatrix rotation(int dim, double phi);  // exp(-i phi n), exact diagonal

// gamma' with S(r,theta) D(gamma) S(r,theta)^+ = D(gamma').
Complex conjugated_displacement(Complex gamma, SqueezeParams sp);

// S(r,theta) on the |1> qubit branch, exp(-i phi0 n) on the |0> branch.
OperatorMatrix controlled_squeeze(int resonator_dim, SqueezeParams sp, double phi0);

// The pi rotation is taken as the real involution X; a global phase
// convention here drops out of every reported probability and fidelity.
enum class QubitGate { Hadamard, PiRotation };

Matrix2cd qubit_gate(QubitGate g);
OperatorMatrix lift_qubit_gate(int resonator_dim, QubitGate g);

// Computational-basis projectors on the qubit, lifted to the joint space:
// {|0><0| x 1, |1><1| x 1}.
std::array<OperatorMatrix, 2> measurement_projectors(int resonator_dim);

}  // namespace csq

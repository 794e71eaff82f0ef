#include "csq/gates.hpp"

#include <cmath>

namespace csq {

double SqueezeParams::theta_canonical() const {
  double two_pi = 2.0 * M_PI;
  double t = std::fmod(theta, two_pi);
  if (t < 0.0) t += two_pi;
  return t;
}

bool squeeze_truncation_safe(int dim, double r) {
  double s = std::sinh(r);
  return s * s <= double(dim) / 6.0;
}

OperatorMatrix squeeze(int dim, SqueezeParams sp) {
  if (dim < 1) throw Error(ErrorCode::InvalidDimension, "squeeze needs dim >= 1");
  double s = std::sinh(sp.r);
  if (s * s > double(dim) / 3.0)
    throw Error(ErrorCode::Truncation, "squeeze with sinh^2(r) = " + std::to_string(s * s) +
                                           " exceeds dim/3 = " + std::to_string(dim / 3.0));
  MatrixXcd a = annihilation(dim);
  MatrixXcd a2 = a * a;
  Complex phase = std::exp(Complex(0.0, sp.theta));
  MatrixXcd gen = 0.5 * sp.r * (std::conj(phase) * a2 - phase * a2.adjoint());
  return {{dim, false}, operator_exponential(gen)};
}

OperatorMatrix displace(int dim, Complex gamma) {
  if (dim < 1) throw Error(ErrorCode::InvalidDimension, "displace needs dim >= 1");
  MatrixXcd a = annihilation(dim);
  MatrixXcd gen = gamma * a.adjoint() - std::conj(gamma) * a;
  return {{dim, false}, operator_exponential(gen)};
}

OperatorMatrix rotation(int dim, double phi) {
  if (dim < 1) throw Error(ErrorCode::InvalidDimension, "rotation needs dim >= 1");
  MatrixXcd r = MatrixXcd::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) r(n, n) = std::exp(Complex(0.0, -phi * n));
  return {{dim, false}, r};
}

Complex conjugated_displacement(Complex gamma, SqueezeParams sp) {
  Complex phase = std::exp(Complex(0.0, sp.theta));
  return gamma * std::cosh(sp.r) - std::conj(gamma) * phase * std::sinh(sp.r);
}

OperatorMatrix controlled_squeeze(int resonator_dim, SqueezeParams sp, double phi0) {
  OperatorMatrix s = squeeze(resonator_dim, sp);
  OperatorMatrix r = rotation(resonator_dim, phi0);
  Matrix2cd p0 = Matrix2cd::Zero(), p1 = Matrix2cd::Zero();
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  return {{resonator_dim, true}, tensor(p0, r.mat) + tensor(p1, s.mat)};
}

Matrix2cd qubit_gate(QubitGate g) {
  Matrix2cd m;
  switch (g) {
    case QubitGate::Hadamard: {
      double inv = 1.0 / std::sqrt(2.0);
      m << inv, inv, inv, -inv;
      break;
    }
    case QubitGate::PiRotation:
      m << 0.0, 1.0, 1.0, 0.0;
      break;
  }
  return m;
}

OperatorMatrix lift_qubit_gate(int resonator_dim, QubitGate g) {
  if (resonator_dim < 1) throw Error(ErrorCode::InvalidDimension, "lift needs dim >= 1");
  return {{resonator_dim, true},
          tensor(qubit_gate(g), MatrixXcd::Identity(resonator_dim, resonator_dim))};
}

std::array<OperatorMatrix, 2> measurement_projectors(int resonator_dim) {
  if (resonator_dim < 1) throw Error(ErrorCode::InvalidDimension, "projectors need dim >= 1");
  Matrix2cd p0 = Matrix2cd::Zero(), p1 = Matrix2cd::Zero();
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  MatrixXcd idr = MatrixXcd::Identity(resonator_dim, resonator_dim);
  return {OperatorMatrix{{resonator_dim, true}, tensor(p0, idr)},
          OperatorMatrix{{resonator_dim, true}, tensor(p1, idr)}};
}

}  // namespace csq

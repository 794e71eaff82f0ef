#pragma once

#include <complex>

#include <Eigen/Dense>

#include "csq/error.hpp"

namespace csq {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::Matrix2cd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Tensor-product bookkeeping. Joint spaces are qubit-major: basis index
// i = q * resonator_dim + n with q in {0,1} and n the Fock index, so the
// qubit is the slow (outer) factor.
struct HilbertLayout {
  int resonator_dim = 0;
  bool has_qubit = false;

  int dim() const { return has_qubit ? 2 * resonator_dim : resonator_dim; }
  bool operator==(const HilbertLayout&) const = default;

  void validate() const {
    if (resonator_dim < 1)
      throw Error(ErrorCode::InvalidDimension,
                  "resonator_dim must be >= 1, got " + std::to_string(resonator_dim));
  }
};

enum class StateKind { Pure, Mixed };

// A validated pure vector or density matrix tagged with its layout.
// Construction checks normalization (pure) or hermiticity, unit trace and
// positivity (mixed); from_evolution() admits integrator output with looser
// tolerances and reports the hermiticity defect it symmetrized away.
class QuantumState {
 public:
  static QuantumState pure(HilbertLayout layout, VectorXcd psi);
  static QuantumState mixed(HilbertLayout layout, MatrixXcd rho);
  static QuantumState from_evolution(HilbertLayout layout, MatrixXcd rho,
                                     double* hermiticity_defect = nullptr);

  StateKind kind() const { return kind_; }
  const HilbertLayout& layout() const { return layout_; }
  int dim() const { return layout_.dim(); }

  const VectorXcd& vector() const;   // throws KindMismatch on mixed states
  const MatrixXcd& matrix() const;   // throws KindMismatch on pure states
  MatrixXcd density() const;         // |psi><psi| or the stored matrix
  QuantumState to_mixed() const;

 private:
  QuantumState(HilbertLayout layout, StateKind kind) : layout_(layout), kind_(kind) {}

  HilbertLayout layout_;
  StateKind kind_;
  VectorXcd vec_;
  MatrixXcd mat_;
};

// An operator tagged with the layout it acts on.
struct OperatorMatrix {
  HilbertLayout layout;
  MatrixXcd mat;

  void validate() const {
    layout.validate();
    if (mat.rows() != layout.dim() || mat.cols() != layout.dim())
      throw Error(ErrorCode::LayoutMismatch,
                  "operator is " + std::to_string(mat.rows()) + "x" + std::to_string(mat.cols()) +
                      " but layout dim is " + std::to_string(layout.dim()));
  }
};

// Truncated ladder operators on a resonator_dim-dimensional Fock space.
MatrixXcd annihilation(int dim);
MatrixXcd creation(int dim);
MatrixXcd number_operator(int dim);

VectorXcd fock_vector(int dim, int n);

// Kronecker product with the qubit factor slow, matching HilbertLayout.
MatrixXcd tensor(const MatrixXcd& qubit_op, const MatrixXcd& resonator_op);

// Reduced states of a mixed joint state. Pure inputs are rejected so the
// caller converts explicitly (the reduction is mixed in general).
QuantumState partial_trace_resonator(const QuantumState& joint);
Matrix2cd partial_trace_qubit(const QuantumState& joint);

double purity(const QuantumState& state);

// Uhlmann fidelity; specializes to |<a|b>|^2 and <psi|rho|psi> when one or
// both arguments are pure.
double fidelity(const QuantumState& a, const QuantumState& b);

// Matrix exponential (Pade scaling-and-squaring), no hermiticity assumption.
MatrixXcd operator_exponential(const MatrixXcd& a);

// Wigner quasiprobability on a cartesian grid, x + i p = sqrt(2) * alpha,
// normalized so the vacuum peaks at 1/pi and the grid integral of W is 1.
// w(i, j) = W(x(j), p(i)).
struct WignerGrid {
  VectorXd x;
  VectorXd p;
  MatrixXd w;
};

WignerGrid wigner_grid(const QuantumState& resonator_state, const VectorXd& xs,
                       const VectorXd& ps);

}  // namespace csq

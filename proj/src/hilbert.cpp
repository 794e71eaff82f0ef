#include "csq/hilbert.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace csq {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDimension: return "invalid dimension";
    case ErrorCode::KindMismatch: return "state kind mismatch";
    case ErrorCode::LayoutMismatch: return "layout mismatch";
    case ErrorCode::InvalidState: return "invalid state";
    case ErrorCode::Truncation: return "truncation unsafe";
    case ErrorCode::DegenerateCode: return "degenerate code";
    case ErrorCode::IntegrationFailure: return "integration failure";
    case ErrorCode::SpectrumAnomaly: return "spectrum anomaly";
    case ErrorCode::SingularDerivative: return "singular derivative";
    case ErrorCode::InconsistentParameters: return "inconsistent parameters";
    case ErrorCode::RegimeViolation: return "regime violation";
    case ErrorCode::ConfigError: return "config error";
    case ErrorCode::NumericFailure: return "numeric failure";
  }
  return "unknown error";
}

namespace {

constexpr double kPureNormTol = 1e-10;
constexpr double kHermTol = 1e-12;
constexpr double kTraceTol = 1e-10;
constexpr double kEigFloor = -1e-10;

// Integrator output carries discretization noise, so states coming out of a
// time evolution are admitted with looser thresholds than hand-built ones.
constexpr double kEvolveHermTol = 1e-6;
constexpr double kEvolveTraceTol = 1e-6;
constexpr double kEvolveEigFloor = -1e-6;

double hermiticity_defect(const MatrixXcd& rho) {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

void check_density(const MatrixXcd& rho, double trace_tol, double eig_floor) {
  double tr = rho.real().trace();
  if (std::abs(tr - 1.0) > trace_tol)
    throw Error(ErrorCode::InvalidState,
                "density matrix trace deviates from 1 by " + std::to_string(tr - 1.0));
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < eig_floor)
    throw Error(ErrorCode::InvalidState,
                "density matrix has eigenvalue " + std::to_string(min_eig));
}

}  // namespace

QuantumState QuantumState::pure(HilbertLayout layout, VectorXcd psi) {
  layout.validate();
  if (psi.size() != layout.dim())
    throw Error(ErrorCode::LayoutMismatch, "state vector has " + std::to_string(psi.size()) +
                                               " entries, layout dim is " +
                                               std::to_string(layout.dim()));
  double norm = psi.norm();
  if (std::abs(norm - 1.0) > kPureNormTol)
    throw Error(ErrorCode::InvalidState,
                "state vector norm deviates from 1 by " + std::to_string(norm - 1.0));
  QuantumState s(layout, StateKind::Pure);
  s.vec_ = std::move(psi);
  return s;
}

QuantumState QuantumState::mixed(HilbertLayout layout, MatrixXcd rho) {
  layout.validate();
  if (rho.rows() != layout.dim() || rho.cols() != layout.dim())
    throw Error(ErrorCode::LayoutMismatch,
                "density matrix is " + std::to_string(rho.rows()) + "x" +
                    std::to_string(rho.cols()) + ", layout dim is " +
                    std::to_string(layout.dim()));
  if (hermiticity_defect(rho) > kHermTol)
    throw Error(ErrorCode::InvalidState, "density matrix is not hermitian (defect " +
                                             std::to_string(hermiticity_defect(rho)) + ")");
  check_density(rho, kTraceTol, kEigFloor);
  QuantumState s(layout, StateKind::Mixed);
  s.mat_ = std::move(rho);
  return s;
}

QuantumState QuantumState::from_evolution(HilbertLayout layout, MatrixXcd rho,
                                          double* hermiticity_defect_out) {
  layout.validate();
  if (rho.rows() != layout.dim() || rho.cols() != layout.dim())
    throw Error(ErrorCode::LayoutMismatch, "evolved density matrix size mismatch");
  double defect = hermiticity_defect(rho);
  if (hermiticity_defect_out) *hermiticity_defect_out = defect;
  if (defect > kEvolveHermTol)
    throw Error(ErrorCode::InvalidState,
                "evolved density matrix lost hermiticity (defect " + std::to_string(defect) + ")");
  rho = 0.5 * (rho + rho.adjoint()).eval();
  check_density(rho, kEvolveTraceTol, kEvolveEigFloor);
  QuantumState s(layout, StateKind::Mixed);
  s.mat_ = std::move(rho);
  return s;
}

const VectorXcd& QuantumState::vector() const {
  if (kind_ != StateKind::Pure)
    throw Error(ErrorCode::KindMismatch, "vector() called on a mixed state");
  return vec_;
}

const MatrixXcd& QuantumState::matrix() const {
  if (kind_ != StateKind::Mixed)
    throw Error(ErrorCode::KindMismatch, "matrix() called on a pure state");
  return mat_;
}

MatrixXcd QuantumState::density() const {
  if (kind_ == StateKind::Pure) return vec_ * vec_.adjoint();
  return mat_;
}

QuantumState QuantumState::to_mixed() const {
  if (kind_ == StateKind::Mixed) return *this;
  QuantumState s(layout_, StateKind::Mixed);
  s.mat_ = vec_ * vec_.adjoint();
  return s;
}

MatrixXcd annihilation(int dim) {
  if (dim < 1) throw Error(ErrorCode::InvalidDimension, "annihilation needs dim >= 1");
  MatrixXcd a = MatrixXcd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

MatrixXcd creation(int dim) { return annihilation(dim).adjoint(); }

MatrixXcd number_operator(int dim) {
  if (dim < 1) throw Error(ErrorCode::InvalidDimension, "number_operator needs dim >= 1");
  MatrixXcd n = MatrixXcd::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = double(k);
  return n;
}

VectorXcd fock_vector(int dim, int n) {
  if (dim < 1 || n < 0 || n >= dim)
    throw Error(ErrorCode::InvalidDimension,
                "fock index " + std::to_string(n) + " outside dim " + std::to_string(dim));
  VectorXcd v = VectorXcd::Zero(dim);
  v(n) = 1.0;
  return v;
}

MatrixXcd tensor(const MatrixXcd& qubit_op, const MatrixXcd& resonator_op) {
  const long p = qubit_op.rows(), q = qubit_op.cols();
  const long n = resonator_op.rows(), m = resonator_op.cols();
  MatrixXcd out(p * n, q * m);
  for (long i = 0; i < p; ++i)
    for (long j = 0; j < q; ++j) out.block(i * n, j * m, n, m) = qubit_op(i, j) * resonator_op;
  return out;
}

QuantumState partial_trace_resonator(const QuantumState& joint) {
  if (!joint.layout().has_qubit)
    throw Error(ErrorCode::LayoutMismatch, "partial trace needs a joint qubit+resonator state");
  if (joint.kind() != StateKind::Mixed)
    throw Error(ErrorCode::KindMismatch,
                "partial trace acts on density matrices; convert with to_mixed()");
  const int n = joint.layout().resonator_dim;
  const MatrixXcd& rho = joint.matrix();
  MatrixXcd red = rho.block(0, 0, n, n) + rho.block(n, n, n, n);
  // Reductions inherit whatever numerical noise the joint state carried, so
  // validate with the evolution thresholds rather than the strict ones.
  return QuantumState::from_evolution({n, false}, std::move(red));
}

Matrix2cd partial_trace_qubit(const QuantumState& joint) {
  if (!joint.layout().has_qubit)
    throw Error(ErrorCode::LayoutMismatch, "partial trace needs a joint qubit+resonator state");
  if (joint.kind() != StateKind::Mixed)
    throw Error(ErrorCode::KindMismatch,
                "partial trace acts on density matrices; convert with to_mixed()");
  const int n = joint.layout().resonator_dim;
  const MatrixXcd& rho = joint.matrix();
  Matrix2cd out;
  for (int q = 0; q < 2; ++q)
    for (int r = 0; r < 2; ++r) out(q, r) = rho.block(q * n, r * n, n, n).trace();
  return out;
}

double purity(const QuantumState& state) {
  if (state.kind() == StateKind::Pure) return 1.0;
  const MatrixXcd& rho = state.matrix();
  return (rho * rho).trace().real();
}

double fidelity(const QuantumState& a, const QuantumState& b) {
  if (!(a.layout() == b.layout()))
    throw Error(ErrorCode::LayoutMismatch, "fidelity between states on different layouts");
  const bool ap = a.kind() == StateKind::Pure, bp = b.kind() == StateKind::Pure;
  if (ap && bp) return std::norm(a.vector().dot(b.vector()));
  if (ap || bp) {
    const VectorXcd& psi = ap ? a.vector() : b.vector();
    const MatrixXcd& rho = ap ? b.matrix() : a.matrix();
    double f = (psi.adjoint() * rho * psi)(0).real();
    return std::max(f, 0.0);
  }
  // Uhlmann fidelity via the eigendecomposition of sqrt(rho) sigma sqrt(rho).
  Eigen::SelfAdjointEigenSolver<MatrixXcd> ea(a.matrix());
  VectorXd ev = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  MatrixXcd sqrt_a = ea.eigenvectors() * ev.asDiagonal() * ea.eigenvectors().adjoint();
  MatrixXcd m = sqrt_a * b.matrix() * sqrt_a;
  Eigen::SelfAdjointEigenSolver<MatrixXcd> em(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  double root_sum = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return root_sum * root_sum;
}

MatrixXcd operator_exponential(const MatrixXcd& a) {
  if (a.rows() != a.cols())
    throw Error(ErrorCode::InvalidDimension, "matrix exponential of a non-square matrix");
  return a.exp();
}

namespace {

// Re tr[rho D(g) Pi] with g = 2 alpha; Pi the photon-number parity. Uses
//   <m+k| D(g) |m> = sqrt(m!/(m+k)!) g^k e^{-|g|^2/2} L_m^k(|g|^2)
// with the e^{-|g|^2/2} folded into the Laguerre recurrence and the remaining
// magnitude assembled in log space, so nothing overflows for any grid point
// that has a representable value.
double displaced_parity(const MatrixXcd& rho, Complex g, const std::vector<double>& lgam) {
  const int dim = int(rho.rows());
  const double xi = std::norm(g);
  if (xi > 1400.0) return 0.0;  // |W| < 1e-300 out here; avoid inf*0 corners
  if (xi == 0.0) {
    double s = 0.0;
    for (int m = 0; m < dim; ++m) s += (m % 2 ? -1.0 : 1.0) * rho(m, m).real();
    return s;
  }
  const double log_g = 0.5 * std::log(xi);
  const Complex u = g / std::abs(g);
  double total = 0.0;
  Complex uk = 1.0;  // u^k
  for (int k = 0; k < dim; ++k) {
    Complex sk = 0.0;
    double p_prev = 0.0;                   // scaled L_{m-1}^k
    double p_curr = std::exp(-0.5 * xi);   // scaled L_0^k
    for (int m = 0; m + k < dim; ++m) {
      if (p_curr != 0.0) {
        double mag = std::exp(0.5 * (lgam[m] - lgam[m + k]) + k * log_g);
        double sign = (m % 2) ? -1.0 : 1.0;
        sk += rho(m, m + k) * (sign * mag * p_curr);
      }
      double p_next = ((2.0 * m + k + 1.0 - xi) * p_curr - (m + k) * p_prev) / (m + 1.0);
      p_prev = p_curr;
      p_curr = p_next;
    }
    total += (k == 0) ? sk.real() : 2.0 * (uk * sk).real();
    uk *= u;
  }
  return total;
}

}  // namespace

WignerGrid wigner_grid(const QuantumState& resonator_state, const VectorXd& xs,
                       const VectorXd& ps) {
  if (resonator_state.layout().has_qubit)
    throw Error(ErrorCode::LayoutMismatch,
                "wigner_grid expects a resonator-only state; trace out the qubit first");
  const MatrixXcd rho = resonator_state.density();
  const int dim = int(rho.rows());
  std::vector<double> lgam(dim + 1);
  for (int i = 0; i <= dim; ++i) lgam[i] = std::lgamma(double(i + 1));
  WignerGrid grid;
  grid.x = xs;
  grid.p = ps;
  grid.w.resize(ps.size(), xs.size());
  const double sqrt2 = std::sqrt(2.0);
  for (long i = 0; i < ps.size(); ++i)
    for (long j = 0; j < xs.size(); ++j) {
      Complex g = sqrt2 * Complex(xs(j), ps(i));
      grid.w(i, j) = displaced_parity(rho, g, lgam) / M_PI;
    }
  return grid;
}

}  // namespace csq

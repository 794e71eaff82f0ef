#include "csq/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace csq {

void LindbladSpec::validate() const {
  if (kappa1 < 0.0 || kappa2 < 0.0 || kappa1p < 0.0 || kappa2p < 0.0 || kappa_phi < 0.0)
    throw Error(ErrorCode::InconsistentParameters, "dissipator rates must be non-negative");
  if (n_th < 0.0 || n_th_q < 0.0)
    throw Error(ErrorCode::InconsistentParameters, "thermal occupations must be non-negative");
}

double thermal_occupation(double omega, double temperature) {
  if (omega <= 0.0)
    throw Error(ErrorCode::InconsistentParameters, "mode frequency must be positive");
  if (temperature <= 0.0)
    throw Error(ErrorCode::InconsistentParameters, "bath temperature must be positive");
  double x = omega / (kBoltzmannOverHbar * temperature);
  if (x > 700.0) return 0.0;
  return 1.0 / std::expm1(x);
}

LindbladSpec lindblad_spec(const PhysicalParams& p) {
  p.validate();
  LindbladSpec s;
  s.n_th = p.temperature > 0.0 ? thermal_occupation(p.omega, p.temperature) : 0.0;
  s.n_th_q = p.temperature > 0.0 ? thermal_occupation(p.omega_q, p.temperature) : 0.0;
  s.kappa1 = (s.n_th + 1.0) / p.tau_r;
  s.kappa2 = s.n_th / p.tau_r;
  s.kappa1p = (s.n_th_q + 1.0) / p.tau_q;
  s.kappa2p = s.n_th_q / p.tau_q;
  s.kappa_phi = 1.0 / p.tau_phi;
  return s;
}

namespace {

void require_hermitian(const MatrixXcd& h, const char* what) {
  double scale = 1.0 + h.cwiseAbs().maxCoeff();
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorCode::InconsistentParameters, std::string(what) + " is not hermitian");
}

double top_fock_population(const HilbertLayout& layout, const VectorXcd& psi) {
  int n = layout.resonator_dim;
  int lo = std::max(0, n - 10);
  double pop = 0.0;
  for (int q = 0; q < (layout.has_qubit ? 2 : 1); ++q)
    for (int m = lo; m < n; ++m) pop += std::norm(psi[q * n + m]);
  return pop;
}

[[noreturn]] void step_underflow(double t, double h, double err) {
  throw Error(ErrorCode::IntegrationFailure,
              "step size underflow at t = " + std::to_string(t) + " ns (h = " +
                  std::to_string(h) + ", scaled error " + std::to_string(err) + ")");
}

}  // namespace

EvolutionResult evolve_unitary(const OperatorMatrix& hamiltonian, const QuantumState& state,
                               double duration, double tol) {
  hamiltonian.validate();
  if (state.kind() != StateKind::Pure)
    throw Error(ErrorCode::KindMismatch, "unitary evolution needs a pure state");
  if (!(state.layout() == hamiltonian.layout))
    throw Error(ErrorCode::LayoutMismatch, "state and hamiltonian layouts differ");
  if (duration < 0.0 || tol <= 0.0)
    throw Error(ErrorCode::InconsistentParameters, "duration must be >= 0 and tol > 0");
  require_hermitian(hamiltonian.mat, "hamiltonian");

  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(hamiltonian.mat);
  VectorXcd coeff = es.eigenvectors().adjoint() * state.vector();
  for (int i = 0; i < coeff.size(); ++i)
    coeff[i] *= std::exp(Complex(0.0, -es.eigenvalues()[i] * duration));
  VectorXcd psi = es.eigenvectors() * coeff;

  double drift = std::abs(psi.squaredNorm() - 1.0);
  EvolutionResult r{QuantumState::pure(state.layout(), psi / psi.norm()), 1, drift,
                    top_fock_population(state.layout(), psi)};
  return r;
}

EvolutionResult evolve_unitary(const GeneratorFn& generator, const QuantumState& state,
                               double duration, double tol) {
  if (state.kind() != StateKind::Pure)
    throw Error(ErrorCode::KindMismatch, "unitary evolution needs a pure state");
  if (duration < 0.0 || tol <= 0.0)
    throw Error(ErrorCode::InconsistentParameters, "duration must be >= 0 and tol > 0");
  const HilbertLayout layout = state.layout();

  // Dormand-Prince 5(4) embedded pair, FSAL.
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  VectorXcd y = state.vector();
  EvolutionResult out{state, 0, 0.0, top_fock_population(layout, y)};
  if (duration == 0.0) return out;

  VectorXcd k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
  generator(0.0, y, k1);
  double h = std::min(duration, 0.5 / (1.0 + k1.cwiseAbs().maxCoeff()));
  const double hmin = std::max(duration * 1e-14, 1e-300);
  double t = 0.0;
  long steps = 0;

  while (t < duration) {
    if (steps > 20000000) step_underflow(t, h, 0.0);
    h = std::min(h, duration - t);
    ytmp = y + (h * a21) * k1;
    generator(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    generator(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    generator(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    generator(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    generator(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    generator(t + h, ynew, k7);

    VectorXcd edelta = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = 0.0;
    for (int i = 0; i < edelta.size(); ++i)
      err = std::max(err, std::abs(edelta[i]) / (tol * (1.0 + std::abs(ynew[i]))));
    if (!std::isfinite(err)) err = 1e18;  // a blown-up stage must shrink h, not poison it

    if (err <= 1.0) {
      t += h;
      y.swap(ynew);
      k1.swap(k7);
      ++steps;
      out.max_trace_drift = std::max(out.max_trace_drift, std::abs(y.squaredNorm() - 1.0));
      out.max_leakage = std::max(out.max_leakage, top_fock_population(layout, y));
    }
    h *= std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.2, 5.0);
    if (h < hmin && t < duration) step_underflow(t, h, err);
  }

  out.steps = steps;
  out.final_state = QuantumState::pure(layout, y / y.norm());
  return out;
}

// ---------------------------------------------------------------------------
// Master-equation flow.
//
// The Hamiltonians this model produces are block-diagonal in the qubit, so
// the four qubit blocks rho^{qq'} decouple except for the population flips
// 00 <-> 11. Each block is kept in the eigenbasis of its branch Hamiltonians
// and integrated in a per-step-rebased interaction picture: the Hamiltonian
// conjugation is exact (entrywise phases), and RK4 handles only the slow
// dissipative flow whose node operators are entrywise-phased copies of
// precomputed matrices. Blocks that start empty and stay empty are skipped,
// which is what makes propagating sparse basis payloads cheap.
// ---------------------------------------------------------------------------

namespace {

// e^{i lamL s} base e^{-i lamR s}, entrywise.
MatrixXcd phased(const MatrixXcd& base, const VectorXd& laml, const VectorXd& lamr, double s) {
  VectorXcd el(laml.size()), er(lamr.size());
  for (int i = 0; i < laml.size(); ++i) el[i] = std::exp(Complex(0.0, laml[i] * s));
  for (int j = 0; j < lamr.size(); ++j) er[j] = std::exp(Complex(0.0, -lamr[j] * s));
  return el.asDiagonal() * base * er.asDiagonal();
}

enum Block { B00 = 0, B01 = 1, B10 = 2, B11 = 3 };

struct Blocks {
  std::array<MatrixXcd, 4> m;
};

struct NodeOps {
  MatrixXcd a0, g0, a1, g1, w;
};

class BranchFlow {
 public:
  BranchFlow(const OperatorMatrix& h, const LindbladSpec& spec)
      : layout_(h.layout), n_(h.layout.resonator_dim), hq_(h.layout.has_qubit), spec_(spec) {
    MatrixXcd h0 = hq_ ? h.mat.topLeftCorner(n_, n_) : h.mat;
    MatrixXcd h1 = hq_ ? h.mat.bottomRightCorner(n_, n_) : h0;
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es0(h0);
    lam_[0] = es0.eigenvalues();
    u_[0] = es0.eigenvectors();
    if (hq_) {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> es1(h1);
      lam_[1] = es1.eigenvalues();
      u_[1] = es1.eigenvectors();
    } else {
      lam_[1] = lam_[0];
      u_[1] = u_[0];
    }
    MatrixXcd a = annihilation(n_);
    for (int q = 0; q < 2; ++q) {
      a_[q] = u_[q].adjoint() * a * u_[q];
      g_[q] = -0.5 * (spec_.kappa1 * (a_[q].adjoint() * a_[q]).eval() +
                      spec_.kappa2 * (a_[q] * a_[q].adjoint()).eval());
    }
    x01_ = u_[0].adjoint() * u_[1];
    gamma_flip_ = spec_.kappa1p + spec_.kappa2p;
    coh_rate_ = 0.5 * gamma_flip_ + spec_.kappa_phi;
    rate_scale_ = (spec_.kappa1 + spec_.kappa2) * (n_ + 1.0) + gamma_flip_ + spec_.kappa_phi;
    double span = lam_[0].maxCoeff() - lam_[0].minCoeff();
    if (hq_) span = std::max(span, lam_[1].maxCoeff() - lam_[1].minCoeff());
    osc_span_ = span;
  }

  MatrixXcd run(const MatrixXcd& payload, double duration, double tol, PropagationStats* stats,
                bool check_physical) {
    Blocks y;
    bool active[4] = {false, false, false, false};
    to_eigenbasis(payload, y, active);
    // population flips couple the diagonal blocks
    if ((active[B00] || active[B11]) && gamma_flip_ > 0.0) {
      for (int b : {B00, B11})
        if (!active[b]) {
          active[b] = true;
          y.m[b] = MatrixXcd::Zero(n_, n_);
        }
    }

    Complex trace0 = block_trace(y, active);
    PropagationStats st;
    st.max_leakage = leakage(y, active);

    if (spec_.closed()) {
      rebase(y, active, duration);
      st.steps = 1;
    } else {
      integrate(y, active, duration, tol, st, check_physical, trace0);
    }

    st.max_trace_drift = std::max(st.max_trace_drift, std::abs(block_trace(y, active) - trace0));
    st.max_leakage = std::max(st.max_leakage, leakage(y, active));
    if (stats) *stats = st;
    return from_eigenbasis(y, active);
  }

 private:
  static constexpr int kEstimateEvery = 8;

  void to_eigenbasis(const MatrixXcd& rho, Blocks& y, bool active[4]) const {
    auto load = [&](int b, int qi, int qj) {
      MatrixXcd part = hq_ ? rho.block(qi * n_, qj * n_, n_, n_) : rho;
      active[b] = part.cwiseAbs().maxCoeff() > 0.0;
      if (active[b]) y.m[b] = u_[qi].adjoint() * part * u_[qj];
    };
    load(B00, 0, 0);
    if (hq_) {
      load(B01, 0, 1);
      load(B10, 1, 0);
      load(B11, 1, 1);
    }
  }

  MatrixXcd from_eigenbasis(const Blocks& y, const bool active[4]) const {
    if (!hq_)
      return active[B00] ? MatrixXcd(u_[0] * y.m[B00] * u_[0].adjoint())
                         : MatrixXcd::Zero(n_, n_);
    MatrixXcd rho = MatrixXcd::Zero(2 * n_, 2 * n_);
    auto store = [&](int b, int qi, int qj) {
      if (active[b]) rho.block(qi * n_, qj * n_, n_, n_) = u_[qi] * y.m[b] * u_[qj].adjoint();
    };
    store(B00, 0, 0);
    store(B01, 0, 1);
    store(B10, 1, 0);
    store(B11, 1, 1);
    return rho;
  }

  Complex block_trace(const Blocks& y, const bool active[4]) const {
    Complex tr = 0.0;
    if (active[B00]) tr += y.m[B00].trace();
    if (active[B11]) tr += y.m[B11].trace();
    return tr;
  }

  // population of the top 10 Fock levels, back in the Fock basis
  double leakage(const Blocks& y, const bool active[4]) const {
    double pop = 0.0;
    int lo = std::max(0, n_ - 10);
    for (int b : {B00, B11}) {
      if (!active[b]) continue;
      int q = (b == B11) ? 1 : 0;
      for (int mrow = lo; mrow < n_; ++mrow) {
        VectorXcd c = u_[q].row(mrow).adjoint();  // <m| rotated into the eigenbasis
        pop += std::real(c.dot(y.m[b] * c));
      }
    }
    return pop;
  }

  void node_ops(double s, bool need_w, NodeOps& op) const {
    op.a0 = phased(a_[0], lam_[0], lam_[0], s);
    op.g0 = phased(g_[0], lam_[0], lam_[0], s);
    if (hq_) {
      op.a1 = phased(a_[1], lam_[1], lam_[1], s);
      op.g1 = phased(g_[1], lam_[1], lam_[1], s);
      if (need_w) op.w = phased(x01_, lam_[0], lam_[1], s);
    }
  }

  void rhs(const NodeOps& op, const Blocks& y, const bool active[4], Blocks& dy) const {
    const double k1 = spec_.kappa1, k2 = spec_.kappa2;
    if (active[B00]) {
      dy.m[B00].noalias() = k1 * (op.a0 * y.m[B00] * op.a0.adjoint());
      dy.m[B00].noalias() += k2 * (op.a0.adjoint() * y.m[B00] * op.a0);
      dy.m[B00].noalias() += op.g0 * y.m[B00];
      dy.m[B00].noalias() += y.m[B00] * op.g0;
      dy.m[B00] -= spec_.kappa1p * y.m[B00];
      if (active[B11] && spec_.kappa2p > 0.0)
        dy.m[B00].noalias() += spec_.kappa2p * (op.w * y.m[B11] * op.w.adjoint());
    }
    if (active[B11]) {
      dy.m[B11].noalias() = k1 * (op.a1 * y.m[B11] * op.a1.adjoint());
      dy.m[B11].noalias() += k2 * (op.a1.adjoint() * y.m[B11] * op.a1);
      dy.m[B11].noalias() += op.g1 * y.m[B11];
      dy.m[B11].noalias() += y.m[B11] * op.g1;
      dy.m[B11] -= spec_.kappa2p * y.m[B11];
      if (active[B00] && spec_.kappa1p > 0.0)
        dy.m[B11].noalias() += spec_.kappa1p * (op.w.adjoint() * y.m[B00] * op.w);
    }
    if (active[B01]) {
      dy.m[B01].noalias() = k1 * (op.a0 * y.m[B01] * op.a1.adjoint());
      dy.m[B01].noalias() += k2 * (op.a0.adjoint() * y.m[B01] * op.a1);
      dy.m[B01].noalias() += op.g0 * y.m[B01];
      dy.m[B01].noalias() += y.m[B01] * op.g1;
      dy.m[B01] -= coh_rate_ * y.m[B01];
    }
    if (active[B10]) {
      dy.m[B10].noalias() = k1 * (op.a1 * y.m[B10] * op.a0.adjoint());
      dy.m[B10].noalias() += k2 * (op.a1.adjoint() * y.m[B10] * op.a0);
      dy.m[B10].noalias() += op.g1 * y.m[B10];
      dy.m[B10].noalias() += y.m[B10] * op.g0;
      dy.m[B10] -= coh_rate_ * y.m[B10];
    }
  }

  void axpy(Blocks& dst, const Blocks& a, double c, const Blocks& b, const bool active[4]) const {
    for (int i = 0; i < 4; ++i)
      if (active[i]) dst.m[i] = a.m[i] + c * b.m[i];
  }

  // one classic RK4 step over local time [0, h], then an exact rebase by h
  void rk4(Blocks& y, const bool active[4], double h, const NodeOps& op0, const NodeOps& oph2,
           const NodeOps& oph) const {
    Blocks k1, k2, k3, k4, tmp;
    rhs(op0, y, active, k1);
    axpy(tmp, y, 0.5 * h, k1, active);
    rhs(oph2, tmp, active, k2);
    axpy(tmp, y, 0.5 * h, k2, active);
    rhs(oph2, tmp, active, k3);
    axpy(tmp, y, h, k3, active);
    rhs(oph, tmp, active, k4);
    for (int i = 0; i < 4; ++i)
      if (active[i])
        y.m[i] += (h / 6.0) * (k1.m[i] + 2.0 * k2.m[i] + 2.0 * k3.m[i] + k4.m[i]);
    rebase(y, active, h);
  }

  void rebase(Blocks& y, const bool active[4], double h) const {
    static const std::array<std::pair<int, int>, 4> qq = {
        {{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
    for (int b = 0; b < 4; ++b)
      if (active[b]) y.m[b] = phased(y.m[b], lam_[qq[b].first], lam_[qq[b].second], -h);
  }

  double max_entry(const Blocks& y, const bool active[4]) const {
    double m = 0.0;
    for (int b = 0; b < 4; ++b)
      if (active[b]) m = std::max(m, y.m[b].cwiseAbs().maxCoeff());
    return m;
  }

  void integrate(Blocks& y, const bool active[4], double duration, double tol,
                 PropagationStats& st, bool check_physical, Complex trace0) const {
    const bool need_w = hq_ && (active[B00] || active[B11]) && gamma_flip_ > 0.0;
    const double h_max =
        rate_scale_ > 0.0 ? std::min(duration, 0.5 / rate_scale_) : duration;
    double h = std::min({h_max, duration / 10.0, 2.0 / (1.0 + osc_span_)});
    const double hmin = std::max(duration * 1e-12, 1e-300);
    double t = 0.0;
    int since_estimate = kEstimateEvery;  // force an estimate on the first step

    NodeOps op0, oph4, oph2, oph;
    while (t < duration) {
      if (st.steps > 20000000) step_underflow(t, h, 0.0);
      h = std::min(h, duration - t);
      bool estimate = since_estimate >= kEstimateEvery || h >= duration - t;
      node_ops(0.0, need_w, op0);
      node_ops(0.5 * h, need_w, oph2);
      node_ops(h, need_w, oph);

      if (!estimate) {
        rk4(y, active, h, op0, oph2, oph);
        t += h;
        ++st.steps;
        ++since_estimate;
      } else {
        node_ops(0.25 * h, need_w, oph4);
        Blocks yfull = y, yhalf = y;
        rk4(yfull, active, h, op0, oph2, oph);
        // two half steps; after the exact rebase the node phases repeat
        rk4(yhalf, active, 0.5 * h, op0, oph4, oph2);
        rk4(yhalf, active, 0.5 * h, op0, oph4, oph2);

        double delta = 0.0;
        for (int b = 0; b < 4; ++b)
          if (active[b]) delta = std::max(delta, (yfull.m[b] - yhalf.m[b]).cwiseAbs().maxCoeff());
        double err = delta / 15.0 / (tol * (1.0 + max_entry(yhalf, active)));
        if (!std::isfinite(err)) err = 1e18;

        if (err <= 1.0) {
          y = std::move(yhalf);
          t += h;
          st.steps += 2;
          since_estimate = 0;
          if (check_physical) check_positivity(y, active, t);
        }
        h *= std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.25, 3.0);
        h = std::min(h, h_max);
        if (h < hmin && t < duration) step_underflow(t, h, err);
      }
      st.max_trace_drift =
          std::max(st.max_trace_drift, std::abs(block_trace(y, active) - trace0));
    }
  }

  void check_positivity(const Blocks& y, const bool active[4], double t) const {
    for (int b : {B00, B11}) {
      if (!active[b]) continue;
      double floor = y.m[b].diagonal().real().minCoeff();
      if (floor < -1e-6)
        throw Error(ErrorCode::InvalidState,
                    "non-physical state during integration at t = " + std::to_string(t) +
                        " ns (population " + std::to_string(floor) + ")");
    }
  }

  HilbertLayout layout_;
  int n_;
  bool hq_;
  LindbladSpec spec_;
  VectorXd lam_[2];
  MatrixXcd u_[2], a_[2], g_[2], x01_;
  double gamma_flip_ = 0.0, coh_rate_ = 0.0, rate_scale_ = 0.0, osc_span_ = 0.0;
};

// Fallback for Hamiltonians with qubit-branch cross terms: adaptive RK4 on
// the full-matrix flow in the Schroedinger picture. Slow but general.
class DenseFlow {
 public:
  DenseFlow(const OperatorMatrix& h, const LindbladSpec& spec) : spec_(spec) {
    const int n = h.layout.resonator_dim;
    const int d = h.layout.dim();
    MatrixXcd a_r = annihilation(n);
    a_ = h.layout.has_qubit ? tensor(Matrix2cd::Identity(), a_r) : a_r;
    if (h.layout.has_qubit) {
      Matrix2cd sm = Matrix2cd::Zero();
      sm(1, 0) = 1.0;  // |1><0|, the decay direction of the sigma_z convention
      sminus_ = tensor(sm, MatrixXcd::Identity(n, n));
      Matrix2cd sz = Matrix2cd::Zero();
      sz(0, 0) = 1.0;
      sz(1, 1) = -1.0;
      sz_ = tensor(sz, MatrixXcd::Identity(n, n));
    }
    anchor_ = Complex(0.0, -1.0) * h.mat;
    anchor_ -= 0.5 * (spec.kappa1 * (a_.adjoint() * a_).eval() +
                      spec.kappa2 * (a_ * a_.adjoint()).eval());
    if (h.layout.has_qubit) {
      anchor_ -= 0.5 * (spec.kappa1p * (sminus_.adjoint() * sminus_).eval() +
                        spec.kappa2p * (sminus_ * sminus_.adjoint()).eval());
      anchor_ -= 0.25 * spec.kappa_phi * MatrixXcd::Identity(d, d);
    }
    hnorm_ = h.mat.cwiseAbs().maxCoeff();
    has_qubit_ = h.layout.has_qubit;
  }

  MatrixXcd run(const MatrixXcd& payload, double duration, double tol, PropagationStats* stats,
                bool /*check_physical*/) {
    MatrixXcd y = payload;
    Complex trace0 = y.trace();
    PropagationStats st;
    double t = 0.0;
    double h = std::min(duration, 0.1 / (1.0 + hnorm_));
    const double hmin = std::max(duration * 1e-12, 1e-300);
    while (t < duration) {
      if (st.steps > 20000000) step_underflow(t, h, 0.0);
      h = std::min(h, duration - t);
      MatrixXcd yfull = step(y, h);
      MatrixXcd yhalf = step(step(y, 0.5 * h), 0.5 * h);
      double delta = (yfull - yhalf).cwiseAbs().maxCoeff() / 15.0;
      double err = delta / (tol * (1.0 + yhalf.cwiseAbs().maxCoeff()));
      if (!std::isfinite(err)) err = 1e18;
      if (err <= 1.0) {
        y = std::move(yhalf);
        t += h;
        st.steps += 2;
        st.max_trace_drift = std::max(st.max_trace_drift, std::abs(y.trace() - trace0));
      }
      h *= std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.25, 3.0);
      if (h < hmin && t < duration) step_underflow(t, h, err);
    }
    if (stats) *stats = st;
    return y;
  }

 private:
  MatrixXcd deriv(const MatrixXcd& y) const {
    MatrixXcd d = anchor_ * y + y * anchor_.adjoint();
    d.noalias() += spec_.kappa1 * (a_ * y * a_.adjoint());
    d.noalias() += spec_.kappa2 * (a_.adjoint() * y * a_);
    if (has_qubit_) {
      if (spec_.kappa1p > 0.0) d.noalias() += spec_.kappa1p * (sminus_ * y * sminus_.adjoint());
      if (spec_.kappa2p > 0.0) d.noalias() += spec_.kappa2p * (sminus_.adjoint() * y * sminus_);
      if (spec_.kappa_phi > 0.0) d.noalias() += 0.5 * spec_.kappa_phi * (sz_ * y * sz_);
    }
    return d;
  }

  MatrixXcd step(const MatrixXcd& y, double h) const {
    MatrixXcd k1 = deriv(y);
    MatrixXcd k2 = deriv(y + 0.5 * h * k1);
    MatrixXcd k3 = deriv(y + 0.5 * h * k2);
    MatrixXcd k4 = deriv(y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  LindbladSpec spec_;
  MatrixXcd a_, sminus_, sz_, anchor_;
  double hnorm_ = 0.0;
  bool has_qubit_ = false;
};

bool branch_diagonal(const OperatorMatrix& h) {
  if (!h.layout.has_qubit) return true;
  int n = h.layout.resonator_dim;
  double scale = 1.0 + h.mat.cwiseAbs().maxCoeff();
  return h.mat.topRightCorner(n, n).cwiseAbs().maxCoeff() < 1e-12 * scale &&
         h.mat.bottomLeftCorner(n, n).cwiseAbs().maxCoeff() < 1e-12 * scale;
}

MatrixXcd run_flow(const OperatorMatrix& hamiltonian, const LindbladSpec& spec,
                   const MatrixXcd& payload, double duration, double tol,
                   PropagationStats* stats, bool check_physical) {
  hamiltonian.validate();
  spec.validate();
  require_hermitian(hamiltonian.mat, "hamiltonian");
  if (!hamiltonian.layout.has_qubit &&
      (spec.kappa1p != 0.0 || spec.kappa2p != 0.0 || spec.kappa_phi != 0.0))
    throw Error(ErrorCode::LayoutMismatch,
                "qubit dissipation rates on a resonator-only layout");
  if (payload.rows() != hamiltonian.layout.dim() || payload.cols() != hamiltonian.layout.dim())
    throw Error(ErrorCode::LayoutMismatch, "payload dimensions do not match the layout");
  if (duration < 0.0 || tol <= 0.0)
    throw Error(ErrorCode::InconsistentParameters, "duration must be >= 0 and tol > 0");
  if (duration == 0.0) {
    if (stats) *stats = PropagationStats{};
    return payload;
  }
  if (branch_diagonal(hamiltonian))
    return BranchFlow(hamiltonian, spec).run(payload, duration, tol, stats, check_physical);
  return DenseFlow(hamiltonian, spec).run(payload, duration, tol, stats, check_physical);
}

}  // namespace

EvolutionResult evolve_lindblad(const OperatorMatrix& hamiltonian, const LindbladSpec& spec,
                                const QuantumState& rho0, double duration, double tol) {
  if (rho0.kind() != StateKind::Mixed)
    throw Error(ErrorCode::KindMismatch,
                "master-equation evolution needs a density matrix; convert with to_mixed()");
  if (!(rho0.layout() == hamiltonian.layout))
    throw Error(ErrorCode::LayoutMismatch, "state and hamiltonian layouts differ");

  PropagationStats st;
  MatrixXcd rho = run_flow(hamiltonian, spec, rho0.matrix(), duration, tol, &st, true);
  EvolutionResult out{QuantumState::from_evolution(rho0.layout(), std::move(rho)), st.steps,
                      st.max_trace_drift, st.max_leakage};
  return out;
}

MatrixXcd propagate_lindblad(const OperatorMatrix& hamiltonian, const LindbladSpec& spec,
                             const MatrixXcd& payload, double duration, double tol,
                             PropagationStats* stats) {
  return run_flow(hamiltonian, spec, payload, duration, tol, stats, false);
}

}  // namespace csq

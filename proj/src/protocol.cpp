#include "csq/protocol.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <utility>
#include <vector>

namespace csq {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kSegmentTol = 1e-10;  // integrator tolerance for timed segments; keeps
                                       // full-drive trace drift below 1e-8 over a gate
constexpr double kEmptyBranch = 1e-12; // outcome probability below which the
                                       // collapsed state is conventionally the target

// Block operations on qubit-major joint vectors [v0; v1] and densities.
// The qubit gates are real (Hadamard and the X involution), so they reduce to
// branch combinations and swaps; keeping them as block ops avoids 2N x 2N
// matrix products in the per-point assembly paths.

void ket_hadamard(VectorXcd& psi, int n) {
  const double inv = 1.0 / std::sqrt(2.0);
  VectorXcd v0 = psi.head(n);
  psi.head(n) = inv * (v0 + psi.tail(n));
  psi.tail(n) = inv * (v0 - psi.tail(n));
}

void ket_pi(VectorXcd& psi, int n) { psi.head(n).swap(psi.tail(n)); }

// exp(-i angle n) on the |0> branch only.
void ket_branch0_rotation(VectorXcd& psi, int n, double angle) {
  if (angle == 0.0) return;
  for (int m = 0; m < n; ++m) psi(m) *= std::polar(1.0, -angle * m);
}

void rho_hadamard(MatrixXcd& rho, int n) {
  MatrixXcd a = rho.topLeftCorner(n, n);
  MatrixXcd b = rho.topRightCorner(n, n);
  MatrixXcd c = rho.bottomLeftCorner(n, n);
  MatrixXcd d = rho.bottomRightCorner(n, n);
  rho.topLeftCorner(n, n) = 0.5 * (a + b + c + d);
  rho.topRightCorner(n, n) = 0.5 * (a - b + c - d);
  rho.bottomLeftCorner(n, n) = 0.5 * (a + b - c - d);
  rho.bottomRightCorner(n, n) = 0.5 * (a - b - c + d);
}

void rho_pi(MatrixXcd& rho, int n) {
  rho.topLeftCorner(n, n).swap(rho.bottomRightCorner(n, n));
  rho.topRightCorner(n, n).swap(rho.bottomLeftCorner(n, n));
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

struct Targets {
  VectorXcd plus;   // alpha chi_+ + beta chi_-
  VectorXcd minus;  // alpha chi_- + beta chi_+
};

Targets make_targets(const CodeStates& code, const BlochPoint& bloch) {
  Complex a = bloch.alpha(), b = bloch.beta();
  Targets t;
  t.plus = a * code.chi_plus.vector() + b * code.chi_minus.vector();
  t.minus = a * code.chi_minus.vector() + b * code.chi_plus.vector();
  t.plus /= t.plus.norm();
  t.minus /= t.minus.norm();
  return t;
}

EncodeOutcome collapse_pure(const BlochPoint& bloch, Backend backend, const CodeStates& code,
                            VectorXcd psi, double phi_used, double wait_time, bool long_wait,
                            long steps, double drift, double leakage) {
  const int n = code.chi_plus.dim();
  Targets t = make_targets(code, bloch);

  ProtocolReport rep;
  rep.bloch = bloch;
  rep.backend = backend;
  rep.p_plus = psi.head(n).squaredNorm();
  rep.p_minus = psi.tail(n).squaredNorm();
  rep.phi_used = phi_used;
  rep.wait_time = wait_time;
  rep.long_wait = long_wait;

  VectorXcd rp, rm;
  if (rep.p_plus > kEmptyBranch) {
    rp = psi.head(n) / std::sqrt(rep.p_plus);
    rep.f_plus = std::norm(t.plus.dot(rp));
  } else {
    rp = t.plus;
    rep.f_plus = 1.0;
  }
  if (rep.p_minus > kEmptyBranch) {
    rm = psi.tail(n) / std::sqrt(rep.p_minus);
    rep.f_minus = std::norm(t.minus.dot(rm));
  } else {
    rm = t.minus;
    rep.f_minus = 1.0;
  }
  rep.purity_plus = 1.0;
  rep.purity_minus = 1.0;
  rep.f_avg = rep.p_plus * rep.f_plus + rep.p_minus * rep.f_minus;
  rep.validate();

  HilbertLayout res_lay{n, false};
  EncodeOutcome out{std::move(rep),
                    QuantumState::pure({n, true}, std::move(psi)),
                    QuantumState::pure(res_lay, std::move(rp)),
                    QuantumState::pure(res_lay, std::move(rm)),
                    steps, drift, leakage};
  return out;
}

EncodeOutcome collapse_mixed(const BlochPoint& bloch, const CodeStates& code, MatrixXcd rho,
                             double phi_used, double wait_time, bool long_wait, long steps,
                             double drift, double leakage) {
  const int n = code.chi_plus.dim();
  Targets t = make_targets(code, bloch);

  ProtocolReport rep;
  rep.bloch = bloch;
  rep.backend = Backend::Lindblad;
  rep.p_plus = rho.topLeftCorner(n, n).real().trace();
  rep.p_minus = rho.bottomRightCorner(n, n).real().trace();
  rep.phi_used = phi_used;
  rep.wait_time = wait_time;
  rep.long_wait = long_wait;

  HilbertLayout res_lay{n, false};
  MatrixXcd bp, bm;
  if (rep.p_plus > kEmptyBranch) {
    bp = rho.topLeftCorner(n, n) / rep.p_plus;
    rep.f_plus = clamp01(std::real(t.plus.dot(bp * t.plus)));
    rep.purity_plus = clamp01(bp.cwiseProduct(bp.transpose()).sum().real());
  } else {
    bp = t.plus * t.plus.adjoint();
    rep.f_plus = 1.0;
    rep.purity_plus = 1.0;
  }
  if (rep.p_minus > kEmptyBranch) {
    bm = rho.bottomRightCorner(n, n) / rep.p_minus;
    rep.f_minus = clamp01(std::real(t.minus.dot(bm * t.minus)));
    rep.purity_minus = clamp01(bm.cwiseProduct(bm.transpose()).sum().real());
  } else {
    bm = t.minus * t.minus.adjoint();
    rep.f_minus = 1.0;
    rep.purity_minus = 1.0;
  }
  rep.f_avg = rep.p_plus * rep.f_plus + rep.p_minus * rep.f_minus;
  rep.validate();

  EncodeOutcome out{std::move(rep),
                    QuantumState::from_evolution({n, true}, std::move(rho)),
                    QuantumState::from_evolution(res_lay, std::move(bp)),
                    QuantumState::from_evolution(res_lay, std::move(bm)),
                    steps, drift, leakage};
  return out;
}

// Runs the input-independent part of the compensated sequence once (Hadamard,
// first gate, pi, second gate), caches the images of basis inputs, and turns
// a (bloch, phi_star) query into a report by applying the wait + pi + Hadamard
// tail and collapsing. Two modes: Basis caches |0>vac and |1>vac images (and
// the three independent density payloads under lindblad) so a whole sweep
// shares one propagation; Single propagates just the caller's input.
class CompensatedEngine {
 public:
  CompensatedEngine(const PhysicalParams& params, Backend backend, const BlochPoint* single)
      : p_(params), backend_(backend), dq_(derive(params)), n_(params.resonator_dim) {
    p_.validate();
    if (!(dq_.r_target > 0.0))
      throw Error(ErrorCode::DegenerateCode,
                  "encoding needs a nonzero squeeze target; g_d * epsilon * gate_time = 0 "
                  "collapses the code states onto the vacuum");
    dmag_ = std::abs(dq_.delta);
    if (!(dmag_ > 0.0))
      throw Error(ErrorCode::InconsistentParameters,
                  "compensation needs a nonzero dispersive detuning");
    if (backend_ == Backend::Lindblad) spec_ = lindblad_spec(p_);
    if (single) {
      single_ = *single;
      single_->validate();
    }
    prepare_stage();
  }

  // Builds the post-wait images for this compensation angle (idempotent per
  // angle). Must be called before outcome_at; outcome_at is then const and
  // thread-safe across points.
  void ensure_final(double phi_star) {
    if (have_final_ && phi_star == cached_phi_) return;
    if (!std::isfinite(phi_star))
      throw Error(ErrorCode::InconsistentParameters, "compensation angle must be finite");
    tau_ = compensation_wait_time(phi_star, dmag_);
    double resid = std::fmod(phi_star + dmag_ * tau_, kTwoPi);
    if (resid > M_PI) resid -= kTwoPi;
    if (resid < -M_PI) resid += kTwoPi;
    code_ = chi_states(dq_.r_target, p_.theta + 2.0 * resid, n_);
    long_wait_ = backend_ == Backend::Lindblad && spec_.kappa1 > 0.0 &&
                 tau_ > 10.0 / spec_.kappa1;
    if (backend_ == Backend::Lindblad) {
      for (std::size_t i = 0; i < stage_rho_.size(); ++i) {
        MatrixXcd r = stage_rho_[i];
        run_wait_mixed(r);
        rho_pi(r, n_);
        rho_hadamard(r, n_);
        final_rho_[i] = std::move(r);
      }
    } else {
      for (std::size_t i = 0; i < stage_ket_.size(); ++i) {
        if (stage_ket_[i].size() == 0) continue;
        VectorXcd v = stage_ket_[i];
        ket_branch0_rotation(v, n_, dmag_ * tau_);
        ket_pi(v, n_);
        ket_hadamard(v, n_);
        final_ket_[i] = std::move(v);
      }
    }
    cached_phi_ = phi_star;
    have_final_ = true;
  }

  EncodeOutcome outcome_at(const BlochPoint& bloch) const {
    if (!have_final_)
      throw Error(ErrorCode::InvalidState, "compensation angle not set before assembly");
    if (single_ && (bloch.theta_b != single_->theta_b || bloch.phi_b != single_->phi_b))
      throw Error(ErrorCode::InvalidState, "engine was prepared for a different input state");
    Complex a = bloch.alpha(), b = bloch.beta();
    if (backend_ == Backend::Lindblad) {
      MatrixXcd rho;
      if (single_) {
        rho = final_rho_[0];
      } else {
        Complex c01 = a * std::conj(b);
        rho = std::norm(a) * final_rho_[0] + std::norm(b) * final_rho_[2];
        rho.noalias() += c01 * final_rho_[1];
        rho.noalias() += (std::conj(c01) * final_rho_[1].adjoint()).eval();
      }
      return collapse_mixed(bloch, code_, std::move(rho), cached_phi_, tau_, long_wait_, steps_,
                            drift_, leakage_);
    }
    VectorXcd psi = single_ ? final_ket_[0] : VectorXcd(a * final_ket_[0] + b * final_ket_[1]);
    return collapse_pure(bloch, backend_, code_, std::move(psi), cached_phi_, tau_, long_wait_,
                         steps_, drift_, leakage_);
  }

  EncodeOutcome outcome(const BlochPoint& bloch, double phi_star) {
    ensure_final(phi_star);
    return outcome_at(bloch);
  }

  long steps() const { return steps_; }
  double drift() const { return drift_; }
  double leakage() const { return leakage_; }

 private:
  void absorb(long steps, double drift, double leakage) {
    steps_ += steps;
    drift_ = std::max(drift_, drift);
    leakage_ = std::max(leakage_, leakage);
  }

  void run_gate_pure(VectorXcd& psi, double theta_drive) {
    if (backend_ == Backend::Ideal) {
      OperatorMatrix s = squeeze(n_, SqueezeParams{dq_.r_target, theta_drive});
      psi.tail(n_) = s.mat * psi.tail(n_);
      ket_branch0_rotation(psi, n_, dq_.phi_analytic);
      return;
    }
    PhysicalParams ps = p_;
    ps.theta = theta_drive;
    EvolutionResult res = evolve_unitary(make_drive_frame_generator(ps),
                                         QuantumState::pure({n_, true}, psi), p_.gate_time,
                                         kSegmentTol);
    psi = res.final_state.vector();
    absorb(res.steps, res.max_trace_drift, res.max_leakage);
  }

  void run_gate_mixed(MatrixXcd& rho, double theta_drive) {
    PhysicalParams ps = p_;
    ps.theta = theta_drive;
    PropagationStats st{};
    rho = propagate_lindblad(rwa_hamiltonian(ps), spec_, std::move(rho), p_.gate_time,
                             kSegmentTol, &st);
    absorb(st.steps, st.max_trace_drift, st.max_leakage);
  }

  void run_wait_mixed(MatrixXcd& rho) {
    if (tau_ <= 0.0) return;
    PhysicalParams ps = p_;
    ps.epsilon = 0.0;  // drive off: bare dispersive rotation with decoherence
    PropagationStats st{};
    rho = propagate_lindblad(rwa_hamiltonian(ps), spec_, std::move(rho), tau_, kSegmentTol, &st);
    absorb(st.steps, st.max_trace_drift, st.max_leakage);
  }

  void prepare_stage() {
    if (backend_ == Backend::Lindblad) {
      if (single_) {
        VectorXcd psi = VectorXcd::Zero(2 * n_);
        psi(0) = single_->alpha();
        psi(n_) = single_->beta();
        MatrixXcd rho = psi * psi.adjoint();
        stage_rho_.push_back(run_stage_mixed(std::move(rho)));
      } else {
        const std::array<std::pair<int, int>, 3> basis{{{0, 0}, {0, 1}, {1, 1}}};
        for (auto [q, qp] : basis) {
          MatrixXcd rho = MatrixXcd::Zero(2 * n_, 2 * n_);
          rho(q * n_, qp * n_) = 1.0;
          stage_rho_.push_back(run_stage_mixed(std::move(rho)));
        }
      }
      final_rho_.resize(stage_rho_.size());
    } else {
      if (single_) {
        VectorXcd psi = VectorXcd::Zero(2 * n_);
        psi(0) = single_->alpha();
        psi(n_) = single_->beta();
        stage_ket_.push_back(run_stage_pure(std::move(psi)));
      } else {
        for (int q : {0, 1}) {
          VectorXcd psi = VectorXcd::Zero(2 * n_);
          psi(q * n_) = 1.0;
          stage_ket_.push_back(run_stage_pure(std::move(psi)));
        }
      }
      final_ket_.resize(stage_ket_.size());
    }
  }

  VectorXcd run_stage_pure(VectorXcd psi) {
    ket_hadamard(psi, n_);
    run_gate_pure(psi, p_.theta + M_PI);
    ket_pi(psi, n_);
    run_gate_pure(psi, p_.theta);
    return psi;
  }

  MatrixXcd run_stage_mixed(MatrixXcd rho) {
    rho_hadamard(rho, n_);
    run_gate_mixed(rho, p_.theta + M_PI);
    rho_pi(rho, n_);
    run_gate_mixed(rho, p_.theta);
    return rho;
  }

  PhysicalParams p_;
  Backend backend_;
  DerivedQuantities dq_;
  int n_ = 0;
  double dmag_ = 0.0;
  LindbladSpec spec_{};
  std::optional<BlochPoint> single_;

  std::vector<VectorXcd> stage_ket_;  // basis: images of |0>vac, |1>vac
  std::vector<MatrixXcd> stage_rho_;  // basis: images of E00, E01, E11
  std::vector<VectorXcd> final_ket_;
  std::vector<MatrixXcd> final_rho_;
  CodeStates code_{QuantumState::pure({1, false}, VectorXcd::Ones(1)),
                   QuantumState::pure({1, false}, VectorXcd::Ones(1))};
  bool have_final_ = false;
  double cached_phi_ = 0.0;
  double tau_ = 0.0;
  bool long_wait_ = false;

  long steps_ = 0;
  double drift_ = 0.0;
  double leakage_ = 0.0;
};

}  // namespace

Complex BlochPoint::alpha() const { return Complex(std::cos(0.5 * theta_b), 0.0); }

Complex BlochPoint::beta() const { return std::polar(std::sin(0.5 * theta_b), phi_b); }

double BlochPoint::p_z() const { return std::norm(alpha()) - std::norm(beta()); }

void BlochPoint::validate() const {
  if (!std::isfinite(theta_b) || !std::isfinite(phi_b))
    throw Error(ErrorCode::InconsistentParameters, "Bloch angles must be finite");
}

void ProtocolReport::validate() const {
  if (std::abs(p_plus + p_minus - 1.0) > 1e-8)
    throw Error(ErrorCode::InvalidState,
                "outcome probabilities sum to " + std::to_string(p_plus + p_minus));
  for (double v : {p_plus, p_minus, f_plus, f_minus, f_avg, purity_plus, purity_minus}) {
    if (!(v >= -1e-8) || !(v <= 1.0 + 1e-8))
      throw Error(ErrorCode::InvalidState, "report value out of range: " + std::to_string(v));
  }
  if (!std::isfinite(phi_used) || !std::isfinite(wait_time) || wait_time < 0.0)
    throw Error(ErrorCode::InvalidState, "invalid compensation bookkeeping");
}

CodeStates chi_states(double r, double theta_tilde, int dim) {
  HilbertLayout lay{dim, false};
  lay.validate();
  if (!(r > 0.0))
    throw Error(ErrorCode::DegenerateCode,
                "r must be positive: at r = 0 the two squeezed vacua coincide and the odd "
                "code state vanishes");
  VectorXcd sv1 = squeeze(dim, SqueezeParams{r, theta_tilde}).mat.col(0);
  VectorXcd sv2 = squeeze(dim, SqueezeParams{r, theta_tilde + M_PI}).mat.col(0);
  double s = 1.0 / std::sqrt(std::cosh(2.0 * r));
  double cp = std::sqrt(1.0 + s), cm = std::sqrt(1.0 - s);
  VectorXcd plus = (sv1 + sv2) / (std::sqrt(2.0) * cp);
  VectorXcd minus = (sv1 - sv2) / (std::sqrt(2.0) * cm);
  plus /= plus.norm();    // truncation tail shaves a little norm off the
  minus /= minus.norm();  // analytic combination; c_plus/c_minus stay exact
  return CodeStates{QuantumState::pure(lay, std::move(plus)),
                    QuantumState::pure(lay, std::move(minus)),
                    cp,
                    cm,
                    r,
                    theta_tilde};
}

double average_fidelity_exact(double r, double p_z) {
  if (!(std::abs(p_z) <= 1.0))
    throw Error(ErrorCode::InconsistentParameters,
                "p_z must lie in [-1, 1], got " + std::to_string(p_z));
  if (!(r >= 0.0))
    throw Error(ErrorCode::InconsistentParameters, "r must be nonnegative");
  double pz2 = p_z * p_z;
  return 0.5 * (1.0 + pz2) + 0.5 * (1.0 - pz2) * std::sqrt(1.0 - 1.0 / std::cosh(2.0 * r));
}

double compensation_wait_time(double phi, double delta_magnitude) {
  if (!(delta_magnitude > 0.0))
    throw Error(ErrorCode::InconsistentParameters,
                "wait time needs a positive detuning magnitude");
  if (!std::isfinite(phi))
    throw Error(ErrorCode::InconsistentParameters, "compensation angle must be finite");
  double m = std::fmod(phi, kTwoPi);
  if (m < 0.0) m += kTwoPi;
  if (m <= 1e-12 || kTwoPi - m <= 1e-12) return 0.0;  // already compensated
  return (kTwoPi - m) / delta_magnitude;
}

EncodeOutcome ideal_encode(const BlochPoint& bloch, double r, double theta, int dim) {
  bloch.validate();
  CodeStates code = chi_states(r, theta, dim);
  VectorXcd psi = VectorXcd::Zero(2 * dim);
  psi(0) = bloch.alpha();
  psi(dim) = bloch.beta();
  ket_hadamard(psi, dim);
  psi.tail(dim) = squeeze(dim, SqueezeParams{r, theta + M_PI}).mat * psi.tail(dim);
  ket_pi(psi, dim);
  psi.tail(dim) = squeeze(dim, SqueezeParams{r, theta}).mat * psi.tail(dim);
  ket_pi(psi, dim);
  ket_hadamard(psi, dim);
  return collapse_pure(bloch, Backend::Ideal, code, std::move(psi), 0.0, 0.0, false, 0, 0.0, 0.0);
}

EncodeOutcome compensated_encode(const BlochPoint& bloch, const PhysicalParams& params,
                                 double phi_star, Backend backend) {
  bloch.validate();
  CompensatedEngine engine(params, backend, &bloch);
  return engine.outcome(bloch, phi_star);
}

OptimizationResult optimize_compensation_angle(const PhysicalParams& params, Backend backend,
                                               const BlochPoint& probe) {
  probe.validate();
  CompensatedEngine engine(params, backend, &probe);
  DerivedQuantities dq = derive(params);

  OptimizationResult out;
  out.phi_analytic = dq.phi_analytic;
  const double lo = dq.phi_analytic - M_PI;
  const double hi = dq.phi_analytic + M_PI;

  auto f_at = [&](double phi) {
    ++out.evaluations;
    return engine.outcome(probe, phi).report.f_avg;
  };

  constexpr int kGrid = 41;
  std::array<double, kGrid> phis{}, fs{};
  for (int i = 0; i < kGrid; ++i) {
    phis[i] = lo + (hi - lo) * i / (kGrid - 1);
    fs[i] = f_at(phis[i]);
  }
  auto max_it = std::max_element(fs.begin(), fs.end());
  double fmax = *max_it;
  double fmin = *std::min_element(fs.begin(), fs.end());

  if (fmax - fmin < 1e-8) {
    out.degenerate = true;
    out.phi_star = dq.phi_analytic;
    out.f_at_star = f_at(out.phi_star);
    return out;
  }

  // Local maxima close to the global one; the lossless landscape is
  // pi-periodic, so twin peaks inside the 2pi window are the normal case.
  std::vector<int> peaks;
  for (int i = 0; i < kGrid; ++i) {
    bool up = i == 0 || fs[i] > fs[i - 1];
    bool down = i == kGrid - 1 || fs[i] > fs[i + 1];
    if (up && down && fs[i] >= fmax - 1e-3) peaks.push_back(i);
  }
  out.multimodal = peaks.size() > 1;
  int best = peaks.empty() ? int(max_it - fs.begin()) : peaks.front();
  for (int i : peaks)
    if (std::abs(phis[i] - dq.phi_analytic) < std::abs(phis[best] - dq.phi_analytic)) best = i;

  double a = phis[std::max(0, best - 1)];
  double b = phis[std::min(kGrid - 1, best + 1)];
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f_at(x1), f2 = f_at(x2);
  while (b - a > 1e-3) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f_at(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f_at(x1);
    }
  }
  out.phi_star = 0.5 * (a + b);
  out.f_at_star = f_at(out.phi_star);
  return out;
}

SweepResult bloch_sweep(const PhysicalParams& params, const SweepGrid& grid, double phi_star,
                        Backend backend, int jobs) {
  if (grid.theta_b.empty() || grid.phi_b.empty())
    throw Error(ErrorCode::ConfigError, "sweep grid must have at least one angle per axis");
  if (jobs < 1) throw Error(ErrorCode::ConfigError, "jobs must be >= 1");

  CompensatedEngine engine(params, backend, nullptr);
  engine.ensure_final(phi_star);

  const std::size_t nt = grid.theta_b.size(), np = grid.phi_b.size();
  SweepResult res;
  res.entries.resize(nt * np);

  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      BlochPoint bp{grid.theta_b[k / np], grid.phi_b[k % np]};
      SweepEntry& entry = res.entries[k];
      entry.report.bloch = bp;
      try {
        entry.report = engine.outcome_at(bp).report;
        entry.ok = true;
      } catch (const std::exception& e) {
        entry.ok = false;
        entry.error = e.what();
      }
    }
  };

  const std::size_t total = nt * np;
  const std::size_t workers = std::min<std::size_t>(jobs, total);
  if (workers <= 1) {
    run_range(0, total);
  } else {
    std::vector<std::future<void>> futs;
    std::size_t chunk = (total + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t begin = w * chunk, end = std::min(total, begin + chunk);
      if (begin >= end) break;
      futs.push_back(std::async(std::launch::async, run_range, begin, end));
    }
    for (auto& f : futs) f.get();
  }

  res.steps = engine.steps();
  res.max_trace_drift = engine.drift();
  res.max_leakage = engine.leakage();
  return res;
}

}  // namespace csq

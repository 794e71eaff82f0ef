#include "csq/model.hpp"

#include <cmath>

namespace csq {

namespace {

double bose_occupation(double omega, double temperature) {
  if (temperature <= 0.0) return 0.0;
  double x = omega / (kBoltzmannOverHbar * temperature);
  if (x > 700.0) return 0.0;
  return 1.0 / std::expm1(x);
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InconsistentParameters, what);
}

}  // namespace

double PhysicalParams::resolved_omega_d() const {
  return omega_d ? *omega_d : 2.0 * (omega - chi);
}

void PhysicalParams::validate() const {
  require(omega > 0.0, "resonator frequency must be positive");
  require(omega_q > 0.0, "qubit frequency must be positive");
  require(chi > 0.0, "dispersive shift must be positive");
  require(g_d > 0.0, "drive coupling must be positive");
  require(epsilon >= 0.0 && epsilon < 1.0, "drive amplitude must satisfy 0 <= eps < 1");
  require(!omega_d || *omega_d > 0.0, "drive frequency must be positive");
  require(gate_time > 0.0, "gate time must be positive");
  require(temperature >= 0.0, "temperature must be non-negative");
  require(tau_r > 0.0 && tau_q > 0.0 && tau_phi > 0.0, "decay times must be positive");
  require(std::isfinite(theta), "drive phase must be finite");
  require(std::isfinite(kerr_k), "Kerr coefficient must be finite");
  if (resonator_dim < 2)
    throw Error(ErrorCode::InvalidDimension, "resonator truncation must be at least 2");
}

PhysicalParams reference_params() {
  PhysicalParams p;
  p.omega = 2.0 * M_PI * 6.0;
  p.omega_q = 2.0 * M_PI * 4.0;
  p.chi = 2.0 * M_PI * 0.008;
  p.g_d = 0.05;
  p.epsilon = 0.15;
  p.theta = 0.0;
  p.gate_time = 200.0;
  p.temperature = 0.060;
  p.tau_r = 200000.0;
  p.tau_q = 200000.0;
  p.tau_phi = 10000.0;
  p.resonator_dim = 90;
  return p;
}

DerivedQuantities derive(const PhysicalParams& p) {
  p.validate();
  DerivedQuantities d;
  d.omega_bar_0 = p.omega + p.chi;
  d.omega_bar_1 = p.omega - p.chi;
  d.delta = -2.0 * p.chi;  // omega_bar_1 - omega_bar_0, without the cancellation
  double ratio = p.g_d * p.epsilon / d.delta;
  d.delta_tilde = d.delta * (1.0 - 0.5 * ratio * ratio);
  d.r_target = p.g_d * p.epsilon * p.gate_time;
  d.phi_analytic = std::abs(d.delta_tilde) * p.gate_time;
  d.perturbative = std::abs(ratio) < 0.2;
  return d;
}

namespace {

MatrixXcd kerr_term(const PhysicalParams& p) {
  MatrixXcd k = MatrixXcd::Zero(p.resonator_dim, p.resonator_dim);
  for (int m = 0; m < p.resonator_dim; ++m)
    k(m, m) = 0.5 * p.kerr_k * m * (m - 1.0);
  return k;
}

}  // namespace

OperatorMatrix lab_hamiltonian(const PhysicalParams& p, double t) {
  p.validate();
  const int n = p.resonator_dim;
  MatrixXcd a = annihilation(n);
  MatrixXcd num = number_operator(n);
  MatrixXcd x = a + a.adjoint();
  Matrix2cd sz = Matrix2cd::Zero();
  sz(0, 0) = 1.0;
  sz(1, 1) = -1.0;
  Matrix2cd id2 = Matrix2cd::Identity();

  double drive = p.g_d * p.epsilon * std::sin(p.resolved_omega_d() * t - p.theta);
  MatrixXcd res = p.omega * num + drive * (x * x).eval() + kerr_term(p);
  MatrixXcd h = tensor(0.5 * p.omega_q * sz, MatrixXcd::Identity(n, n)) +
                tensor(id2, res) + tensor(sz, p.chi * num);
  return OperatorMatrix{HilbertLayout{n, true}, std::move(h)};
}

namespace {

MatrixXcd squeeze_generator_block(const PhysicalParams& p) {
  const int n = p.resonator_dim;
  MatrixXcd a = annihilation(n);
  MatrixXcd a2 = (a * a).eval();
  Complex phase = std::exp(Complex(0.0, p.theta));
  return Complex(0.0, 0.5) * p.g_d * p.epsilon *
         (std::conj(phase) * a2 - phase * a2.adjoint());
}

}  // namespace

OperatorMatrix rwa_hamiltonian(const PhysicalParams& p) {
  p.validate();
  const int n = p.resonator_dim;
  DerivedQuantities d = derive(p);
  Matrix2cd p0 = Matrix2cd::Zero();
  p0(0, 0) = 1.0;
  Matrix2cd p1 = Matrix2cd::Zero();
  p1(1, 1) = 1.0;
  MatrixXcd h = tensor(p1, squeeze_generator_block(p)) +
                tensor(p0, std::abs(d.delta_tilde) * number_operator(n));
  if (p.kerr_k != 0.0) h += tensor(Matrix2cd::Identity(), kerr_term(p));
  return OperatorMatrix{HilbertLayout{n, true}, std::move(h)};
}

OperatorMatrix drive_frame_hamiltonian(const PhysicalParams& p, double t) {
  p.validate();
  const int n = p.resonator_dim;
  DerivedQuantities d = derive(p);
  MatrixXcd a = annihilation(n);
  MatrixXcd a2 = (a * a).eval();
  MatrixXcd num = number_operator(n);
  Matrix2cd p0 = Matrix2cd::Zero();
  p0(0, 0) = 1.0;

  double s = p.g_d * p.epsilon * std::sin(p.resolved_omega_d() * t - p.theta);
  Complex frame = std::exp(Complex(0.0, -2.0 * d.omega_bar_1 * t));
  MatrixXcd drive = -frame * a2 - std::conj(frame) * a2.adjoint() +
                    2.0 * num + MatrixXcd::Identity(n, n);
  MatrixXcd h = tensor(p0, std::abs(d.delta) * num) +
                tensor(Matrix2cd::Identity(), (s * drive).eval());
  if (p.kerr_k != 0.0) h += tensor(Matrix2cd::Identity(), kerr_term(p));
  return OperatorMatrix{HilbertLayout{n, true}, std::move(h)};
}

GeneratorFn make_drive_frame_generator(const PhysicalParams& p) {
  p.validate();
  DerivedQuantities d = derive(p);
  const int n = p.resonator_dim;
  const double abs_delta = std::abs(d.delta);
  const double gde = p.g_d * p.epsilon;
  const double w1 = d.omega_bar_1;
  const double wd = p.resolved_omega_d();
  const double theta = p.theta;
  const double kerr = p.kerr_k;
  return [n, abs_delta, gde, w1, wd, theta, kerr](double t, const VectorXcd& psi,
                                                  VectorXcd& out) {
    if (psi.size() != 2 * n)
      throw Error(ErrorCode::LayoutMismatch, "generator expects a joint qubit-resonator vector");
    out.resize(2 * n);
    const double s = gde * std::sin(wd * t - theta);
    const Complex down = -s * std::exp(Complex(0.0, -2.0 * w1 * t));  // a^2 band
    const Complex up = std::conj(down);                               // adag^2 band
    for (int q = 0; q < 2; ++q) {
      const int base = q * n;
      for (int m = 0; m < n; ++m) {
        Complex acc = (s * (2.0 * m + 1.0) + 0.5 * kerr * m * (m - 1.0)) * psi[base + m];
        if (q == 0) acc += abs_delta * m * psi[base + m];
        if (m + 2 < n) acc += down * std::sqrt((m + 1.0) * (m + 2.0)) * psi[base + m + 2];
        if (m >= 2) acc += up * std::sqrt(m * (m - 1.0)) * psi[base + m - 2];
        out[base + m] = Complex(0.0, -1.0) * acc;
      }
    }
  };
}

KerrEstimates kerr_estimates(const PhysicalParams& p,
                             const std::optional<SquidResonatorGeometry>& geometry,
                             const QubitExtras& extras) {
  p.validate();
  KerrEstimates out;
  if (geometry) {
    geometry->validate();
    out.k_squid_ratio = squid_kerr_ratio(*geometry, geometry->flux_bias);
  }
  require(extras.e_cq > 0.0, "qubit capacitive energy must be positive");
  double delta_q = extras.delta_q ? *extras.delta_q : p.omega_q - p.omega;
  double chi_signed = extras.chi_signed ? *extras.chi_signed : -p.chi;
  require(delta_q != 0.0, "qubit-resonator detuning must be nonzero");
  double radicand = -chi_signed * delta_q * (delta_q - extras.e_cq) / extras.e_cq;
  if (radicand < 0.0)
    throw Error(ErrorCode::InconsistentParameters,
                "dispersive coupling radicand is negative; the signs of the "
                "dispersive shift and qubit detuning are inconsistent");
  out.g_q = std::sqrt(radicand);
  double ratio = out.g_q / delta_q;
  out.k_qubit_ratio = -0.5 * extras.e_cq * ratio * ratio * ratio * ratio / p.omega;
  return out;
}

std::vector<RegimeCheck> validate_regimes(const PhysicalParams& p,
                                          const std::optional<QubitExtras>& extras) {
  // Report-only: malformed values fail their rows instead of throwing.
  std::vector<RegimeCheck> rows;
  auto add = [&rows](const char* name, double value, double threshold) {
    rows.push_back({name, value, threshold, value < threshold});
  };

  double abs_delta = 2.0 * p.chi;
  add("drive_to_detuning", std::abs(p.g_d * p.epsilon / abs_delta), 0.1);

  if (extras) {
    RegimeCheck row{"qubit_dispersive", std::nan(""), 0.3, false};
    try {
      KerrEstimates k = kerr_estimates(p, std::nullopt, *extras);
      double delta_q = extras->delta_q ? *extras->delta_q : p.omega_q - p.omega;
      row.value = std::abs(k.g_q / delta_q);
      row.pass = row.value < row.threshold;
    } catch (const Error&) {
      // leave the NaN / fail marker
    }
    rows.push_back(std::move(row));
  }

  double r = p.g_d * p.epsilon * p.gate_time;
  double sh = std::sinh(r);
  add("squeeze_truncation", sh * sh, p.resonator_dim / 6.0);
  add("resonator_thermal_occupation", bose_occupation(p.omega, p.temperature), 0.1);
  add("qubit_thermal_occupation", bose_occupation(p.omega_q, p.temperature), 0.1);
  return rows;
}

}  // namespace csq

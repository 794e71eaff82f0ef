#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csq/gates.hpp"
#include "csq/model.hpp"
#include "test_util.hpp"

using namespace csq;
using csqtest::max_abs;

namespace {

Matrix2cd proj(int q) {
  Matrix2cd p = Matrix2cd::Zero();
  p(q, q) = 1.0;
  return p;
}

// Uniform average of a periodic matrix-valued function over one drive
// period; with 16 nodes it is exact for the few harmonics present.
MatrixXcd period_average(const PhysicalParams& p,
                         OperatorMatrix (*ham)(const PhysicalParams&, double)) {
  double period = 2.0 * M_PI / p.resolved_omega_d();
  MatrixXcd acc;
  const int nodes = 16;
  for (int j = 0; j < nodes; ++j) {
    MatrixXcd h = ham(p, j * period / nodes).mat;
    acc = (j == 0) ? h : MatrixXcd(acc + h);
  }
  return acc / double(nodes);
}

}  // namespace

TEST_CASE("derived quantities reproduce the reference point") {
  PhysicalParams p = reference_params();
  DerivedQuantities d = derive(p);

  CHECK(d.omega_bar_0 == doctest::Approx(p.omega + p.chi).epsilon(1e-15));
  CHECK(d.omega_bar_1 == doctest::Approx(p.omega - p.chi).epsilon(1e-15));
  CHECK(d.delta == doctest::Approx(-2.0 * p.chi).epsilon(1e-15));
  CHECK(std::abs(d.delta) == doctest::Approx(0.10053096491487339).epsilon(1e-13));
  CHECK(d.r_target == doctest::Approx(1.5).epsilon(1e-13));
  CHECK(std::abs(p.g_d * p.epsilon / d.delta) ==
        doctest::Approx(0.07460387957432593).epsilon(1e-13));
  CHECK(d.phi_analytic == doctest::Approx(20.05024007329393).epsilon(1e-13));
  CHECK(std::abs(d.delta) * p.gate_time == doctest::Approx(20.106192982974676).epsilon(1e-13));
  CHECK(d.perturbative);

  SUBCASE("linear in gate time") {
    p.gate_time = 400.0;
    DerivedQuantities d2 = derive(p);
    CHECK(d2.r_target == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(d2.phi_analytic == doctest::Approx(2.0 * d.phi_analytic).epsilon(1e-13));
    CHECK(d2.delta_tilde == doctest::Approx(d.delta_tilde).epsilon(1e-15));
  }

  SUBCASE("zero drive") {
    p.epsilon = 0.0;
    DerivedQuantities d0 = derive(p);
    CHECK(d0.delta_tilde == d0.delta);
    CHECK(d0.r_target == 0.0);
    CHECK(d0.phi_analytic == doctest::Approx(std::abs(d0.delta) * p.gate_time));
  }
}

TEST_CASE("parameter validation rejects malformed records") {
  auto expect_throw = [](PhysicalParams p, ErrorCode code) {
    try {
      p.validate();
      FAIL("expected a validation error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };

  PhysicalParams p = reference_params();
  CHECK_NOTHROW(p.validate());

  p = reference_params();
  p.chi = 0.0;
  expect_throw(p, ErrorCode::InconsistentParameters);
  p = reference_params();
  p.epsilon = 1.0;
  expect_throw(p, ErrorCode::InconsistentParameters);
  p = reference_params();
  p.epsilon = -0.1;
  expect_throw(p, ErrorCode::InconsistentParameters);
  p = reference_params();
  p.tau_phi = 0.0;
  expect_throw(p, ErrorCode::InconsistentParameters);
  p = reference_params();
  p.temperature = -0.01;
  expect_throw(p, ErrorCode::InconsistentParameters);
  p = reference_params();
  p.omega_d = -1.0;
  expect_throw(p, ErrorCode::InconsistentParameters);
  p = reference_params();
  p.resonator_dim = 1;
  expect_throw(p, ErrorCode::InvalidDimension);
}

TEST_CASE("drive frequency defaults to the parametric resonance condition") {
  PhysicalParams p = reference_params();
  CHECK(p.resolved_omega_d() == doctest::Approx(2.0 * (p.omega - p.chi)).epsilon(1e-15));
  p.omega_d = 70.0;
  CHECK(p.resolved_omega_d() == 70.0);
}

TEST_CASE("lab hamiltonian matches its closed forms") {
  PhysicalParams p = reference_params();
  p.resonator_dim = 40;
  p.theta = 0.7;

  SUBCASE("hermitian at arbitrary times") {
    for (double t : {0.0, 13.37, 177.7}) {
      MatrixXcd h = lab_hamiltonian(p, t).mat;
      CHECK(max_abs(h - h.adjoint()) < 1e-12);
    }
  }

  SUBCASE("undriven diagonal") {
    PhysicalParams q = p;
    q.epsilon = 0.0;
    MatrixXcd h = lab_hamiltonian(q, 5.0).mat;
    const int n = q.resonator_dim;
    for (int m : {0, 3, 7}) {
      CHECK(std::real(h(m, m)) ==
            doctest::Approx(0.5 * q.omega_q + (q.omega + q.chi) * m).epsilon(1e-14));
      CHECK(std::real(h(n + m, n + m)) ==
            doctest::Approx(-0.5 * q.omega_q + (q.omega - q.chi) * m).epsilon(1e-14));
    }
    MatrixXcd off = h;
    off.diagonal().setZero();
    CHECK(max_abs(off) == 0.0);
  }

  SUBCASE("drive block at the sine peak") {
    double t_peak = (p.theta + 0.5 * M_PI) / p.resolved_omega_d();
    MatrixXcd h = lab_hamiltonian(p, t_peak).mat;
    PhysicalParams q = p;
    q.epsilon = 0.0;
    MatrixXcd h0 = lab_hamiltonian(q, t_peak).mat;
    MatrixXcd a = annihilation(p.resonator_dim);
    MatrixXcd x = a + a.adjoint();
    MatrixXcd expected = p.g_d * p.epsilon *
                         tensor(Matrix2cd::Identity(), (x * x).eval());
    CHECK(max_abs(h - h0 - expected) < 1e-12);
  }

  SUBCASE("drive averages out over a period") {
    PhysicalParams q = p;
    q.epsilon = 0.0;
    MatrixXcd avg = period_average(p, &lab_hamiltonian);
    CHECK(max_abs(avg - lab_hamiltonian(q, 0.0).mat) < 1e-10);
  }
}

TEST_CASE("rwa hamiltonian branch structure") {
  PhysicalParams p = reference_params();
  p.theta = 1.1;
  const int n = p.resonator_dim;
  MatrixXcd h = rwa_hamiltonian(p).mat;
  DerivedQuantities d = derive(p);

  CHECK(max_abs(h - h.adjoint()) < 1e-12);
  // the squeeze generator has no diagonal on the |1> branch
  for (int m = 0; m < n; ++m) CHECK(std::abs(h(n + m, n + m)) == 0.0);
  // cross-branch blocks vanish
  CHECK(max_abs(h.block(0, n, n, n)) == 0.0);

  SUBCASE("zero drive leaves a pure rotation generator") {
    PhysicalParams q = p;
    q.epsilon = 0.0;
    MatrixXcd h0 = rwa_hamiltonian(q).mat;
    CHECK(max_abs(h0.block(n, n, n, n)) == 0.0);
    MatrixXcd expected = std::abs(d.delta) * number_operator(n);
    CHECK(max_abs(h0.block(0, 0, n, n) - expected) < 1e-14);
  }

  SUBCASE("gate-time exponential equals the controlled squeeze") {
    MatrixXcd u = operator_exponential(Complex(0.0, -1.0) * p.gate_time * h);
    OperatorMatrix cs =
        controlled_squeeze(n, SqueezeParams{d.r_target, p.theta}, d.phi_analytic);

    // |1> branch: identical generators, so the blocks agree to roundoff
    CHECK(max_abs(u.block(n, n, n, n) - cs.mat.block(n, n, n, n)) < 1e-10);
    // |0> branch: scaling-and-squaring vs the exact diagonal
    CHECK(max_abs(u.block(0, 0, n, n) - cs.mat.block(0, 0, n, n)) < 1e-9);

    VectorXcd coh = csqtest::coherent_coeffs(n, Complex(0.8, -0.3));
    for (int q = 0; q < 2; ++q) {
      VectorXcd lifted = VectorXcd::Zero(2 * n);
      lifted.segment(q * n, n) = coh;
      VectorXcd via_exp = u * lifted;
      VectorXcd via_gates = cs.mat * lifted;
      CHECK(std::norm(via_gates.dot(via_exp)) > 1.0 - 1e-8);
    }
  }
}

TEST_CASE("drive frame hamiltonian averages to the squeeze generator") {
  PhysicalParams p = reference_params();
  p.resonator_dim = 30;
  p.theta = 0.7;
  const int n = p.resonator_dim;
  DerivedQuantities d = derive(p);

  for (double t : {0.0, 3.21, 99.9}) {
    MatrixXcd h = drive_frame_hamiltonian(p, t).mat;
    CHECK(max_abs(h - h.adjoint()) < 1e-12);
  }

  MatrixXcd avg = period_average(p, &drive_frame_hamiltonian);
  MatrixXcd a = annihilation(n);
  MatrixXcd a2 = (a * a).eval();
  Complex phase = std::exp(Complex(0.0, p.theta));
  MatrixXcd secular =
      tensor(proj(0), (std::abs(d.delta) * number_operator(n)).eval()) +
      tensor(Matrix2cd::Identity(),
             MatrixXcd(Complex(0.0, 0.5) * p.g_d * p.epsilon *
                       (std::conj(phase) * a2 - phase * a2.adjoint())));
  CHECK(max_abs(avg - secular) < 1e-12);
}

TEST_CASE("drive frame generator matches the matrix form") {
  PhysicalParams p = reference_params();
  p.resonator_dim = 40;
  p.theta = 0.4;
  p.kerr_k = 3e-4;  // exercise the optional diagonal too
  GeneratorFn gen = make_drive_frame_generator(p);

  VectorXcd psi = csqtest::random_unit_vector(2 * p.resonator_dim, 901);
  for (double t : {0.0, 37.3, 123.456}) {
    MatrixXcd h = drive_frame_hamiltonian(p, t).mat;
    VectorXcd expected = Complex(0.0, -1.0) * (h * psi);
    VectorXcd got;
    gen(t, psi, got);
    CHECK(max_abs(got - expected) < 1e-12);
  }

  VectorXcd wrong(p.resonator_dim);
  wrong.setZero();
  VectorXcd out;
  CHECK_THROWS_AS(gen(0.0, wrong, out), Error);
}

TEST_CASE("kerr estimates") {
  PhysicalParams p = reference_params();

  SUBCASE("qubit channel at the reference point") {
    KerrEstimates k = kerr_estimates(p);
    CHECK_FALSE(k.k_squid_ratio.has_value());
    CHECK(k.g_q == doctest::Approx(3.008939531451677).epsilon(1e-13));
    CHECK(k.k_qubit_ratio == doctest::Approx(-4.108888888888889e-5).epsilon(1e-13));
  }

  SUBCASE("sign mismatch is rejected") {
    QubitExtras extras;
    extras.chi_signed = p.chi;  // positive pull with a negative detuning
    try {
      kerr_estimates(p, std::nullopt, extras);
      FAIL("expected an inconsistent-parameters error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InconsistentParameters);
    }
  }

  SUBCASE("boundary-circuit channel from a toy geometry") {
    SquidResonatorGeometry g;
    g.l0 = 1.0;
    g.c0 = 1.0;
    g.d = 1.0;
    g.cj = 1e-3;
    g.ej = 50.0;  // sigma = 1/(2*50) = 1e-2
    KerrEstimates k = kerr_estimates(p, g);
    REQUIRE(k.k_squid_ratio.has_value());
    CHECK(*k.k_squid_ratio == doctest::Approx(7.853981633974483e-7).epsilon(1e-13));
    CHECK(*k.k_squid_ratio <= 1e-5);

    g.ej = 1e12;  // stiff junction limit
    KerrEstimates k2 = kerr_estimates(p, g);
    CHECK(std::abs(*k2.k_squid_ratio) < 1e-30);
  }
}

TEST_CASE("regime report") {
  PhysicalParams p = reference_params();

  SUBCASE("reference point passes everything") {
    auto rows = validate_regimes(p, QubitExtras{});
    REQUIRE(rows.size() == 5);
    for (const auto& row : rows) {
      CAPTURE(row.check);
      CHECK(row.pass);
    }
    CHECK(rows[0].check == "drive_to_detuning");
    CHECK(rows[0].value == doctest::Approx(0.07460387957432593).epsilon(1e-13));
    CHECK(rows[1].check == "qubit_dispersive");
    CHECK(rows[1].value == doctest::Approx(0.23944379994757295).epsilon(1e-13));
    CHECK(rows[2].check == "squeeze_truncation");
    CHECK(rows[2].value == doctest::Approx(4.533830997888882).epsilon(1e-13));
    CHECK(rows[2].threshold == doctest::Approx(15.0));
    CHECK(rows[3].value == doctest::Approx(0.008304373388862).epsilon(1e-12));
    CHECK(rows[4].value == doctest::Approx(0.042516728922542386).epsilon(1e-12));
  }

  SUBCASE("no dispersive row without qubit extras") {
    auto rows = validate_regimes(p);
    REQUIRE(rows.size() == 4);
    for (const auto& row : rows) CHECK(row.check != "qubit_dispersive");
  }

  SUBCASE("shallow truncation fails the headroom check") {
    p.resonator_dim = 10;
    auto rows = validate_regimes(p);
    bool found = false;
    for (const auto& row : rows)
      if (row.check == "squeeze_truncation") {
        found = true;
        CHECK_FALSE(row.pass);
        CHECK(row.value == doctest::Approx(4.533830997888882).epsilon(1e-12));
      }
    CHECK(found);
  }

  SUBCASE("zero drive passes trivially") {
    p.epsilon = 0.0;
    auto rows = validate_regimes(p);
    CHECK(rows[0].value == 0.0);
    CHECK(rows[0].pass);
  }

  SUBCASE("inconsistent extras mark the row instead of throwing") {
    QubitExtras extras;
    extras.chi_signed = p.chi;
    std::vector<RegimeCheck> rows;
    CHECK_NOTHROW(rows = validate_regimes(p, extras));
    REQUIRE(rows.size() == 5);
    CHECK(rows[1].check == "qubit_dispersive");
    CHECK_FALSE(rows[1].pass);
    CHECK(std::isnan(rows[1].value));
  }
}

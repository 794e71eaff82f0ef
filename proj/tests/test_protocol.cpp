#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "csq/hilbert.hpp"

#include "csq/gates.hpp"
#include "csq/model.hpp"
#include "csq/protocol.hpp"
#include "test_util.hpp"

using namespace csq;
using csqtest::max_abs;
using csqtest::squeezed_vacuum_coeffs;

namespace {

PhysicalParams small_params(int dim, double eps, double gate_time = 200.0) {
  PhysicalParams p = reference_params();
  p.resonator_dim = dim;
  p.epsilon = eps;
  p.gate_time = gate_time;
  return p;
}

double off_support(const VectorXcd& v, int residue) {
  double worst = 0.0;
  for (int n = 0; n < v.size(); ++n)
    if (n % 4 != residue) worst = std::max(worst, std::abs(v(n)));
  return worst;
}

}  // namespace

TEST_CASE("bloch point parameterization") {
  BlochPoint pole{0.0, 0.0};
  CHECK(pole.alpha() == Complex(1.0, 0.0));
  CHECK(std::abs(pole.beta()) == 0.0);
  CHECK(pole.p_z() == doctest::Approx(1.0).epsilon(1e-14));

  BlochPoint bottom{M_PI, 0.7};
  CHECK(std::abs(bottom.alpha()) < 1e-15);
  CHECK(std::abs(bottom.beta()) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(bottom.p_z() == doctest::Approx(-1.0).epsilon(1e-14));

  BlochPoint eq{M_PI / 2.0, 1.2};
  CHECK(std::norm(eq.alpha()) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(std::norm(eq.beta()) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(std::arg(eq.beta()) == doctest::Approx(1.2).epsilon(1e-13));

  for (double tb : {0.0, 0.4, 1.3, 2.2, M_PI}) {
    BlochPoint bp{tb, 0.9};
    CHECK(std::abs(std::norm(bp.alpha()) + std::norm(bp.beta()) - 1.0) < 1e-12);
  }

  try {
    BlochPoint bad{std::nan(""), 0.0};
    bad.validate();
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentParameters);
  }
}

TEST_CASE("closed-form average encoding fidelity") {
  CHECK(average_fidelity_exact(1.5, 0.0) ==
        doctest::Approx(0.9745187226497409).epsilon(1e-12));
  for (double r : {0.5, 1.0, 1.5, 2.0}) {
    CHECK(average_fidelity_exact(r, 1.0) == 1.0);
    CHECK(average_fidelity_exact(r, -1.0) == 1.0);
  }
  CHECK(average_fidelity_exact(0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(average_fidelity_exact(0.5, 0.0) < average_fidelity_exact(1.0, 0.0));
  CHECK(average_fidelity_exact(1.0, 0.0) < average_fidelity_exact(2.0, 0.0));
  CHECK(average_fidelity_exact(2.0, 0.0) < 1.0);

  try {
    average_fidelity_exact(1.0, 1.0000001);
    FAIL("expected a range error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentParameters);
  }
  CHECK_THROWS_AS(average_fidelity_exact(1.0, std::nan("")), Error);
  CHECK_THROWS_AS(average_fidelity_exact(-0.1, 0.0), Error);
}

TEST_CASE("code states: normalizers, support, orthogonality") {
  CodeStates code = chi_states(1.5, 0.3, 90);
  CHECK(code.c_plus == doctest::Approx(1.1468057091373212).epsilon(1e-12));
  CHECK(code.c_minus == doctest::Approx(0.8275485879935063).epsilon(1e-12));
  CHECK(code.r == 1.5);
  CHECK(code.theta_tilde == 0.3);

  const VectorXcd& cp = code.chi_plus.vector();
  const VectorXcd& cm = code.chi_minus.vector();
  CHECK(cp.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cm.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(cp.dot(cm)) < 1e-10);
  CHECK(off_support(cp, 0) < 1e-10);
  CHECK(off_support(cm, 2) < 1e-10);

  // the pair spans the same plane regardless of 2 pi shifts of the angle
  CodeStates wrapped = chi_states(1.5, 0.3 + 2.0 * M_PI, 90);
  CHECK(max_abs(wrapped.chi_plus.vector() - cp) < 1e-9);
  CHECK(max_abs(wrapped.chi_minus.vector() - cm) < 1e-9);

  try {
    chi_states(0.0, 0.0, 30);
    FAIL("expected a degenerate-code error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateCode);
  }
  CHECK_THROWS_AS(chi_states(-0.5, 0.0, 30), Error);
  CHECK_THROWS_AS(chi_states(1.0, 0.0, 0), Error);
}

TEST_CASE("code states match the analytic Fock series at safe truncation") {
  // dimension chosen so the top-level amplitude (tanh r)^(dim/2) sits below
  // the comparison tolerance; the matrix exponential perturbs the state at
  // that scale through the truncated boundary
  const int dim = 90;
  const double r = 0.75, th = 0.9;
  VectorXcd sv1 = squeezed_vacuum_coeffs(dim, r, th);
  VectorXcd sv2 = squeezed_vacuum_coeffs(dim, r, th + M_PI);

  Complex overlap = sv1.dot(sv2);
  CHECK(std::abs(overlap - 1.0 / std::sqrt(std::cosh(2.0 * r))) < 1e-10);

  VectorXcd plus = sv1 + sv2;
  VectorXcd minus = sv1 - sv2;
  plus /= plus.norm();
  minus /= minus.norm();

  CodeStates code = chi_states(r, th, dim);
  CHECK(max_abs(code.chi_plus.vector() - plus) < 1e-8);
  CHECK(max_abs(code.chi_minus.vector() - minus) < 1e-8);
}

TEST_CASE("photon loss maps the code to orthogonal odd superparities") {
  CodeStates code = chi_states(1.5, 0.3, 90);
  MatrixXcd a = annihilation(90);
  VectorXcd lp = a * code.chi_plus.vector();
  VectorXcd lm = a * code.chi_minus.vector();
  lp /= lp.norm();
  lm /= lm.norm();
  CHECK(off_support(lp, 3) < 1e-10);
  CHECK(off_support(lm, 1) < 1e-10);
  CHECK(std::abs(lp.dot(lm)) < 1e-10);
}

TEST_CASE("ideal encoding reproduces the closed-form code superposition") {
  const int dim = 100;
  const double theta = 0.4;
  const std::vector<double> tbs{0.0, 0.25 * M_PI, 0.5 * M_PI, 0.75 * M_PI, M_PI};
  const std::vector<double> pbs{0.0, 0.5 * M_PI, M_PI, 4.0, 5.5};

  for (double r : {0.5, 1.0, 1.5}) {
    VectorXcd sv1 = squeeze(dim, SqueezeParams{r, theta}).mat.col(0);
    VectorXcd sv2 = squeeze(dim, SqueezeParams{r, theta + M_PI}).mat.col(0);
    double s = 1.0 / std::sqrt(std::cosh(2.0 * r));
    // Fock truncation at this dimension limits the r = 1.5 states to ~1e-5
    // agreement with untruncated closed forms; smaller r is fully converged.
    double ftol = (r > 1.25) ? 1e-4 : 1e-8;
    double ptol = (r > 1.25) ? 1e-4 : 1e-9;
    std::vector<double> equator_row;
    for (double tb : tbs) {
      for (double pb : pbs) {
        BlochPoint bp{tb, pb};
        EncodeOutcome out = ideal_encode(bp, r, theta, dim);
        Complex al = bp.alpha(), be = bp.beta();

        VectorXcd w0 = 0.5 * ((al + be) * sv1 + (al - be) * sv2);
        VectorXcd w1 = 0.5 * ((al + be) * sv1 - (al - be) * sv2);
        const VectorXcd& jf = out.joint_final.vector();
        CHECK(max_abs(jf.head(dim) - w0) < 1e-10);
        CHECK(max_abs(jf.tail(dim) - w1) < 1e-10);

        CHECK(std::abs(out.report.f_avg - average_fidelity_exact(r, bp.p_z())) < ftol);
        CHECK(std::abs(out.report.p_plus - 0.5 * (1.0 + s * bp.p_z())) < ptol);
        CHECK(std::abs(out.report.p_plus + out.report.p_minus - 1.0) < 1e-12);
        CHECK(out.report.purity_plus == 1.0);
        CHECK(out.report.purity_minus == 1.0);
        if (tb == 0.5 * M_PI) equator_row.push_back(out.report.f_avg);
      }
    }
    double lo = *std::min_element(equator_row.begin(), equator_row.end());
    double hi = *std::max_element(equator_row.begin(), equator_row.end());
    CHECK(hi - lo < 1e-8);  // azimuthal covariance of the ideal sequence
  }

  EncodeOutcome pole = ideal_encode(BlochPoint{0.0, 0.0}, 1.5, 0.7, dim);
  CHECK(pole.report.f_plus == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(pole.report.p_plus == doctest::Approx(0.657581667254977).epsilon(1e-4));
  // at this truncation the pole probability is (1 + <sv1|sv2>)/2 exactly
  VectorXcd s1 = squeeze(dim, SqueezeParams{1.5, 0.7}).mat.col(0);
  VectorXcd s2 = squeeze(dim, SqueezeParams{1.5, 0.7 + M_PI}).mat.col(0);
  CHECK(pole.report.p_plus ==
        doctest::Approx(0.5 * (1.0 + s1.dot(s2).real())).epsilon(1e-10));

  EncodeOutcome eq = ideal_encode(BlochPoint{0.5 * M_PI, 0.3}, 1.5, 0.7, dim);
  CHECK(eq.report.p_plus == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(eq.report.p_minus == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("compensation wait time selection") {
  CHECK(compensation_wait_time(20.05024007329393, 0.10053096491487339) ==
        doctest::Approx(50.55657388475405).epsilon(1e-12));
  CHECK(compensation_wait_time(0.0, 1.0) == 0.0);
  CHECK(compensation_wait_time(4.0 * M_PI, 1.0) == 0.0);
  CHECK(compensation_wait_time(M_PI, 1.0) == doctest::Approx(M_PI).epsilon(1e-13));
  CHECK(compensation_wait_time(-0.5 * M_PI, 1.0) == doctest::Approx(0.5 * M_PI).epsilon(1e-13));

  for (double phi : {0.3, 3.9, 17.2}) {
    double tau = compensation_wait_time(phi, 0.1);
    double resid = std::fmod(phi + 0.1 * tau, 2.0 * M_PI);
    CHECK(std::min(resid, 2.0 * M_PI - resid) < 1e-9);
  }

  CHECK_THROWS_AS(compensation_wait_time(1.0, 0.0), Error);
  CHECK_THROWS_AS(compensation_wait_time(1.0, -0.2), Error);
  CHECK_THROWS_AS(compensation_wait_time(std::nan(""), 1.0), Error);
}

TEST_CASE("compensated sequence in the perfect-gate limit") {
  PhysicalParams p = reference_params();
  DerivedQuantities dq = derive(p);
  // azimuth pi/2 keeps both code components populated, so a wrong wait
  // angle actually shows up in the fidelity
  BlochPoint eq{0.5 * M_PI, 0.5 * M_PI};

  EncodeOutcome out = compensated_encode(eq, p, dq.phi_analytic, Backend::Ideal);
  CHECK(out.report.p_plus == doctest::Approx(0.5).epsilon(1e-10));
  // dim-90 truncation of the r = 1.5 code costs ~3e-5 against closed forms
  CHECK(std::abs(out.report.f_avg - average_fidelity_exact(dq.r_target, 0.0)) < 1e-4);
  CHECK(out.report.wait_time ==
        doctest::Approx(compensation_wait_time(dq.phi_analytic, std::abs(dq.delta)))
            .epsilon(1e-14));
  CHECK(out.report.phi_used == dq.phi_analytic);
  CHECK_FALSE(out.report.long_wait);
  CHECK(out.report.purity_plus == 1.0);
  CHECK(out.steps == 0);  // gate matrices, no integration
  CHECK(out.max_trace_drift == 0.0);

  // exact compensation makes the sequence reproduce the perfect-gate encoding
  EncodeOutcome ideal = ideal_encode(eq, dq.r_target, p.theta, p.resonator_dim);
  CHECK(max_abs(out.joint_final.vector() - ideal.joint_final.vector()) < 1e-9);
  CHECK(std::abs(out.report.f_plus - ideal.report.f_plus) < 1e-9);
  CHECK(std::abs(out.report.f_minus - ideal.report.f_minus) < 1e-9);

  EncodeOutcome pole = compensated_encode(BlochPoint{0.0, 0.0}, p, dq.phi_analytic,
                                          Backend::Ideal);
  CHECK(pole.report.f_avg == doctest::Approx(1.0).epsilon(1e-8));

  EncodeOutcome off = compensated_encode(eq, p, dq.phi_analytic + 0.4, Backend::Ideal);
  CHECK(off.report.f_avg < out.report.f_avg - 1e-3);
}

TEST_CASE("optimizer recovers the accrued angle on the perfect-gate backend") {
  PhysicalParams p = small_params(40, 0.05);
  DerivedQuantities dq = derive(p);
  OptimizationResult res = optimize_compensation_angle(p, Backend::Ideal);
  CHECK(res.phi_analytic == dq.phi_analytic);
  CHECK(std::abs(res.phi_star - dq.phi_analytic) < 2e-3);
  CHECK(res.multimodal);  // the lossless landscape is pi-periodic: twin peaks
  CHECK_FALSE(res.degenerate);
  CHECK(res.f_at_star > average_fidelity_exact(dq.r_target, 0.0) - 1e-6);
  CHECK(res.evaluations > 40);

  // at equator azimuth 0 the odd code component has zero amplitude, the
  // landscape is exactly flat, and the optimizer reports the degeneracy
  OptimizationResult flat =
      optimize_compensation_angle(p, Backend::Ideal, BlochPoint{0.5 * M_PI, 0.0});
  CHECK(flat.degenerate);
  CHECK_FALSE(flat.multimodal);
  CHECK(flat.phi_star == dq.phi_analytic);
}

TEST_CASE("sweep assembles every point from one propagation") {
  SUBCASE("perfect-gate backend") {
    PhysicalParams p = small_params(40, 0.05);
    double phi = derive(p).phi_analytic + 0.15;  // off-optimum, nontrivial residual
    SweepGrid grid{{0.0, 1.1, M_PI}, {0.0, 2.2, 5.0}};
    SweepResult sweep = bloch_sweep(p, grid, phi, Backend::Ideal, 1);
    REQUIRE(sweep.entries.size() == 9);
    for (std::size_t k = 0; k < sweep.entries.size(); ++k) {
      const SweepEntry& e = sweep.entries[k];
      REQUIRE(e.ok);
      CHECK(e.report.bloch.theta_b == grid.theta_b[k / 3]);
      CHECK(e.report.bloch.phi_b == grid.phi_b[k % 3]);
      EncodeOutcome direct = compensated_encode(e.report.bloch, p, phi, Backend::Ideal);
      CHECK(std::abs(e.report.f_avg - direct.report.f_avg) < 1e-12);
      CHECK(std::abs(e.report.p_plus - direct.report.p_plus) < 1e-12);
      CHECK(std::abs(e.report.f_plus - direct.report.f_plus) < 1e-12);
    }
    SweepResult threaded = bloch_sweep(p, grid, phi, Backend::Ideal, 3);
    for (std::size_t k = 0; k < sweep.entries.size(); ++k) {
      CHECK(threaded.entries[k].report.f_avg == sweep.entries[k].report.f_avg);
      CHECK(threaded.entries[k].report.p_plus == sweep.entries[k].report.p_plus);
    }
  }

  SUBCASE("master-equation backend") {
    PhysicalParams p = small_params(16, 0.15, 30.0);
    double phi = derive(p).phi_analytic;
    SweepGrid grid{{0.7, 2.1}, {0.5, 3.8}};
    SweepResult sweep = bloch_sweep(p, grid, phi, Backend::Lindblad, 1);
    REQUIRE(sweep.entries.size() == 4);
    CHECK(sweep.steps > 0);
    CHECK(sweep.max_trace_drift < 1e-8);
    for (const SweepEntry& e : sweep.entries) {
      REQUIRE(e.ok);
      EncodeOutcome direct = compensated_encode(e.report.bloch, p, phi, Backend::Lindblad);
      // basis images and the single-input chain pass through the adaptive
      // integrator with different payloads; agreement is tolerance-limited
      CHECK(std::abs(e.report.f_avg - direct.report.f_avg) < 1e-7);
      CHECK(std::abs(e.report.p_plus - direct.report.p_plus) < 1e-7);
      CHECK(std::abs(e.report.purity_plus - direct.report.purity_plus) < 1e-7);
      CHECK(std::abs(e.report.p_plus + e.report.p_minus - 1.0) < 1e-8);
      CHECK(e.report.purity_plus <= 1.0 + 1e-9);
      CHECK(e.report.f_avg < 1.0);
    }
  }
}

TEST_CASE("protocol argument validation") {
  PhysicalParams p = small_params(30, 0.05);
  BlochPoint eq{0.5 * M_PI, 0.0};

  try {
    compensated_encode(eq, p, std::nan(""), Backend::Ideal);
    FAIL("expected an error for a non-finite angle");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentParameters);
  }

  PhysicalParams no_drive = p;
  no_drive.epsilon = 0.0;
  try {
    compensated_encode(eq, no_drive, 1.0, Backend::Ideal);
    FAIL("expected a degenerate-code error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateCode);
  }

  try {
    bloch_sweep(p, SweepGrid{{}, {1.0}}, 1.0, Backend::Ideal, 1);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
  try {
    bloch_sweep(p, SweepGrid{{1.0}, {1.0}}, 1.0, Backend::Ideal, 0);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }

  BlochPoint bad{0.3, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(compensated_encode(bad, p, 1.0, Backend::Ideal), Error);
}

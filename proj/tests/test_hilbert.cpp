#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csq/hilbert.hpp"
#include "test_util.hpp"

using namespace csq;
using namespace csqtest;

TEST_CASE("ladder operators satisfy the truncated commutator") {
  const int n = 12;
  MatrixXcd a = annihilation(n), ad = creation(n);
  MatrixXcd comm = a * ad - ad * a;
  for (int i = 0; i < n - 1; ++i) CHECK(std::abs(comm(i, i) - 1.0) < 1e-14);
  // the corner picks up the truncation artifact -(n-1)
  CHECK(std::abs(comm(n - 1, n - 1) + double(n - 1)) < 1e-12);
  CHECK(max_abs(MatrixXcd(ad * a - number_operator(n))) < 1e-13);
  CHECK(max_abs(MatrixXcd(a - ad.adjoint())) < 1e-15);
}

TEST_CASE("annihilation acts as sqrt(n) shift on fock vectors") {
  const int n = 8;
  MatrixXcd a = annihilation(n);
  for (int k = 1; k < n; ++k) {
    VectorXcd lowered = a * fock_vector(n, k);
    VectorXcd expected = std::sqrt(double(k)) * fock_vector(n, k - 1);
    CHECK(max_abs(VectorXcd(lowered - expected)) < 1e-14);
  }
  CHECK(max_abs(VectorXcd(a * fock_vector(n, 0))) == 0.0);
}

TEST_CASE("tensor is qubit-major") {
  MatrixXcd q = random_matrix(2, 2, 11);
  MatrixXcd r = random_matrix(3, 3, 12);
  MatrixXcd t = tensor(q, r);
  REQUIRE(t.rows() == 6);
  for (int qi = 0; qi < 2; ++qi)
    for (int qj = 0; qj < 2; ++qj)
      for (int ni = 0; ni < 3; ++ni)
        for (int nj = 0; nj < 3; ++nj)
          CHECK(std::abs(t(qi * 3 + ni, qj * 3 + nj) - q(qi, qj) * r(ni, nj)) < 1e-15);
  MatrixXcd id = tensor(MatrixXcd::Identity(2, 2), MatrixXcd::Identity(5, 5));
  CHECK(max_abs(MatrixXcd(id - MatrixXcd::Identity(10, 10))) == 0.0);
}

TEST_CASE("state construction validates its input") {
  HilbertLayout lay{4, false};
  CHECK_THROWS_AS(QuantumState::pure(lay, VectorXcd::Zero(4)), Error);
  CHECK_THROWS_AS(QuantumState::pure(lay, 2.0 * fock_vector(4, 0)), Error);
  CHECK_THROWS_AS(QuantumState::pure(lay, fock_vector(5, 0)), Error);
  CHECK_THROWS_AS(QuantumState::pure({0, false}, VectorXcd::Zero(0)), Error);

  // non-hermitian, wrong trace, negative eigenvalue
  MatrixXcd bad = MatrixXcd::Zero(4, 4);
  bad(0, 1) = 1.0;
  bad(0, 0) = 1.0;
  CHECK_THROWS_AS(QuantumState::mixed(lay, bad), Error);
  CHECK_THROWS_AS(QuantumState::mixed(lay, 0.5 * MatrixXcd::Identity(4, 4)), Error);
  MatrixXcd neg = MatrixXcd::Zero(4, 4);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  CHECK_THROWS_AS(QuantumState::mixed(lay, neg), Error);

  QuantumState ok = QuantumState::pure(lay, fock_vector(4, 1));
  CHECK_THROWS_AS(ok.matrix(), Error);
  QuantumState okm = ok.to_mixed();
  CHECK_THROWS_AS(okm.vector(), Error);
  CHECK(max_abs(MatrixXcd(okm.matrix() - ok.density())) == 0.0);

  try {
    QuantumState::mixed(lay, neg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidState);
  }
}

TEST_CASE("from_evolution symmetrizes and reports the defect") {
  HilbertLayout lay{3, false};
  MatrixXcd rho = MatrixXcd::Zero(3, 3);
  rho(0, 0) = 0.6;
  rho(1, 1) = 0.4;
  rho(0, 1) = Complex(0.2, 1e-8);  // slightly non-hermitian off-diagonal pair
  rho(1, 0) = Complex(0.2, 1e-8);
  double defect = 0.0;
  QuantumState s = QuantumState::from_evolution(lay, rho, &defect);
  CHECK(defect == doctest::Approx(2e-8).epsilon(1e-3));
  CHECK(max_abs(MatrixXcd(s.matrix() - s.matrix().adjoint())) < 1e-18);
  // but a grossly broken matrix is rejected
  rho(0, 1) = Complex(0.2, 0.1);
  CHECK_THROWS_AS(QuantumState::from_evolution(lay, rho), Error);
}

TEST_CASE("partial traces recover factors and reject wrong kinds") {
  const int n = 5;
  HilbertLayout joint{n, true};
  MatrixXcd rho_q = random_density(2, 21);
  MatrixXcd rho_r = random_density(n, 22);
  QuantumState s = QuantumState::mixed(joint, tensor(rho_q, rho_r));
  CHECK(max_abs(MatrixXcd(partial_trace_resonator(s).matrix() - rho_r)) < 1e-12);
  CHECK(max_abs(MatrixXcd(partial_trace_qubit(s) - rho_q)) < 1e-12);

  // entangled: (|0>|0> + |1>|1>)/sqrt(2) reduces to even mixtures
  VectorXcd psi = VectorXcd::Zero(2 * n);
  psi(0) = 1.0 / std::sqrt(2.0);
  psi(n + 1) = 1.0 / std::sqrt(2.0);
  QuantumState bell = QuantumState::pure(joint, psi);
  CHECK_THROWS_AS(partial_trace_resonator(bell), Error);  // pure input rejected
  QuantumState bellm = bell.to_mixed();
  Matrix2cd q = partial_trace_qubit(bellm);
  CHECK(max_abs(MatrixXcd(q - 0.5 * Matrix2cd::Identity())) < 1e-14);
  MatrixXcd r = partial_trace_resonator(bellm).matrix();
  CHECK(std::abs(r(0, 0).real() - 0.5) < 1e-14);
  CHECK(std::abs(r(1, 1).real() - 0.5) < 1e-14);
  CHECK(std::abs(r(0, 1)) < 1e-14);

  QuantumState res_only = QuantumState::mixed({n, false}, rho_r);
  CHECK_THROWS_AS(partial_trace_resonator(res_only), Error);
}

TEST_CASE("purity and fidelity agree with closed forms") {
  const int n = 6;
  HilbertLayout lay{n, false};
  QuantumState a = QuantumState::pure(lay, random_unit_vector(n, 31));
  QuantumState b = QuantumState::pure(lay, random_unit_vector(n, 32));
  CHECK(purity(a) == 1.0);
  CHECK(purity(QuantumState::mixed(lay, MatrixXcd::Identity(n, n) / double(n))) ==
        doctest::Approx(1.0 / n).epsilon(1e-12));

  double overlap = std::norm(a.vector().dot(b.vector()));
  CHECK(fidelity(a, b) == doctest::Approx(overlap).epsilon(1e-12));
  CHECK(fidelity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fidelity(a, b.to_mixed()) == doctest::Approx(overlap).epsilon(1e-10));
  CHECK(fidelity(a.to_mixed(), b) == doctest::Approx(overlap).epsilon(1e-10));
  CHECK(fidelity(a.to_mixed(), b.to_mixed()) == doctest::Approx(overlap).epsilon(1e-8));

  // commuting mixed pair: F = (sum_i sqrt(p_i q_i))^2
  Eigen::VectorXd p(3), q(3);
  p << 0.5, 0.3, 0.2;
  q << 0.1, 0.6, 0.3;
  double expect = std::pow(std::sqrt(0.05) + std::sqrt(0.18) + std::sqrt(0.06), 2);
  HilbertLayout l3{3, false};
  QuantumState sp = QuantumState::mixed(l3, p.cast<Complex>().asDiagonal());
  QuantumState sq = QuantumState::mixed(l3, q.cast<Complex>().asDiagonal());
  CHECK(fidelity(sp, sq) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(fidelity(sp, sq) == doctest::Approx(fidelity(sq, sp)).epsilon(1e-12));

  CHECK_THROWS_AS(fidelity(a, QuantumState::pure({n, true}, fock_vector(2 * n, 0))), Error);
}

TEST_CASE("matrix exponential matches an eigendecomposition oracle") {
  const int n = 14;
  MatrixXcd h = random_hermitian(n, 41);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  VectorXcd phases(n);
  for (int i = 0; i < n; ++i) phases(i) = std::exp(Complex(0.0, -es.eigenvalues()(i)));
  MatrixXcd oracle = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  MatrixXcd got = operator_exponential(Complex(0.0, -1.0) * h);
  CHECK(max_abs(MatrixXcd(got - oracle)) < 1e-12);

  MatrixXcd nil = MatrixXcd::Zero(2, 2);
  nil(0, 1) = 3.0;
  MatrixXcd expect = MatrixXcd::Identity(2, 2) + nil;
  CHECK(max_abs(MatrixXcd(operator_exponential(nil) - expect)) < 1e-14);
  CHECK(max_abs(MatrixXcd(operator_exponential(MatrixXcd::Zero(3, 3)) -
                          MatrixXcd::Identity(3, 3))) == 0.0);
}

TEST_CASE("wigner grid reproduces closed forms for vacuum and fock states") {
  const int dim = 40;
  HilbertLayout lay{dim, false};
  VectorXd xs = VectorXd::LinSpaced(41, -4.0, 4.0);
  VectorXd ps = VectorXd::LinSpaced(37, -4.0, 4.0);

  QuantumState vac = QuantumState::pure(lay, fock_vector(dim, 0));
  WignerGrid wv = wigner_grid(vac, xs, ps);
  for (long i = 0; i < ps.size(); ++i)
    for (long j = 0; j < xs.size(); ++j) {
      double expect = std::exp(-xs(j) * xs(j) - ps(i) * ps(i)) / M_PI;
      CHECK(std::abs(wv.w(i, j) - expect) < 1e-12);
    }

  QuantumState one = QuantumState::pure(lay, fock_vector(dim, 1));
  WignerGrid w1 = wigner_grid(one, xs, ps);
  for (long i = 0; i < ps.size(); ++i)
    for (long j = 0; j < xs.size(); ++j) {
      double s = xs(j) * xs(j) + ps(i) * ps(i);
      double expect = (2.0 * s - 1.0) * std::exp(-s) / M_PI;
      CHECK(std::abs(w1.w(i, j) - expect) < 1e-12);
    }
}

TEST_CASE("wigner grid of a coherent state peaks at the displaced center") {
  const int dim = 50;
  HilbertLayout lay{dim, false};
  Complex alpha(1.2, -0.7);
  QuantumState st = QuantumState::pure(lay, coherent_coeffs(dim, alpha));
  // W = (1/pi) exp(-(x - sqrt2 Re a)^2 - (p - sqrt2 Im a)^2)
  double x0 = std::sqrt(2.0) * alpha.real(), p0 = std::sqrt(2.0) * alpha.imag();
  VectorXd xs = VectorXd::LinSpaced(31, x0 - 3.0, x0 + 3.0);
  VectorXd ps = VectorXd::LinSpaced(31, p0 - 3.0, p0 + 3.0);
  WignerGrid w = wigner_grid(st, xs, ps);
  for (long i = 0; i < ps.size(); ++i)
    for (long j = 0; j < xs.size(); ++j) {
      double expect =
          std::exp(-std::pow(xs(j) - x0, 2) - std::pow(ps(i) - p0, 2)) / M_PI;
      CHECK(std::abs(w.w(i, j) - expect) < 1e-9);
    }
}

TEST_CASE("wigner grid integrates to one and has vacuum variance 1/2") {
  const int dim = 30;
  HilbertLayout lay{dim, false};
  VectorXd xs = VectorXd::LinSpaced(121, -6.0, 6.0);
  VectorXd ps = VectorXd::LinSpaced(121, -6.0, 6.0);
  WignerGrid w = wigner_grid(QuantumState::pure(lay, fock_vector(dim, 0)), xs, ps);
  CHECK(grid_integral(w) == doctest::Approx(1.0).epsilon(1e-8));
  // second moment in x
  double m2 = 0.0;
  double dx = xs(1) - xs(0), dp = ps(1) - ps(0);
  for (long i = 0; i < ps.size(); ++i)
    for (long j = 0; j < xs.size(); ++j) m2 += xs(j) * xs(j) * w.w(i, j) * dx * dp;
  CHECK(m2 == doctest::Approx(0.5).epsilon(1e-6));

  QuantumState joint = QuantumState::pure({4, true}, fock_vector(8, 0));
  CHECK_THROWS_AS(wigner_grid(joint, xs, ps), Error);
}

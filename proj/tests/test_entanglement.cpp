#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "esr/entanglement.hpp"
#include "esr/error.hpp"

using namespace esr;

namespace {

Matrix4 pure(const Eigen::Vector4cd& v) { return v * v.adjoint(); }

Eigen::Matrix2cd su2(double a, double b, double c) {
  // e^{i a sz} e^{i b sy} e^{i c sz}
  const cplx i{0.0, 1.0};
  Eigen::Matrix2cd z1, y, z2;
  z1 << std::exp(i * a), 0, 0, std::exp(-i * a);
  y << std::cos(b), std::sin(b), -std::sin(b), std::cos(b);
  z2 << std::exp(i * c), 0, 0, std::exp(-i * c);
  return z1 * y * z2;
}

Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

QuantumImpurityModel appendix_model() {
  QuantumImpurityModel m;
  m.transport.epsilon_up_mev = m.transport.epsilon_down_mev = -5.0;
  m.transport.coulomb_u_mev = 50.0;
  m.transport.b_field = {0.5509026, 0.0, 0.0};
  SpinSiteSpec s;
  s.b_field = {0.5751223, 0.0, 0.0};
  m.sites.push_back(s);
  m.exchanges.push_back({0, 1, {-0.1139, -0.1139, -0.1139}});
  return m;
}

}  // namespace

TEST_CASE("fidelity against Bell targets") {
  const TwoQubitState bell = two_qubit_state(pure(bell_vector(BellState::phi_plus)));
  CHECK(fidelity(bell) == doctest::Approx(1.0));
  CHECK(fidelity(bell, BellState::psi_minus) == doctest::Approx(0.0));
  Eigen::Vector4cd zero = Eigen::Vector4cd::Zero();
  zero[0] = 1.0;
  CHECK(fidelity(two_qubit_state(pure(zero))) == doctest::Approx(0.5));
  CHECK(fidelity(two_qubit_state(Matrix4::Identity() / 4.0)) == doctest::Approx(0.25));
}

TEST_CASE("concurrence of reference states") {
  for (BellState b : {BellState::phi_plus, BellState::phi_minus, BellState::psi_plus, BellState::psi_minus})
    CHECK(concurrence(pure(bell_vector(b))) == doctest::Approx(1.0));
  Eigen::Vector4cd product;
  product << 0.6, 0.0, 0.8, 0.0;  // (0.6|0> + 0.8|1>) (x) |0>
  CHECK(concurrence(pure(product)) < 1e-7);
  CHECK(concurrence(Matrix4::Identity() / 4.0) == doctest::Approx(0.0));
  // Werner state p |phi+><phi+| + (1 - p) I/4 has C = max(0, (3p - 1)/2).
  for (double p : {0.2, 0.5, 0.9}) {
    const Matrix4 w = p * pure(bell_vector(BellState::phi_plus)) + (1.0 - p) * Matrix4::Identity() / 4.0;
    CHECK(concurrence(w) == doctest::Approx(std::max(0.0, (3.0 * p - 1.0) / 2.0)).epsilon(1e-9));
  }
  // cos t |00> + sin t |11> has C = |sin 2t|.
  const double t = 0.3;
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  v[0] = std::cos(t);
  v[3] = std::sin(t);
  CHECK(concurrence(pure(v)) == doctest::Approx(std::sin(2.0 * t)).epsilon(1e-7));
}

TEST_CASE("concurrence is invariant under local unitaries") {
  const Matrix4 w = 0.8 * pure(bell_vector(BellState::psi_plus)) + 0.2 * Matrix4::Identity() / 4.0;
  const double c0 = concurrence(w);
  for (int k = 0; k < 5; ++k) {
    const Eigen::Matrix4cd u = kron(su2(0.3 * k, 1.1 - 0.2 * k, 0.7 + k), su2(-0.4 * k, 0.5 * k, 2.0 - k));
    CHECK(concurrence(Matrix4(u * w * u.adjoint())) == doctest::Approx(c0).epsilon(1e-10));
  }
}

TEST_CASE("fidelity-concurrence bound") {
  const BoundReport b = bound_check(two_qubit_state(pure(bell_vector(BellState::phi_plus))));
  CHECK(b.max_fidelity == doctest::Approx(1.0));
  CHECK(b.concurrence == doctest::Approx(1.0));
  CHECK(std::abs(b.slack) < 1e-9);
  CHECK(b.holds);
  Eigen::Vector4cd zero = Eigen::Vector4cd::Zero();
  zero[0] = 1.0;
  const BoundReport s = bound_check(two_qubit_state(pure(zero)));
  CHECK(s.max_fidelity == doctest::Approx(0.5));
  CHECK(s.concurrence == doctest::Approx(0.0));
  CHECK(std::abs(s.slack) < 1e-12);
  // Mixtures of Bell and product states respect the bound.
  for (double p = 0.0; p <= 1.0; p += 0.1) {
    const Matrix4 m = p * pure(bell_vector(BellState::phi_minus)) + (1.0 - p) * pure(zero);
    CHECK(bound_check(two_qubit_state(m)).holds);
  }
}

TEST_CASE("reduction of the full density matrix") {
  const EigenBasis basis = make_eigen_basis(appendix_model());
  const auto n = static_cast<Eigen::Index>(basis.size());
  const auto digits = qubit_eigenstates(basis);
  CHECK(digits[0] == 0);

  Matrix rho = Matrix::Zero(n, n);
  rho(0, 0) = 1.0;
  const TwoQubitState g = reduce_to_qubits(rho, basis);
  CHECK(g.leakage == doctest::Approx(0.0));
  CHECK(std::abs(g.rho(0, 0) - 1.0) < 1e-12);

  // 1% double occupancy is reported as leakage and removed by renormalization.
  const auto doubly = basis.states_with_charge(2).front();
  rho(0, 0) = 0.99;
  rho(static_cast<Eigen::Index>(doubly), static_cast<Eigen::Index>(doubly)) = 0.01;
  const TwoQubitState l = reduce_to_qubits(rho, basis);
  CHECK(l.leakage == doctest::Approx(0.01));
  CHECK(l.rho.trace().real() == doctest::Approx(1.0));
  CHECK(l.raw.trace().real() == doctest::Approx(0.99));
  CHECK_FALSE(l.leakage_warning);
  CHECK(fidelity_raw(l) == doctest::Approx(0.99 * 0.5));

  // The digital map is unitary on the charge-1 block.
  const Eigen::Matrix4cd o = digital_overlaps(basis);
  CHECK((o.adjoint() * o - Eigen::Matrix4cd::Identity()).norm() < 1e-12);
}

TEST_CASE("more than one auxiliary spin cannot be reduced to two qubits") {
  QuantumImpurityModel m = appendix_model();
  m.sites.push_back(SpinSiteSpec{});
  const EigenBasis basis = make_eigen_basis(m);
  const auto n = static_cast<Eigen::Index>(basis.size());
  Matrix rho = Matrix::Zero(n, n);
  rho(0, 0) = 1.0;
  CHECK_THROWS_AS(reduce_to_qubits(rho, basis), ValidationError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "esr/error.hpp"
#include "esr/model.hpp"
#include "esr/rates.hpp"

using namespace esr;

namespace {

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

std::vector<ElectrodeSpec> appendix_electrodes() {
  ElectrodeSpec tip;
  tip.label = "tip";
  tip.temperature_k = 0.05;
  tip.base_rate_uev = 1.0;
  tip.spin_polarization = {0.0, 0.0, 1.0};
  tip.drive_amplitude = 0.5;
  ElectrodeSpec sub;
  sub.label = "substrate";
  sub.temperature_k = 0.05;
  sub.base_rate_uev = 5.0;
  return symmetric_bias_electrodes(6.0, tip, sub);
}

// Shallow level near the Fermi energy so every transition carries weight.
QuantumImpurityModel active_model() {
  QuantumImpurityModel m;
  m.transport.epsilon_up_mev = m.transport.epsilon_down_mev = 0.02;
  m.transport.coulomb_u_mev = 0.5;
  m.transport.b_field = {0.2, 0.0, 0.1};
  SpinSiteSpec s;
  s.b_field = {0.25, 0.05, 0.0};
  m.sites.push_back(s);
  m.exchanges.push_back({0, 1, {0.8, 0.6, 0.7}});
  return m;
}

std::vector<ElectrodeSpec> active_electrodes() {
  ElectrodeSpec tip;
  tip.label = "tip";
  tip.temperature_k = 0.3;
  tip.base_rate_uev = 1.0;
  tip.spin_polarization = {0.3, -0.4, 0.5};
  ElectrodeSpec sub;
  sub.label = "substrate";
  sub.temperature_k = 0.2;
  sub.base_rate_uev = 2.0;
  return symmetric_bias_electrodes(0.05, tip, sub);
}

Matrix unit(std::size_t n, std::size_t a, std::size_t b) {
  Matrix e = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  e(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0;
  return e;
}

// Choi matrix of the dissipator: sum_ab D(E_ab) (x) E_ab.
Matrix choi(const std::vector<cplx>& gamma, std::size_t n) {
  const auto nn = static_cast<Eigen::Index>(n * n);
  Matrix c = Matrix::Zero(nn, nn);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const Matrix d = dissipator(unit(n, a, b), gamma, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          c(static_cast<Eigen::Index>(i * n + a), static_cast<Eigen::Index>(j * n + b)) +=
              d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  return c;
}

// Smallest eigenvalue of the Choi matrix on the complement of the maximally entangled vector.
double conditional_min_eigenvalue(const std::vector<cplx>& gamma, std::size_t n) {
  const Matrix c = choi(gamma, n);
  const auto nn = static_cast<Eigen::Index>(n * n);
  Vector omega = Vector::Zero(nn);
  for (std::size_t a = 0; a < n; ++a) omega(static_cast<Eigen::Index>(a * n + a)) = 1.0 / std::sqrt(double(n));
  const Matrix q = Matrix::Identity(nn, nn) - omega * omega.adjoint();
  const Matrix proj = q * c * q;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (proj + proj.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

ElectrodeSpec oracle_electrode() {
  ElectrodeSpec el;
  el.temperature_k = 0.05;
  el.chemical_potential_mev = 3.0;
  return el;
}

}  // namespace

TEST_CASE("Fermi function") {
  CHECK(fermi_occupation(0.0, 0.0, 1.0) == doctest::Approx(0.5));
  CHECK(fermi_occupation(40.0, 0.0, 1.0) == doctest::Approx(4.248354255291589e-18).epsilon(1e-12));
  CHECK(fermi_occupation(1e6, 0.0, 1.0) == 0.0);
  CHECK(fermi_occupation(-1e6, 0.0, 1.0) == 1.0);
  CHECK(fermi_occupation(3.0, 1.0, 0.5) + fermi_occupation(-3.0, -1.0, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("band transforms match quadrature references") {
  struct Case {
    double eta_uev, energy, particle_re, particle_im, hole_re, hole_im;
  };
  // Mu = 3 meV, T = 0.05 K, band [-1000, 1000] meV; energies in GHz.
  const Case cases[] = {
      {0.45, 725.096790, 0.2838310775342167, -1.971575684307822, 0.2161687792250464, -1.970621146715184},
      {0.45, 727.096790, 0.08891306722435873, -1.907744767629474, 0.4110867895348973, -1.90678759716533},
      {0.45, -483.597860, 0.4999856042569157, -0.8429349640991743, 1.425250306256461e-5, -0.8435715847203701},
      {0.0, 725.096790, 0.2857476540834725, -1.984021846250461, 0.2142523459165275, -1.983067308657823},
      {0.0, 727.096790, 0.08179588742279468, -1.914839292303443, 0.4182041125772053, -1.913882121839298},
      {0.0, -483.597860, 0.5, -0.8429349647437403, 0.0, -0.8435715853649363},
  };
  const ElectrodeSpec el = oracle_electrode();
  for (const Case& c : cases) {
    CAPTURE(c.eta_uev);
    CAPTURE(c.energy);
    RateOptions opt;
    opt.principal_value = true;
    opt.level_broadening_uev = c.eta_uev;
    const FermiTransform t = fermi_transform(c.energy, el, opt);
    CHECK(t.particle.real() == doctest::Approx(c.particle_re).epsilon(1e-7));
    CHECK(t.particle.imag() == doctest::Approx(c.particle_im).epsilon(1e-7));
    CHECK(std::abs(t.hole.real() - c.hole_re) < 1e-9);
    CHECK(t.hole.imag() == doctest::Approx(c.hole_im).epsilon(1e-7));
  }
}

TEST_CASE("shifts vanish without principal-value terms") {
  RateOptions opt;
  opt.level_broadening_uev = 0.45;
  const FermiTransform t = fermi_transform(725.0, oracle_electrode(), opt);
  CHECK(t.particle.imag() == 0.0);
  CHECK(t.hole.imag() == 0.0);
  CHECK(t.particle.real() + t.hole.real() == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("electrode validation") {
  ElectrodeSpec el;
  el.temperature_k = 0.0;
  CHECK_THROWS_AS(el.validate(), ValidationError);
  el.temperature_k = 1.0;
  el.spin_polarization = {0.8, 0.8, 0.0};
  CHECK_THROWS_AS(el.validate(), ValidationError);
  el.spin_polarization = {0.0, 0.0, 1.0};
  el.label = "gate";
  CHECK_THROWS_AS(el.validate(), ValidationError);
  const auto pair = symmetric_bias_electrodes(6.0, ElectrodeSpec{}, ElectrodeSpec{});
  CHECK(pair[0].label == "tip");
  CHECK(pair[0].chemical_potential_mev == doctest::Approx(3.0));
  CHECK(pair[1].label == "substrate");
  CHECK(pair[1].chemical_potential_mev == doctest::Approx(-3.0));
}

TEST_CASE("polarization matrix") {
  ElectrodeSpec el;
  el.spin_polarization = {0.0, 0.0, 1.0};
  const Eigen::Matrix2cd p = el.polarization_matrix();
  CHECK(std::abs(p(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(p(1, 1)) < 1e-15);
  el.spin_polarization = {0.0, 0.0, 0.0};
  CHECK((el.polarization_matrix() - 0.5 * Eigen::Matrix2cd::Identity()).norm() < 1e-15);
}

TEST_CASE("dissipator preserves trace and hermiticity") {
  const EigenBasis basis = make_eigen_basis(active_model());
  const std::size_t n = basis.size();
  for (bool pv : {false, true}) {
    RateOptions opt;
    opt.principal_value = pv;
    opt.level_broadening_uev = 2.0;
    const RateModel rates(basis, active_electrodes(), opt);
    const auto gamma = rates.static_tensor().total();
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const Matrix d = dissipator(unit(n, a, b), gamma, n);
        CHECK(std::abs(d.trace()) < 1e-12);
        const Matrix dt = dissipator(unit(n, b, a), gamma, n);
        CHECK((dt - d.adjoint()).norm() < 1e-12);
      }
  }
}

TEST_CASE("symmetric-energy generator is conditionally completely positive") {
  const EigenBasis basis = make_eigen_basis(active_model());
  for (double eta : {0.0, 2.0}) {
    RateOptions opt;
    opt.principal_value = true;
    opt.level_broadening_uev = eta;
    const RateModel rates(basis, active_electrodes(), opt);
    const double scale = units::uev_to_ghz(3.0);
    CHECK(conditional_min_eigenvalue(rates.static_tensor().total(), basis.size()) > -1e-12 * scale);
  }
}

TEST_CASE("drive modulates each electrode by the square of its factor") {
  const EigenBasis basis = make_eigen_basis(appendix_model());
  const RateModel rates(basis, appendix_electrodes());
  const PulseSegment seg{0.0, 10.0, 1.0, {Tone{16.0, 0.0}}};
  const double t = 0.01;
  const auto m = rates.modulation(seg, t);
  const double f = 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * 16.0 * t);
  CHECK(m[0] == doctest::Approx(f * f));
  CHECK(m[1] == doctest::Approx(1.0));
  const PulseSegment off{0.0, 10.0, 0.0, {Tone{16.0, 0.0}}};
  CHECK(rates.modulation(off, t)[0] == 1.0);
}

TEST_CASE("qme right-hand side") {
  const EigenBasis basis = make_eigen_basis(appendix_model());
  const RateModel rates(basis, appendix_electrodes());
  const auto n = static_cast<Eigen::Index>(basis.size());
  Matrix rho = Matrix::Zero(n, n);
  rho(0, 0) = 0.5;
  rho(2, 2) = 0.5;
  rho(0, 2) = rho(2, 0) = 0.3;
  const Matrix d = qme_rhs(rho, rates.static_tensor(), basis);
  CHECK(std::abs(d.trace()) < 1e-12);
  CHECK((d - d.adjoint()).norm() < 1e-12);
  // The coherence picks up -i 2 pi (E_0 - E_2) beyond the dissipative part.
  const Matrix diss = units::two_pi * dissipator(rho, rates.static_tensor().total(), basis.size());
  const cplx coherent = d(0, 2) - diss(0, 2);
  CHECK(std::abs(coherent - cplx{0.0, -units::two_pi * basis.gap(0, 2) * 0.3}) < 1e-9);
  rho(0, 0) = 0.6;
  CHECK_THROWS_AS(qme_rhs(rho, rates.static_tensor(), basis), NumericalError);
}

TEST_CASE("an unpolarized electrode treats both spins alike") {
  QuantumImpurityModel m;
  m.transport.epsilon_up_mev = m.transport.epsilon_down_mev = 0.0;
  m.transport.coulomb_u_mev = 1.0;
  m.quantization_axis = {0.0, 0.0, 1.0};
  const EigenBasis basis = make_eigen_basis(m);
  ElectrodeSpec tip;
  tip.temperature_k = 1.0;
  tip.base_rate_uev = 1.0;
  ElectrodeSpec sub = tip;
  sub.base_rate_uev = 0.0;
  const RateModel rates(basis, symmetric_bias_electrodes(0.0, tip, sub));
  const auto n = static_cast<Eigen::Index>(basis.size());
  Matrix rho = Matrix::Zero(n, n);
  const auto empty = basis.states_with_charge(0).front();
  rho(static_cast<Eigen::Index>(empty), static_cast<Eigen::Index>(empty)) = 1.0;
  const Matrix d = dissipator(rho, rates.static_tensor().total(), basis.size());
  const auto singles = basis.states_with_charge(1);
  REQUIRE(singles.size() == 2);
  const double up = d(static_cast<Eigen::Index>(singles[0]), static_cast<Eigen::Index>(singles[0])).real();
  const double down = d(static_cast<Eigen::Index>(singles[1]), static_cast<Eigen::Index>(singles[1])).real();
  CHECK(up > 0.0);
  CHECK(up == doctest::Approx(down).epsilon(1e-12));
}

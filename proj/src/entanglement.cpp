#include "esr/entanglement.hpp"

#include <algorithm>
#include <cmath>

#include "esr/error.hpp"

namespace esr {

namespace {

// Catalog indices of the charge-1 product states for digits 00, 01, 10, 11.
std::array<std::size_t, 4> digital_catalog_indices(const EigenBasis& basis) {
  const BasisCatalog& cat = basis.catalog;
  if (cat.site_spins().size() != 1 || cat.site_spins()[0] != 0.5)
    throw ValidationError("two-qubit reduction needs exactly one spin-1/2 site besides the transport orbital");
  std::array<std::size_t, 4> idx{};
  std::array<bool, 4> seen{};
  for (std::size_t i = 0; i < cat.size(); ++i) {
    const BasisState& s = cat[i];
    if (charge_of(s.occupation) != 1) continue;
    const int transport_bit = s.occupation == Occupation::up ? 1 : 0;
    const int site_bit = s.projections[0] > 0.0 ? 1 : 0;
    const int d = 2 * transport_bit + site_bit;
    idx[d] = i;
    seen[d] = true;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
    throw ValidationError("charge-1 block does not span four product states");
  return idx;
}

Matrix4 sqrt_psd(const Matrix4& m) {
  Eigen::SelfAdjointEigenSolver<Matrix4> es(0.5 * (m + m.adjoint()));
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

std::string bell_name(BellState b) {
  switch (b) {
    case BellState::phi_plus:
      return "phi+";
    case BellState::phi_minus:
      return "phi-";
    case BellState::psi_plus:
      return "psi+";
    case BellState::psi_minus:
      return "psi-";
  }
  return "?";
}

Eigen::Vector4cd bell_vector(BellState b) {
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  switch (b) {
    case BellState::phi_plus:
      v << r, 0, 0, r;
      break;
    case BellState::phi_minus:
      v << r, 0, 0, -r;
      break;
    case BellState::psi_plus:
      v << 0, r, r, 0;
      break;
    case BellState::psi_minus:
      v << 0, r, -r, 0;
      break;
  }
  return v;
}

Eigen::Matrix4cd digital_overlaps(const EigenBasis& basis) {
  const auto digital = digital_catalog_indices(basis);
  const auto block = basis.states_with_charge(1);
  if (block.size() != 4) throw ValidationError("two-qubit reduction needs exactly four charge-1 states");
  const Matrix& v = basis.system.vectors;
  Eigen::Matrix4cd o;
  for (int d = 0; d < 4; ++d) {
    const Vector amp = v.adjoint() * basis.reference_basis.col(static_cast<Eigen::Index>(digital[d]));
    for (int k = 0; k < 4; ++k) o(k, d) = amp[static_cast<Eigen::Index>(block[k])];
  }
  return o;
}

std::array<std::size_t, 4> qubit_eigenstates(const EigenBasis& basis) {
  const Eigen::Matrix4cd o = digital_overlaps(basis);
  const auto block = basis.states_with_charge(1);
  std::array<std::size_t, 4> out{};
  for (int d = 0; d < 4; ++d) {
    Eigen::Index k = 0;
    o.col(d).cwiseAbs().maxCoeff(&k);
    out[d] = block[static_cast<std::size_t>(k)];
  }
  return out;
}

TwoQubitState reduce_to_qubits(const Matrix& rho_full, const EigenBasis& basis) {
  const auto block = basis.states_with_charge(1);
  const Eigen::Matrix4cd o = digital_overlaps(basis);
  Matrix4 sub;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) sub(a, b) = rho_full(block[a], block[b]);
  TwoQubitState s;
  s.raw = o.adjoint() * sub * o;
  const double weight = s.raw.trace().real();
  s.leakage = std::clamp(rho_full.trace().real() - weight, 0.0, 1.0);
  s.leakage_warning = s.leakage > 0.5;
  s.rho = weight > 0.0 ? Matrix4(s.raw / weight) : Matrix4::Zero();
  return s;
}

TwoQubitState two_qubit_state(const Matrix4& rho4) {
  TwoQubitState s;
  s.raw = rho4;
  s.rho = rho4 / rho4.trace().real();
  return s;
}

double fidelity(const TwoQubitState& state, BellState target) {
  const Eigen::Vector4cd v = bell_vector(target);
  return (v.adjoint() * state.rho * v).value().real();
}

double fidelity_raw(const TwoQubitState& state, BellState target) {
  const Eigen::Vector4cd v = bell_vector(target);
  return (v.adjoint() * state.raw * v).value().real();
}

double concurrence(const Matrix4& rho4) {
  Matrix4 yy = Matrix4::Zero();
  yy(0, 3) = yy(3, 0) = -1.0;
  yy(1, 2) = yy(2, 1) = 1.0;
  const Matrix4 tilde = yy * rho4.conjugate() * yy;
  const Matrix4 root = sqrt_psd(rho4);
  const Matrix4 r = root * tilde * root;
  Eigen::SelfAdjointEigenSolver<Matrix4> es(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
  std::array<double, 4> lambda{};
  for (int i = 0; i < 4; ++i) lambda[i] = std::sqrt(std::max(0.0, es.eigenvalues()[i]));
  std::sort(lambda.begin(), lambda.end(), std::greater<>());
  return std::max(0.0, lambda[0] - lambda[1] - lambda[2] - lambda[3]);
}

double concurrence(const TwoQubitState& state) { return concurrence(state.rho); }

BoundReport bound_check(const TwoQubitState& state) {
  BoundReport r;
  r.max_fidelity = -1.0;
  for (BellState b : {BellState::phi_plus, BellState::phi_minus, BellState::psi_plus, BellState::psi_minus}) {
    const double f = fidelity(state, b);
    if (f > r.max_fidelity) {
      r.max_fidelity = f;
      r.best = b;
    }
  }
  r.concurrence = concurrence(state);
  r.slack = 0.5 * (1.0 + r.concurrence) - r.max_fidelity;
  r.holds = r.slack + 1e-9 >= 0.0;
  return r;
}

}  // namespace esr

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "esr/model.hpp"
#include "esr/units.hpp"

namespace esr {

using Matrix4 = Eigen::Matrix4cd;

/// Digital basis |00>, |01>, |10>, |11>; the first digit is the transport spin, the second the
/// spin site, both quantized along the model axis with down -> 0 and up -> 1.
struct TwoQubitState {
  Matrix4 rho = Matrix4::Zero();  // renormalized charge-1 block
  Matrix4 raw = Matrix4::Zero();  // same block before renormalization
  double leakage = 0.0;           // weight outside the charge-1 block
  bool leakage_warning = false;   // leakage > 0.5
};

enum class BellState { phi_plus, phi_minus, psi_plus, psi_minus };

std::string bell_name(BellState b);
Eigen::Vector4cd bell_vector(BellState b);

/// Eigenstate index best matching each digital state |00>, |01>, |10>, |11>.
/// Requires exactly four charge-1 eigenstates (a transport orbital and one spin-1/2 site).
std::array<std::size_t, 4> qubit_eigenstates(const EigenBasis& basis);

/// Maps eigenbasis amplitudes of the charge-1 block onto the digital basis: column d holds
/// <k|d> for the charge-1 eigenstates k in ascending order.
Eigen::Matrix4cd digital_overlaps(const EigenBasis& basis);

TwoQubitState reduce_to_qubits(const Matrix& rho_full, const EigenBasis& basis);
/// Wraps a 4x4 density matrix already expressed in the digital basis.
TwoQubitState two_qubit_state(const Matrix4& rho4);

double fidelity(const TwoQubitState& state, BellState target = BellState::phi_plus);
/// Overlap with the target without renormalizing away the leakage.
double fidelity_raw(const TwoQubitState& state, BellState target = BellState::phi_plus);

/// Wootters concurrence; complex conjugation is taken in the digital basis.
double concurrence(const TwoQubitState& state);
double concurrence(const Matrix4& rho4);

struct BoundReport {
  double max_fidelity = 0.0;
  BellState best = BellState::phi_plus;
  double concurrence = 0.0;
  double slack = 0.0;  // (1 + C)/2 - max F
  bool holds = true;   // (1 + C)/2 + 1e-9 >= max F
};

BoundReport bound_check(const TwoQubitState& state);

}  // namespace esr

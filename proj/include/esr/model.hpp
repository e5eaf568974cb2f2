#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "esr/units.hpp"

namespace esr {

/// Single transport orbital with onsite repulsion and its own Zeeman term.
struct TransportOrbitalSpec {
  double epsilon_up_mev = 0.0;
  double epsilon_down_mev = 0.0;
  double coulomb_u_mev = 0.0;
  Vec3 g_factors{2.0, 2.0, 2.0};
  Vec3 b_field{0.0, 0.0, 0.0};  // tesla
};

/// Coefficients B_k^q (meV) of the supported Stevens operators.
struct StevensCoefficients {
  double b20 = 0.0;
  double b22 = 0.0;
  double b40 = 0.0;
  double b44 = 0.0;
};

struct SpinSiteSpec {
  double spin = 0.5;
  Vec3 g_factors{2.0, 2.0, 2.0};
  Vec3 b_field{0.0, 0.0, 0.0};  // tesla
  StevensCoefficients stevens;
};

/// J^chi S_a^chi S_b^chi, counted once per pair. Site 0 is the transport orbital.
struct ExchangeCoupling {
  int site_a = 0;
  int site_b = 1;
  Vec3 j_ghz{0.0, 0.0, 0.0};
};

struct QuantumImpurityModel {
  TransportOrbitalSpec transport;
  std::vector<SpinSiteSpec> sites;
  std::vector<ExchangeCoupling> exchanges;
  // Axis along which digital (qubit) labels and the reference product basis are quantized.
  Vec3 quantization_axis{1.0, 0.0, 0.0};

  /// Throws ValidationError on any violated invariant.
  void validate() const;
  std::size_t dimension() const;
};

enum class Occupation : int { empty = 0, up = 1, down = 2, doubly = 3 };

int charge_of(Occupation occ);

struct BasisState {
  Occupation occupation = Occupation::empty;
  std::vector<double> projections;  // S^z eigenvalue per spin site

  std::string label() const;
};

/// Product basis: transport occupation varies slowest, then site 1, site 2, ...
/// Site projections run from +S down to -S.
class BasisCatalog {
 public:
  BasisCatalog() = default;
  BasisCatalog(std::vector<int> site_dims, std::vector<double> site_spins);

  std::size_t size() const { return states_.size(); }
  const BasisState& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<int>& site_dimensions() const { return site_dims_; }
  const std::vector<double>& site_spins() const { return site_spins_; }
  int charge(std::size_t i) const { return charge_of(states_[i].occupation); }

 private:
  std::vector<int> site_dims_;
  std::vector<double> site_spins_;
  std::vector<BasisState> states_;
};

inline constexpr std::size_t default_basis_cap = 4096;

BasisCatalog build_basis(const QuantumImpurityModel& model, std::size_t cap = default_basis_cap);

/// Spin matrices (S^x, S^y, S^z) for spin S in the |S,m> basis, m = S..-S.
std::array<Matrix, 3> spin_matrices(double spin);

/// Stevens operator O_k^q for (k,q) in {(2,0),(2,2),(4,0),(4,4)}.
Matrix stevens_operator(int k, int q, double spin);

/// Operators of the impurity expressed in the product basis.
struct ProductOperators {
  std::array<Matrix, 2> d;  // annihilators, index 0 = up, 1 = down
  Matrix number;
  // spins[0] is the transport spin s, spins[i] the spin of site i.
  std::vector<std::array<Matrix, 3>> spins;
};

ProductOperators product_operators(const QuantumImpurityModel& model, const BasisCatalog& catalog);

Matrix assemble_hamiltonian(const QuantumImpurityModel& model);
Matrix assemble_hamiltonian(const QuantumImpurityModel& model, const BasisCatalog& catalog,
                            const ProductOperators& ops);

/// Product states quantized along the model's quantization axis, as columns in the
/// product (S^z) basis. Same ordering as BasisCatalog with "up"/"+m" meaning along the axis.
Matrix axis_product_basis(const QuantumImpurityModel& model, const BasisCatalog& catalog);

struct Eigensystem {
  RealVector energies;       // ascending, ground state at 0
  double ground_offset = 0;  // raw ground-state energy removed from energies
  Matrix vectors;            // columns are eigenvectors
  std::vector<std::size_t> permutation;  // dominant input basis index per eigenvector
};

/// Hermitian eigendecomposition. Degenerate subspaces are resolved by projecting the
/// columns of `reference` in order and re-orthonormalizing; each eigenvector is phased so
/// that its largest overlap with `reference` is real positive.
Eigensystem diagonalize(const Matrix& h, const Matrix& reference);
Eigensystem diagonalize(const Matrix& h);

struct EigenBasis {
  Eigensystem system;
  BasisCatalog catalog;
  std::vector<int> charge_of_state;
  std::array<Matrix, 2> d;  // <l| d_sigma |j>
  Matrix number;
  std::vector<std::array<Matrix, 3>> spins;  // <l| S_i^chi |j>, i = 0 transport
  Matrix reference_basis;                    // axis product states in the product basis

  std::size_t size() const { return static_cast<std::size_t>(system.energies.size()); }
  const RealVector& energies() const { return system.energies; }
  /// E_l - E_j in GHz.
  double gap(std::size_t l, std::size_t j) const { return system.energies[l] - system.energies[j]; }
  std::vector<std::size_t> states_with_charge(int charge) const;
};

EigenBasis make_eigen_basis(const QuantumImpurityModel& model);

/// V^dagger op V for the eigenvector matrix of `basis`.
Matrix operator_in_eigenbasis(const Matrix& op, const EigenBasis& basis);

}  // namespace esr

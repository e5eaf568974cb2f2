#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "esr/model.hpp"
#include "esr/pulse.hpp"
#include "esr/units.hpp"

namespace esr {

struct ElectrodeSpec {
  std::string label = "tip";  // "tip" or "substrate"
  double temperature_k = 1.0;
  double chemical_potential_mev = 0.0;
  double base_rate_uev = 0.0;  // total coupling gamma_alpha summed over spin
  Vec3 spin_polarization{0.0, 0.0, 0.0};
  double drive_amplitude = 0.0;  // A_alpha

  void validate() const;
  double kt_ghz() const { return units::kelvin_to_ghz(temperature_k); }
  double mu_ghz() const { return units::mev_to_ghz(chemical_potential_mev); }
  /// 1/2 (1 + p.sigma), rows and columns ordered (up, down).
  Eigen::Matrix2cd polarization_matrix() const;
};

/// Tip and substrate with a symmetric bias drop: mu_tip = +V/2, mu_substrate = -V/2.
std::vector<ElectrodeSpec> symmetric_bias_electrodes(double bias_mv, ElectrodeSpec tip, ElectrodeSpec substrate);

struct RateOptions {
  // Imaginary (energy-shift) parts of the rates.
  bool principal_value = false;
  // Lorentzian half-width of the level broadening in ueV; 0 gives plain Fermi factors.
  double level_broadening_uev = 0.0;
  // Electrode band runs over [-W, W] in meV.
  double bandwidth_mev = 1000.0;
  // Pairs of transitions with different energies use the geometric mean of their
  // occupations and the shift at their mean energy (completely positive generator).
  // When false, each term takes the Fermi transform of its right-hand transition only.
  bool symmetric_energies = true;
};

/// Fermi function, stable for arbitrarily large |E - mu| / kT.
double fermi_occupation(double energy_ghz, const ElectrodeSpec& electrode);
double fermi_occupation(double energy_ghz, double mu_ghz, double kt_ghz);

/// Half-line transforms of the electrode correlation functions.
///   particle(e) = 1/2 f~(e) + i/(2 pi) PV int f(x) K(x - e) dx         (electron enters)
///   hole(e)     = 1/2 (1-f)~(e) - i/(2 pi) PV int (1 - f(x)) K(x - e) dx (electron leaves)
/// with f~ the Lorentzian-smeared occupation and K(y) = y / (y^2 + eta^2).
struct FermiTransform {
  cplx particle;
  cplx hole;
};

FermiTransform fermi_transform(double energy_ghz, const ElectrodeSpec& electrode, const RateOptions& options);

/// Gamma_{vl,ju} for each electrode, flattened as ((v*n + l)*n + j)*n + u, in GHz.
class RateTensor {
 public:
  RateTensor() = default;
  explicit RateTensor(std::size_t n) : n_(n) {}

  std::size_t dimension() const { return n_; }
  std::size_t index(std::size_t v, std::size_t l, std::size_t j, std::size_t u) const {
    return ((v * n_ + l) * n_ + j) * n_ + u;
  }

  void add_electrode(std::string label, std::vector<cplx> gamma);
  std::size_t electrode_count() const { return labels_.size(); }
  const std::string& label(std::size_t e) const { return labels_[e]; }
  std::size_t electrode_index(const std::string& label) const;
  const std::vector<cplx>& electrode(std::size_t e) const { return gamma_[e]; }

  /// Sum over electrodes.
  std::vector<cplx> total() const;
  /// Copy restricted to one electrode.
  RateTensor only(std::size_t e) const;
  /// Copy with electrode e scaled by factors[e].
  RateTensor scaled(const std::vector<double>& factors) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::string> labels_;
  std::vector<std::vector<cplx>> gamma_;
};

/// Time-independent part of the rates; the drive enters as drive_factor^2 per electrode.
class RateModel {
 public:
  RateModel(const EigenBasis& basis, std::vector<ElectrodeSpec> electrodes, RateOptions options = {});

  const std::vector<ElectrodeSpec>& electrodes() const { return electrodes_; }
  const RateOptions& options() const { return options_; }
  const RateTensor& static_tensor() const { return static_; }

  /// drive_factor(t)^2 for every electrode on the given segment.
  std::vector<double> modulation(const PulseSegment& segment, double t) const;
  RateTensor at(const PulseProgram& program, double t) const;

 private:
  std::vector<ElectrodeSpec> electrodes_;
  RateOptions options_;
  RateTensor static_;
};

RateTensor build_rate_tensor(const EigenBasis& basis, const std::vector<ElectrodeSpec>& electrodes,
                             const PulseProgram& program, double t, const RateOptions& options = {});

/// Dissipative part of the master equation for one flattened tensor, in GHz (no 2 pi).
/// No validation of rho; linear in rho.
Matrix dissipator(const Matrix& rho, const std::vector<cplx>& gamma, std::size_t n);

/// d rho / dt in 1/ns. rho_lj = <l|rho|j>; the coherent part is -i 2 pi (E_l - E_j) rho_lj.
/// Throws NumericalError when |Tr rho - 1| > 1e-6.
Matrix qme_rhs(const Matrix& rho, const RateTensor& tensor, const EigenBasis& basis);

}  // namespace esr

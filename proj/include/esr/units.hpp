#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace esr {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

// Energies are carried as cyclic frequencies in GHz, times in ns.
namespace units {
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double bohr_magneton_ghz_per_tesla = 13.996245;
inline constexpr double boltzmann_ghz_per_kelvin = 20.836619;
inline constexpr double ghz_per_mev = 241.79893;
inline constexpr double ghz_per_uev = ghz_per_mev * 1e-3;
// One electron per ns expressed in pA.
inline constexpr double pa_per_electron_per_ns = 160.21766;

inline constexpr double mev_to_ghz(double mev) { return mev * ghz_per_mev; }
inline constexpr double uev_to_ghz(double uev) { return uev * ghz_per_uev; }
inline constexpr double kelvin_to_ghz(double k) { return k * boltzmann_ghz_per_kelvin; }
}  // namespace units

}  // namespace esr

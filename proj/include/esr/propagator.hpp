#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "esr/model.hpp"
#include "esr/pulse.hpp"
#include "esr/rates.hpp"
#include "esr/units.hpp"

namespace esr {

enum class InitialMode { ground, thermal, custom };

/// ground: projector on the lowest eigenstate. thermal: Gibbs state at temperature_k.
/// custom: diagonal weights in the eigenbasis, normalized.
Matrix initial_state(const EigenBasis& basis, InitialMode mode, double temperature_k = 1.0,
                     const std::vector<double>& weights = {});

/// Optional Hamiltonian drive a * toggle * scale * sum_k cos(2 pi f_k t + phase_k) * O, with O
/// given in the eigenbasis and a in GHz. Used for oracle runs that bypass the electrodes.
struct CoherentDrive {
  double amplitude_ghz = 0.0;
  Matrix op;
};

enum class Integrator { lawson_rk4, rk4 };

struct PropagationOptions {
  double dt = 0.0;                 // ns; 0 picks default_time_step()
  double sample_interval = 0.01;   // ns
  std::size_t rho_stride = 1;      // keep every n-th density matrix sample; 0 keeps none
  Integrator integrator = Integrator::lawson_rk4;
  std::optional<CoherentDrive> coherent_drive;
  // Called with every sample, stored or not; lets callers reduce rho on the fly.
  std::function<void(std::size_t sample, double t, const Matrix& rho)> observer;
};

struct DensityMatrixTrajectory {
  std::vector<double> times;                  // ns
  std::vector<std::size_t> rho_sample_index;  // sample index of each stored rho
  std::vector<Matrix> rho;
  Eigen::MatrixXd populations;        // samples x states
  Eigen::MatrixXd spin_expectations;  // samples x 3*(sites + 1); column 3*i + chi, i = 0 transport
  std::vector<std::string> current_labels;
  Eigen::MatrixXd current;  // samples x electrodes, pA
  Matrix final_rho;
  double dt = 0.0;
  std::size_t steps = 0;
};

/// 1 / (50 max(f)) over intra-charge gaps and drive frequencies of the program.
double default_time_step(const EigenBasis& basis, const PulseProgram& program);

/// Electron flow through one electrode in pA, positive for tip to substrate transport.
double electrode_current(const Matrix& rho, const RateTensor& tensor, const EigenBasis& basis,
                         const std::string& electrode);

DensityMatrixTrajectory propagate(const EigenBasis& basis, const RateModel& rates, const PulseProgram& program,
                                  const Matrix& rho0, const PropagationOptions& options = {});

DensityMatrixTrajectory propagate(const QuantumImpurityModel& model, const PulseProgram& program,
                                  const std::vector<ElectrodeSpec>& electrodes, const Matrix& rho0, double dt,
                                  const RateOptions& rate_options = {});

struct SweepOptions {
  double settle_time = 100.0;        // ns before averaging starts
  std::size_t periods_per_window = 0;  // drive periods per averaging window; 0 picks ~1 ns windows
  double tolerance = 1e-3;           // relative drift between the last two windows
  std::size_t threads = 0;           // 0 uses hardware concurrency
  PropagationOptions propagation;
};

struct SweepResult {
  std::vector<double> frequencies;  // GHz
  std::vector<double> dc_current;   // pA, tip electrode
  std::vector<bool> converged;
};

/// The template's single driven segment is retuned to each grid frequency.
SweepResult cw_spectrum(const EigenBasis& basis, const RateModel& rates, const PulseSegment& drive_template,
                        const std::vector<double>& frequency_grid, const Matrix& rho0,
                        const SweepOptions& options = {});

}  // namespace esr

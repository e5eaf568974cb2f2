#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "esr/gates.hpp"
#include "esr/model.hpp"
#include "esr/propagator.hpp"
#include "esr/rates.hpp"

namespace esr {

struct SimulationSettings {
  double dt = 0.0;  // ns; 0 picks the default step
  double sample_interval = 0.01;
  std::size_t rho_output_stride = 0;  // every n-th sample's density matrix written to disk; 0 writes none
  InitialMode initial_state = InitialMode::ground;
  std::vector<double> initial_weights;
  Integrator integrator = Integrator::lawson_rk4;
};

struct SweepSettings {
  double f_min = 15.0;  // GHz
  double f_max = 17.0;
  std::size_t points = 41;
  double settle_time = 100.0;
  std::size_t periods_per_window = 0;
  double tolerance = 1e-3;
  std::size_t threads = 0;
};

struct CalibrationSettings {
  std::vector<Transition> transitions;  // 0-based; empty selects the Bell-program pair
  double window = 0.0;
  double max_window = 20000.0;
  double max_residual = 1e-2;
};

/// Everything a run needs besides the pulse program.
struct RunConfiguration {
  QuantumImpurityModel model;
  double bias_mv = 0.0;
  ElectrodeSpec tip;
  ElectrodeSpec substrate;
  RateOptions rates;
  SimulationSettings simulation;
  SweepSettings sweep;
  CalibrationSettings calibration;

  /// Tip and substrate with chemical potentials +V/2 and -V/2.
  std::vector<ElectrodeSpec> electrodes() const;
  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

/// Flat "key value(s) ! comment" lines. Unknown keys, repeated keys and malformed values are
/// ParseErrors carrying the line number; the result is validated.
RunConfiguration parse_configuration(std::string_view text);
RunConfiguration load_configuration(const std::string& path);

/// Every key with its resolved value; parse_configuration reproduces the configuration.
std::string serialize_configuration(const RunConfiguration& config);

std::string read_text_file(const std::string& path);

}  // namespace esr

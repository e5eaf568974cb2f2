#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "esr/model.hpp"
#include "esr/propagator.hpp"
#include "esr/pulse.hpp"
#include "esr/rates.hpp"
#include "esr/units.hpp"

namespace esr {

using Unitary2 = Eigen::Matrix2cd;

/// Rotating-frame pulse unitary with zero global phase:
/// [[cos(theta/2), -i e^{i delta} sin(theta/2)], [-i e^{-i delta} sin(theta/2), cos(theta/2)]].
Unitary2 rotating_frame_unitary(double angle, double phase);

/// Lab-frame counterpart; larmor in GHz, t in ns. diag(1, e^{-i w0 t}) * lab equals the
/// rotating-frame matrix times e^{-i w0 t / 2}.
Unitary2 lab_frame_unitary(double angle, double phase, double larmor_ghz, double t);

/// diag(e^{-i psi/2}, e^{i psi/2})
Unitary2 z_rotation(double psi);

/// True when a = e^{i phi} b for some phi, entrywise to `tolerance`.
bool equal_up_to_phase(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double tolerance = 1e-12);
double phase_aligned_error(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// Eigenstate pair addressed by a pulse, 0-based indices in the eigenbasis.
using Transition = std::pair<std::size_t, std::size_t>;

struct RotationPulseSpec {
  Transition transition{0, 1};
  double angle = 0.0;  // theta = Omega t, radians
  double phase = 0.0;  // delta, radians
  double frequency_ghz = 0.0;

  /// Throws ValidationError unless angle > 0 and the frequency is within 0.1% of the gap.
  void validate(const EigenBasis& basis) const;
};

struct RabiCalibration {
  Transition transition{0, 1};
  double frequency_ghz = 0.0;  // resonance, E_j - E_i
  double rabi_ghz = 0.0;       // Omega / 2 pi
  double amplitude = 0.0;      // A in A sin^2(Omega t / 2) + B
  double offset = 0.0;         // B
  double fit_residual = 0.0;   // RMS of the fit

  double pi_time() const { return 0.5 / rabi_ghz; }
  double duration(double angle) const { return angle / (units::two_pi * rabi_ghz); }
};

using CalibrationSet = std::map<Transition, RabiCalibration>;

struct CalibrationOptions {
  double window = 0.0;  // ns of resonant driving; 0 starts at 200 ns and grows as needed
  double max_window = 20000.0;
  std::size_t min_periods = 3;
  double max_residual = 1e-2;
  double min_amplitude = 0.05;
  PropagationOptions propagation;
};

/// Fits p_j(t) = A sin^2(Omega t / 2) + B to a resonant run started in state i.
RabiCalibration fit_rabi(const std::vector<double>& times, const std::vector<double>& population);

RabiCalibration calibrate_rabi(const EigenBasis& basis, const RateModel& rates, Transition transition,
                               const CalibrationOptions& options = {});

enum class GateKind { x, y_half, y_minus_half, z, hadamard, hadamard_reversed, cnot };
enum class Qubit { transport, site };

GateKind parse_gate(const std::string& name);
std::string gate_name(GateKind gate);

/// Ideal single-qubit matrix of a named gate (CNOT excluded).
Unitary2 ideal_gate(GateKind gate);

/// Transition used for a gate, in terms of the charge-1 eigenstates |1>..|4> of a two-qubit
/// model: site gates 1-3, transport gates 1-2, CNOT controlled by the site 3-4, CNOT controlled
/// by the transport spin 2-4.
Transition gate_transition(const EigenBasis& basis, GateKind gate, Qubit qubit);

struct GateFragment {
  std::vector<PulseSegment> segments;
  std::vector<RotationPulseSpec> pulses;
  double end_time = 0.0;
  double frame_phase = 0.0;  // accumulated virtual-Z phase after the fragment
  /// Product of the pulse unitaries, including the trailing frame rotation.
  Unitary2 unitary = Unitary2::Identity();
};

/// Pulses for one gate starting at start_time with the given incoming frame phase.
GateFragment compile_gate(GateKind gate, Qubit qubit, const EigenBasis& basis, const CalibrationSet& calibrations,
                          double start_time, double frame_phase = 0.0);

/// Back-to-back fragments for a gate list, closed by free evolution up to t_final.
PulseProgram compile_circuit(const std::vector<std::pair<GateKind, Qubit>>& gates, const EigenBasis& basis,
                             const CalibrationSet& calibrations, double t_final);

/// pi at w13 (delta 0), pi/2 at w13 (delta = second_pulse_phase), pi at w34 (delta 0), free
/// evolution until t_final.
PulseProgram bell_state_program(const EigenBasis& basis, const CalibrationSet& calibrations, double t_final,
                                double second_pulse_phase = units::two_pi / 4.0);

}  // namespace esr

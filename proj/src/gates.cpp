#include "esr/gates.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_min.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "esr/entanglement.hpp"
#include "esr/error.hpp"
#include "esr/spectral.hpp"

namespace esr {

namespace {

// Pulse boundaries sit on a 1 fs grid so pulse files stay readable; far below any time step.
double on_time_grid(double t) { return std::round(t * 1e6) / 1e6; }

constexpr double pi = std::numbers::pi;
const cplx I{0.0, 1.0};

double wrap_phase(double phase) {
  double p = std::remainder(phase, 2.0 * pi);
  if (p <= -pi) p += 2.0 * pi;
  return p;
}

std::string transition_name(Transition t) {
  return std::to_string(t.first + 1) + "-" + std::to_string(t.second + 1);
}

struct FitResult {
  double omega = 0.0;  // rad/ns
  double a = 0.0;      // p = a + b cos(omega t)
  double b = 0.0;
  double sse = 0.0;
};

FitResult linear_fit(const std::vector<double>& t, const std::vector<double>& p, double omega) {
  double s1 = 0, sc = 0, scc = 0, sp = 0, spc = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double c = std::cos(omega * t[i]);
    s1 += 1.0;
    sc += c;
    scc += c * c;
    sp += p[i];
    spc += p[i] * c;
  }
  const double det = s1 * scc - sc * sc;
  FitResult r;
  r.omega = omega;
  if (std::abs(det) < 1e-300) {
    r.a = sp / s1;
    r.b = 0.0;
  } else {
    r.a = (scc * sp - sc * spc) / det;
    r.b = (s1 * spc - sc * sp) / det;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = p[i] - r.a - r.b * std::cos(omega * t[i]);
    r.sse += e * e;
  }
  return r;
}

struct FitData {
  const std::vector<double>* t;
  const std::vector<double>* p;
};

double sse_at(double omega, void* params) {
  const auto* d = static_cast<FitData*>(params);
  return linear_fit(*d->t, *d->p, omega).sse;
}

}  // namespace

Unitary2 rotating_frame_unitary(double angle, double phase) {
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  Unitary2 u;
  u << c, -I * std::exp(I * phase) * s, -I * std::exp(-I * phase) * s, c;
  return u;
}

Unitary2 lab_frame_unitary(double angle, double phase, double larmor_ghz, double t) {
  const double w0t = units::two_pi * larmor_ghz * t;
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  const cplx e = std::exp(I * w0t);
  Unitary2 u;
  u << c, -I * std::exp(I * phase) * s, -I * std::exp(-I * phase) * e * s, e * c;
  return std::exp(-0.5 * I * w0t) * u;
}

Unitary2 z_rotation(double psi) {
  Unitary2 u = Unitary2::Zero();
  u(0, 0) = std::exp(-0.5 * I * psi);
  u(1, 1) = std::exp(0.5 * I * psi);
  return u;
}

double phase_aligned_error(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  const cplx overlap = (b.adjoint() * a).trace();
  const cplx phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : cplx{1.0, 0.0};
  return (a - phase * b).cwiseAbs().maxCoeff();
}

bool equal_up_to_phase(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double tolerance) {
  return phase_aligned_error(a, b) < tolerance;
}

void RotationPulseSpec::validate(const EigenBasis& basis) const {
  const auto [i, j] = transition;
  if (i >= basis.size() || j >= basis.size() || i == j)
    throw ValidationError("pulse transition " + transition_name(transition) + " is not a pair of eigenstates");
  if (!(angle > 0.0)) throw ValidationError("pulse angle must be positive");
  const double gap = std::abs(basis.gap(j, i));
  if (std::abs(frequency_ghz - gap) > 1e-3 * gap) {
    std::ostringstream os;
    os << "pulse frequency " << frequency_ghz << " GHz is off resonance with transition "
       << transition_name(transition) << " (" << gap << " GHz)";
    throw ValidationError(os.str());
  }
}

RabiCalibration fit_rabi(const std::vector<double>& times, const std::vector<double>& population) {
  if (times.size() != population.size() || times.size() < 16)
    throw CalibrationError("Rabi fit needs at least 16 samples");
  const double spacing = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  const Spectrum spec = amplitude_spectrum(population, spacing, 8);
  const double guess = units::two_pi * dominant_frequency(spec);

  FitData data{&times, &population};
  // Coarse scan around the spectral guess, then Brent refinement of the best bracket.
  const double lo = 0.5 * guess;
  const double hi = 1.5 * guess;
  constexpr int grid = 400;
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= grid; ++k) {
    const double w = lo + (hi - lo) * k / grid;
    const double v = sse_at(w, &data);
    if (v < best_sse) {
      best_sse = v;
      best = k;
    }
  }
  double omega = lo + (hi - lo) * best / grid;
  if (best > 0 && best < grid) {
    const double a = lo + (hi - lo) * (best - 1) / grid;
    const double b = lo + (hi - lo) * (best + 1) / grid;
    gsl_function fn{&sse_at, &data};
    gsl_error_handler_t* previous = gsl_set_error_handler_off();
    gsl_min_fminimizer* m = gsl_min_fminimizer_alloc(gsl_min_fminimizer_brent);
    if (gsl_min_fminimizer_set(m, &fn, omega, a, b) == GSL_SUCCESS) {
      for (int it = 0; it < 200; ++it) {
        gsl_min_fminimizer_iterate(m);
        if (gsl_min_test_interval(gsl_min_fminimizer_x_lower(m), gsl_min_fminimizer_x_upper(m), 0.0, 1e-12) ==
            GSL_SUCCESS)
          break;
      }
      omega = gsl_min_fminimizer_x_minimum(m);
    }
    gsl_min_fminimizer_free(m);
    gsl_set_error_handler(previous);
  }

  const FitResult fit = linear_fit(times, population, omega);
  RabiCalibration cal;
  cal.rabi_ghz = omega / units::two_pi;
  cal.amplitude = -2.0 * fit.b;
  cal.offset = fit.a + fit.b;
  cal.fit_residual = std::sqrt(fit.sse / static_cast<double>(times.size()));
  return cal;
}

RabiCalibration calibrate_rabi(const EigenBasis& basis, const RateModel& rates, Transition transition,
                               const CalibrationOptions& options) {
  const auto [i, j] = transition;
  if (i >= basis.size() || j >= basis.size() || i == j)
    throw CalibrationError("transition " + transition_name(transition) + " does not name two eigenstates");
  const double frequency = std::abs(basis.gap(j, i));
  std::vector<double> weights(basis.size(), 0.0);
  weights[i] = 1.0;
  const Matrix rho0 = initial_state(basis, InitialMode::custom, 1.0, weights);

  double window = options.window > 0.0 ? options.window : 200.0;
  for (;;) {
    PulseProgram program{0.0, window, 1, {PulseSegment{0.0, window, 1.0, {Tone{frequency, 0.0}}}}};
    PropagationOptions prop = options.propagation;
    prop.sample_interval = window / 4000.0;
    prop.rho_stride = 0;
    const DensityMatrixTrajectory traj = propagate(basis, rates, program, rho0, prop);
    std::vector<double> pj(traj.times.size());
    for (std::size_t k = 0; k < pj.size(); ++k) pj[k] = traj.populations(static_cast<Eigen::Index>(k), j);

    const double swing = *std::max_element(pj.begin(), pj.end()) - *std::min_element(pj.begin(), pj.end());
    if (swing < options.min_amplitude)
      throw CalibrationError("no Rabi oscillation detected on transition " + transition_name(transition));

    RabiCalibration cal = fit_rabi(traj.times, pj);
    cal.transition = transition;
    cal.frequency_ghz = frequency;
    const double periods = window * cal.rabi_ghz;
    if (periods + 1e-9 < static_cast<double>(options.min_periods)) {
      const double needed = 1.1 * static_cast<double>(options.min_periods) / cal.rabi_ghz;
      const double next = std::max(2.0 * window, needed);
      if (window >= options.max_window)
        throw CalibrationError("transition " + transition_name(transition) + " needs more than " +
                               std::to_string(options.max_window) + " ns for three Rabi periods");
      window = std::min(next, options.max_window);
      continue;
    }
    if (std::abs(cal.amplitude) < options.min_amplitude)
      throw CalibrationError("no Rabi oscillation detected on transition " + transition_name(transition));
    if (cal.fit_residual > options.max_residual) {
      std::ostringstream os;
      os << "Rabi fit on transition " << transition_name(transition) << " rejected: residual " << cal.fit_residual;
      throw CalibrationError(os.str());
    }
    return cal;
  }
}

GateKind parse_gate(const std::string& name) {
  if (name == "X") return GateKind::x;
  if (name == "Y^1/2" || name == "Y1/2" || name == "sqrtY") return GateKind::y_half;
  if (name == "Y^-1/2" || name == "Y-1/2") return GateKind::y_minus_half;
  if (name == "Z") return GateKind::z;
  if (name == "H" || name == "Hadamard") return GateKind::hadamard;
  if (name == "H'" || name == "Hadamard'" || name == "H_reversed") return GateKind::hadamard_reversed;
  if (name == "CNOT") return GateKind::cnot;
  throw ValidationError("unsupported gate '" + name + "'");
}

std::string gate_name(GateKind gate) {
  switch (gate) {
    case GateKind::x:
      return "X";
    case GateKind::y_half:
      return "Y^1/2";
    case GateKind::y_minus_half:
      return "Y^-1/2";
    case GateKind::z:
      return "Z";
    case GateKind::hadamard:
      return "H";
    case GateKind::hadamard_reversed:
      return "H'";
    case GateKind::cnot:
      return "CNOT";
  }
  return "?";
}

Unitary2 ideal_gate(GateKind gate) {
  const double r = 1.0 / std::sqrt(2.0);
  Unitary2 u;
  switch (gate) {
    case GateKind::x:
    case GateKind::cnot:  // action on the target within the control-1 subspace
      u << 0, 1, 1, 0;
      break;
    case GateKind::y_half:
      u << r, -r, r, r;
      break;
    case GateKind::y_minus_half:
      u << r, r, -r, r;
      break;
    case GateKind::z:
      u << 1, 0, 0, -1;
      break;
    case GateKind::hadamard:
    case GateKind::hadamard_reversed:
      u << r, r, r, -r;
      break;
  }
  return u;
}

Transition gate_transition(const EigenBasis& basis, GateKind gate, Qubit qubit) {
  const auto q = qubit_eigenstates(basis);  // digits 00, 01, 10, 11
  if (gate == GateKind::cnot) return qubit == Qubit::site ? Transition{q[1], q[3]} : Transition{q[2], q[3]};
  return qubit == Qubit::site ? Transition{q[0], q[1]} : Transition{q[0], q[2]};
}

GateFragment compile_gate(GateKind gate, Qubit qubit, const EigenBasis& basis, const CalibrationSet& calibrations,
                          double start_time, double frame_phase) {
  GateFragment frag;
  frag.end_time = start_time;
  frag.frame_phase = frame_phase;
  if (gate == GateKind::z) {
    frag.frame_phase = wrap_phase(frame_phase + pi);
    frag.unitary = z_rotation(frag.frame_phase) * z_rotation(-frame_phase);
    return frag;
  }

  const Transition tr = gate_transition(basis, gate, qubit);
  const auto it = calibrations.find(tr);
  if (it == calibrations.end())
    throw CalibrationError("missing Rabi calibration for transition " + transition_name(tr) + " (" +
                           gate_name(gate) + ")");
  const RabiCalibration& cal = it->second;

  std::vector<std::pair<double, double>> rotations;  // (angle, logical phase), in time order
  switch (gate) {
    case GateKind::x:
    case GateKind::cnot:
      rotations = {{pi, 0.0}};
      break;
    case GateKind::y_half:
      rotations = {{0.5 * pi, -0.5 * pi}};
      break;
    case GateKind::y_minus_half:
      rotations = {{0.5 * pi, 0.5 * pi}};
      break;
    case GateKind::hadamard:
      rotations = {{0.5 * pi, -0.5 * pi}, {pi, 0.0}};
      break;
    case GateKind::hadamard_reversed:
      rotations = {{pi, 0.0}, {0.5 * pi, 0.5 * pi}};
      break;
    case GateKind::z:
      break;
  }

  Unitary2 physical = Unitary2::Identity();
  for (const auto& [angle, phase] : rotations) {
    RotationPulseSpec spec{tr, angle, wrap_phase(phase + frame_phase), cal.frequency_ghz};
    spec.validate(basis);
    const double t0 = frag.end_time;
    const double t1 = on_time_grid(t0 + cal.duration(angle));
    frag.segments.push_back(PulseSegment{t0, t1, 1.0, {Tone{spec.frequency_ghz, spec.phase}}});
    frag.pulses.push_back(spec);
    physical = rotating_frame_unitary(angle, spec.phase) * physical;
    frag.end_time = t1;
  }
  frag.unitary = z_rotation(frame_phase) * physical * z_rotation(-frame_phase);
  return frag;
}

PulseProgram compile_circuit(const std::vector<std::pair<GateKind, Qubit>>& gates, const EigenBasis& basis,
                             const CalibrationSet& calibrations, double t_final) {
  PulseProgram program;
  program.t_initial = 0.0;
  program.t_final = t_final;
  program.max_frequencies = 1;
  double t = 0.0;
  std::array<double, 2> frame{0.0, 0.0};
  Tone last{};
  for (const auto& [gate, qubit] : gates) {
    // CNOT acts on the target qubit's transition, whose frame is the other qubit's.
    double& phase = frame[qubit == Qubit::site ? 1 : 0];
    const GateFragment frag = compile_gate(gate, qubit, basis, calibrations, t, gate == GateKind::cnot ? 0.0 : phase);
    if (gate != GateKind::cnot) phase = frag.frame_phase;
    for (const auto& seg : frag.segments) {
      program.segments.push_back(seg);
      last = seg.tones.front();
    }
    t = frag.end_time;
  }
  if (t_final < t - 1e-9) {
    std::ostringstream os;
    os << "circuit needs " << t << " ns but the program ends at " << t_final << " ns";
    throw ValidationError(os.str());
  }
  if (t_final > t + 1e-9) program.segments.push_back(PulseSegment{t, t_final, 0.0, {Tone{last.frequency_ghz, 0.0}}});
  if (program.segments.empty()) throw ValidationError("empty circuit");
  program.validate();
  return program;
}

PulseProgram bell_state_program(const EigenBasis& basis, const CalibrationSet& calibrations, double t_final,
                                double second_pulse_phase) {
  const Transition single = gate_transition(basis, GateKind::x, Qubit::site);
  const Transition cnot = gate_transition(basis, GateKind::cnot, Qubit::site);
  const auto find = [&](Transition tr) -> const RabiCalibration& {
    const auto it = calibrations.find(tr);
    if (it == calibrations.end())
      throw CalibrationError("missing Rabi calibration for transition " + transition_name(tr));
    return it->second;
  };
  const RabiCalibration& c13 = find(single);
  const RabiCalibration& c34 = find(cnot);

  PulseProgram program;
  program.t_initial = 0.0;
  program.t_final = t_final;
  program.max_frequencies = 1;
  const double t1 = on_time_grid(c13.duration(pi));
  const double t2 = on_time_grid(t1 + c13.duration(0.5 * pi));
  const double t3 = on_time_grid(t2 + c34.duration(pi));
  if (t_final <= t3) throw ValidationError("Bell program needs t_final beyond the last pulse");
  program.segments = {
      PulseSegment{0.0, t1, 1.0, {Tone{c13.frequency_ghz, 0.0}}},
      PulseSegment{t1, t2, 1.0, {Tone{c13.frequency_ghz, second_pulse_phase}}},
      PulseSegment{t2, t3, 1.0, {Tone{c34.frequency_ghz, 0.0}}},
      PulseSegment{t3, t_final, 0.0, {Tone{c34.frequency_ghz, 0.0}}},
  };
  program.validate();
  return program;
}

}  // namespace esr

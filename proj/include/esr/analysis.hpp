#pragma once

#include <cstddef>
#include <vector>

#include "esr/entanglement.hpp"
#include "esr/model.hpp"
#include "esr/pulse.hpp"

namespace esr {

struct SampleMetrics {
  double fidelity = 0.0;      // against phi+, renormalized block
  double fidelity_raw = 0.0;  // against phi+, leakage kept
  double concurrence = 0.0;
  double bound_slack = 0.0;   // (1 + C)/2 - max F over the Bell states
  double leakage = 0.0;
};

/// Two-qubit metrics per propagation sample. Usable directly as PropagationOptions::observer.
class MetricsRecorder {
 public:
  explicit MetricsRecorder(const EigenBasis& basis) : basis_(&basis) {}

  void operator()(std::size_t sample, double t, const Matrix& rho);

  const std::vector<double>& times() const { return times_; }
  const std::vector<SampleMetrics>& samples() const { return samples_; }

 private:
  const EigenBasis* basis_;
  std::vector<double> times_;
  std::vector<SampleMetrics> samples_;
};

SampleMetrics evaluate_metrics(const Matrix& rho, const EigenBasis& basis);

struct EntanglementSummary {
  double peak_fidelity = 0.0;
  double peak_fidelity_time = 0.0;
  double peak_concurrence = 0.0;
  double peak_concurrence_time = 0.0;
  double min_bound_slack = 0.0;
  bool bound_holds = true;  // slack >= -1e-9 at every sample
  double max_leakage = 0.0;
  double free_evolution_start = 0.0;  // end of the last driven segment
  double fidelity_oscillation_ghz = 0.0;  // dominant FFT line of F after the last pulse; 0 if too short
  double decay_time_ns = 0.0;             // exponential fit of C after the last pulse; 0 if no fit
};

EntanglementSummary summarize(const std::vector<double>& times, const std::vector<SampleMetrics>& samples,
                              const PulseProgram& program);

/// Least-squares fit of log y = log a - (t - t0)/tau over samples with t >= t0 and y > 0.
/// Returns tau, or 0 when fewer than two points qualify or the data do not decay.
double exponential_decay_time(const std::vector<double>& times, const std::vector<double>& values, double t0);

}  // namespace esr

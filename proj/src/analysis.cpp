#include "esr/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "esr/spectral.hpp"

namespace esr {

SampleMetrics evaluate_metrics(const Matrix& rho, const EigenBasis& basis) {
  const TwoQubitState q = reduce_to_qubits(rho, basis);
  const BoundReport bound = bound_check(q);
  SampleMetrics m;
  m.fidelity = fidelity(q);
  m.fidelity_raw = fidelity_raw(q);
  m.concurrence = bound.concurrence;
  m.bound_slack = bound.slack;
  m.leakage = q.leakage;
  return m;
}

void MetricsRecorder::operator()(std::size_t, double t, const Matrix& rho) {
  times_.push_back(t);
  samples_.push_back(evaluate_metrics(rho, *basis_));
}

double exponential_decay_time(const std::vector<double>& times, const std::vector<double>& values, double t0) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < times.size() && i < values.size(); ++i) {
    if (times[i] < t0 || !(values[i] > 0.0)) continue;
    const double x = times[i] - t0;
    const double y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  if (!(denom > 0.0)) return 0.0;
  const double slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
  return slope < 0.0 ? -1.0 / slope : 0.0;
}

EntanglementSummary summarize(const std::vector<double>& times, const std::vector<SampleMetrics>& samples,
                              const PulseProgram& program) {
  EntanglementSummary s;
  s.min_bound_slack = samples.empty() ? 0.0 : samples.front().bound_slack;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SampleMetrics& m = samples[i];
    if (m.fidelity > s.peak_fidelity) {
      s.peak_fidelity = m.fidelity;
      s.peak_fidelity_time = times[i];
    }
    if (m.concurrence > s.peak_concurrence) {
      s.peak_concurrence = m.concurrence;
      s.peak_concurrence_time = times[i];
    }
    s.min_bound_slack = std::min(s.min_bound_slack, m.bound_slack);
    s.max_leakage = std::max(s.max_leakage, m.leakage);
  }
  s.bound_holds = s.min_bound_slack >= -1e-9;

  s.free_evolution_start = program.t_initial;
  for (const auto& seg : program.segments)
    if (seg.driven()) s.free_evolution_start = seg.t_end;

  std::vector<double> f_tail, c_tail, t_tail;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (times[i] < s.free_evolution_start) continue;
    t_tail.push_back(times[i]);
    f_tail.push_back(samples[i].fidelity);
    c_tail.push_back(samples[i].concurrence);
  }
  if (t_tail.size() >= 16) {
    const double spacing = (t_tail.back() - t_tail.front()) / static_cast<double>(t_tail.size() - 1);
    s.fidelity_oscillation_ghz = dominant_frequency(amplitude_spectrum(f_tail, spacing));
  }
  s.decay_time_ns = exponential_decay_time(t_tail, c_tail, s.free_evolution_start);
  return s;
}

}  // namespace esr

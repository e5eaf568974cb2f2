#include "esr/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>

namespace esr {

namespace {
// FFTW planning is not thread safe.
std::mutex planner_mutex;
}  // namespace

Spectrum amplitude_spectrum(const std::vector<double>& samples, double spacing, std::size_t zero_padding) {
  if (samples.size() < 2) throw std::invalid_argument("spectrum needs at least two samples");
  if (!(spacing > 0.0)) throw std::invalid_argument("sample spacing must be positive");
  const std::size_t n = samples.size() * std::max<std::size_t>(1, zero_padding);
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());

  std::vector<double> in(n, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) in[i] = samples[i] - mean;
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan);
  }

  Spectrum s;
  s.resolution = 1.0 / (static_cast<double>(n) * spacing);
  s.frequencies.resize(out.size());
  s.magnitude.resize(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    s.frequencies[k] = static_cast<double>(k) * s.resolution;
    s.magnitude[k] = std::abs(out[k]) / static_cast<double>(samples.size());
  }
  return s;
}

double dominant_frequency(const Spectrum& spectrum) {
  const auto& m = spectrum.magnitude;
  if (m.size() < 3) throw std::invalid_argument("spectrum too short");
  const auto it = std::max_element(m.begin() + 1, m.end());
  const auto k = static_cast<std::size_t>(it - m.begin());
  double shift = 0.0;
  if (k + 1 < m.size()) {
    const double a = m[k - 1];
    const double b = m[k];
    const double c = m[k + 1];
    const double denom = a - 2.0 * b + c;
    if (denom != 0.0) shift = 0.5 * (a - c) / denom;
  }
  return (static_cast<double>(k) + shift) * spectrum.resolution;
}

std::size_t nearest_bin(const Spectrum& spectrum, double f) {
  const double k = std::round(f / spectrum.resolution);
  return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(spectrum.magnitude.size() - 1)));
}

}  // namespace esr

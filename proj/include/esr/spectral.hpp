#pragma once

#include <cstddef>
#include <vector>

namespace esr {

struct Spectrum {
  std::vector<double> frequencies;  // GHz for samples in ns
  std::vector<double> magnitude;    // |DFT| normalized by the sample count
  double resolution = 0.0;          // bin width
};

/// One-sided magnitude spectrum of uniformly spaced real samples. The mean is removed first;
/// zero_padding > 1 interpolates the spectrum on a finer grid.
Spectrum amplitude_spectrum(const std::vector<double>& samples, double spacing, std::size_t zero_padding = 1);

/// Frequency of the largest non-DC bin, refined by a parabola through its neighbours.
double dominant_frequency(const Spectrum& spectrum);

/// Index of the bin nearest to f.
std::size_t nearest_bin(const Spectrum& spectrum, double f);

}  // namespace esr

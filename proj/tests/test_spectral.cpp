#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "esr/spectral.hpp"

using namespace esr;

TEST_CASE("pure tone") {
  const double f0 = 31.52;
  const double dt = 0.01;
  std::vector<double> x(4000);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = 3.0 + 0.2 * std::cos(2.0 * std::numbers::pi * f0 * dt * double(k));
  const Spectrum s = amplitude_spectrum(x, dt);
  CHECK(s.resolution == doctest::Approx(1.0 / (4000 * dt)));
  CHECK(s.frequencies.size() == s.magnitude.size());
  CHECK(s.magnitude[0] < 1e-12);  // mean removed
  CHECK(std::abs(dominant_frequency(s) - f0) < s.resolution);
  const std::size_t k = nearest_bin(s, f0);
  CHECK(std::abs(s.frequencies[k] - f0) <= 0.5 * s.resolution + 1e-12);
  // A tone on a bin centre carries half its amplitude in |DFT|/N.
  std::vector<double> y(4000);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = 0.2 * std::cos(2.0 * std::numbers::pi * 31.5 * dt * double(k));
  const Spectrum c = amplitude_spectrum(y, dt);
  CHECK(c.magnitude[nearest_bin(c, 31.5)] == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("zero padding refines the grid without moving the peak") {
  const double dt = 0.01;
  std::vector<double> x(1000);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::sin(2.0 * std::numbers::pi * 16.161 * dt * double(k));
  const Spectrum coarse = amplitude_spectrum(x, dt);
  const Spectrum fine = amplitude_spectrum(x, dt, 8);
  CHECK(fine.resolution == doctest::Approx(coarse.resolution / 8.0));
  CHECK(std::abs(dominant_frequency(fine) - 16.161) < fine.resolution);
}

TEST_CASE("bad input") {
  CHECK_THROWS(amplitude_spectrum({1.0}, 0.01));
  CHECK_THROWS(amplitude_spectrum({1.0, 2.0, 3.0}, 0.0));
}

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "esr/analysis.hpp"
#include "esr/gates.hpp"
#include "esr/model.hpp"
#include "esr/propagator.hpp"

namespace esr {

std::string tool_version();
/// `git describe` of the source tree at configure time, or "unknown".
std::string source_revision();

/// Nine significant digits, locale independent.
std::string format_value(double v);

/// Two header rows (column names, then units) followed by tab separated samples.
/// metrics may be empty; otherwise it must hold one entry per sample.
std::string trajectory_table(const DensityMatrixTrajectory& trajectory, const EigenBasis& basis,
                             const std::vector<SampleMetrics>& metrics);

/// Stored density matrices, one row per kept sample: time, then Re and Im of every entry
/// in row-major order. Only every `stride`-th stored matrix is written.
std::string density_matrix_table(const DensityMatrixTrajectory& trajectory, std::size_t stride);

std::string spectrum_table(const SweepResult& sweep);

/// Transitions are written with 1-based eigenstate labels.
std::string calibration_table(const CalibrationSet& calibrations);
CalibrationSet parse_calibration_table(const std::string& text);

/// Files staged in memory and written together: each goes to a temporary name first and is
/// renamed only after every write succeeded, so a failed run leaves no partial outputs.
class OutputSet {
 public:
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }
  /// Creates `directory` if needed. Throws IoError.
  void commit(const std::filesystem::path& directory) const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace esr

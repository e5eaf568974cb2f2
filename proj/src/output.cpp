#include "esr/output.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "esr/error.hpp"

#ifndef ESRSIM_VERSION
#define ESRSIM_VERSION "0.0.0"
#endif
#ifndef ESRSIM_GIT_REVISION
#define ESRSIM_GIT_REVISION "unknown"
#endif

namespace esr {

std::string tool_version() { return ESRSIM_VERSION; }
std::string source_revision() { return ESRSIM_GIT_REVISION; }

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

const char* axis_name(std::size_t chi) { return chi == 0 ? "x" : chi == 1 ? "y" : "z"; }

std::string site_name(std::size_t i) { return i == 0 ? "transport" : "site" + std::to_string(i); }

void header(std::ostringstream& os, const std::vector<std::string>& names, const std::vector<std::string>& units) {
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "\t" : "") << names[i];
  os << '\n';
  for (std::size_t i = 0; i < units.size(); ++i) os << (i ? "\t" : "") << units[i];
  os << '\n';
}

}  // namespace

std::string trajectory_table(const DensityMatrixTrajectory& tr, const EigenBasis& basis,
                             const std::vector<SampleMetrics>& metrics) {
  const std::size_t samples = tr.times.size();
  if (!metrics.empty() && metrics.size() != samples)
    throw ValidationError("metrics do not match the trajectory samples");
  std::vector<std::string> names{"time"};
  std::vector<std::string> units{"ns"};
  for (std::size_t i = 0; i < basis.size(); ++i) {
    names.push_back("p" + std::to_string(i + 1));
    units.push_back("1");
  }
  for (std::size_t s = 0; s < basis.spins.size(); ++s)
    for (std::size_t chi = 0; chi < 3; ++chi) {
      names.push_back(std::string("S") + axis_name(chi) + "_" + site_name(s));
      units.push_back("hbar");
    }
  for (const auto& label : tr.current_labels) {
    names.push_back("I_" + label);
    units.push_back("pA");
  }
  if (!metrics.empty())
    for (const char* m : {"F", "F_raw", "C", "bound_slack", "leakage"}) {
      names.push_back(m);
      units.push_back("1");
    }

  std::ostringstream os;
  header(os, names, units);
  for (std::size_t k = 0; k < samples; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    os << format_value(tr.times[k]);
    for (Eigen::Index i = 0; i < tr.populations.cols(); ++i) os << '\t' << format_value(tr.populations(row, i));
    for (Eigen::Index i = 0; i < tr.spin_expectations.cols(); ++i)
      os << '\t' << format_value(tr.spin_expectations(row, i));
    for (Eigen::Index i = 0; i < tr.current.cols(); ++i) os << '\t' << format_value(tr.current(row, i));
    if (!metrics.empty()) {
      const SampleMetrics& m = metrics[k];
      for (double v : {m.fidelity, m.fidelity_raw, m.concurrence, m.bound_slack, m.leakage})
        os << '\t' << format_value(v);
    }
    os << '\n';
  }
  return os.str();
}

std::string density_matrix_table(const DensityMatrixTrajectory& tr, std::size_t stride) {
  std::ostringstream os;
  if (tr.rho.empty() || stride == 0) return {};
  const auto n = tr.rho.front().rows();
  std::vector<std::string> names{"time"};
  std::vector<std::string> units{"ns"};
  for (Eigen::Index l = 0; l < n; ++l)
    for (Eigen::Index j = 0; j < n; ++j)
      for (const char* part : {"re", "im"}) {
        names.push_back(std::string(part) + "_rho_" + std::to_string(l + 1) + "_" + std::to_string(j + 1));
        units.push_back("1");
      }
  header(os, names, units);
  for (std::size_t k = 0; k < tr.rho.size(); k += stride) {
    os << format_value(tr.times[tr.rho_sample_index[k]]);
    const Matrix& rho = tr.rho[k];
    for (Eigen::Index l = 0; l < n; ++l)
      for (Eigen::Index j = 0; j < n; ++j)
        os << '\t' << format_value(rho(l, j).real()) << '\t' << format_value(rho(l, j).imag());
    os << '\n';
  }
  return os.str();
}

std::string spectrum_table(const SweepResult& sweep) {
  std::ostringstream os;
  header(os, {"frequency", "I_dc", "converged"}, {"GHz", "pA", "bool"});
  for (std::size_t i = 0; i < sweep.frequencies.size(); ++i)
    os << format_value(sweep.frequencies[i]) << '\t' << format_value(sweep.dc_current[i]) << '\t'
       << (sweep.converged[i] ? 1 : 0) << '\n';
  return os.str();
}

std::string calibration_table(const CalibrationSet& calibrations) {
  std::ostringstream os;
  header(os, {"state_i", "state_j", "frequency", "rabi", "pi_time", "amplitude", "offset", "fit_residual"},
         {"label", "label", "GHz", "GHz", "ns", "1", "1", "1"});
  for (const auto& [transition, c] : calibrations)
    os << transition.first + 1 << '\t' << transition.second + 1 << '\t' << format_value(c.frequency_ghz) << '\t'
       << format_value(c.rabi_ghz) << '\t' << format_value(c.pi_time()) << '\t' << format_value(c.amplitude) << '\t'
       << format_value(c.offset) << '\t' << format_value(c.fit_residual) << '\n';
  return os.str();
}

CalibrationSet parse_calibration_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CalibrationSet out;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no <= 2 || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::size_t i = 0, j = 0;
    double pi_time = 0.0;
    RabiCalibration c;
    if (!(row >> i >> j >> c.frequency_ghz >> c.rabi_ghz >> pi_time >> c.amplitude >> c.offset >> c.fit_residual))
      throw ParseError("calibration rows need eight columns", line_no);
    if (i == 0 || j == 0) throw ParseError("state labels start at 1", line_no);
    if (!(c.rabi_ghz > 0.0)) throw ParseError("Rabi frequency must be positive", line_no);
    c.transition = {i - 1, j - 1};
    if (!out.emplace(c.transition, c).second) throw ParseError("transition listed twice", line_no);
  }
  return out;
}

void OutputSet::commit(const std::filesystem::path& directory) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create output directory '" + directory.string() + "': " + ec.message());
  std::vector<fs::path> staged;
  auto discard = [&] {
    for (const auto& p : staged) fs::remove(p, ec);
  };
  for (const auto& [name, content] : files_) {
    const fs::path tmp = directory / (name + ".partial");
    staged.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) {
      discard();
      throw IoError("cannot write '" + tmp.string() + "'");
    }
  }
  for (std::size_t i = 0; i < files_.size(); ++i) {
    fs::rename(staged[i], directory / files_[i].first, ec);
    if (ec) {
      discard();
      throw IoError("cannot finalize '" + files_[i].first + "': " + ec.message());
    }
  }
}

}  // namespace esr

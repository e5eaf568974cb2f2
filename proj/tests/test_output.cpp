#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "esr/error.hpp"
#include "esr/output.hpp"

using namespace esr;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t columns(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), '\t')) + 1;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("esr_output_test_" + name);
  fs::remove_all(p);
  return p;
}

QuantumImpurityModel two_qubits() {
  QuantumImpurityModel m;
  m.transport.epsilon_up_mev = m.transport.epsilon_down_mev = -5.0;
  m.transport.coulomb_u_mev = 50.0;
  m.transport.b_field = {0.55, 0.0, 0.0};
  SpinSiteSpec s;
  s.b_field = {0.575, 0.0, 0.0};
  m.sites.push_back(s);
  m.exchanges.push_back({0, 1, {-0.1, -0.1, -0.1}});
  return m;
}

}  // namespace

TEST_CASE("values keep nine significant digits") {
  CHECK(format_value(1.0) == "1");
  CHECK(format_value(0.123456789123) == "0.123456789");
  CHECK(format_value(-2.5e-12) == "-2.5e-12");
  CHECK(format_value(31.520240753001) == "31.5202408");
}

TEST_CASE("trajectory and density tables") {
  const QuantumImpurityModel m = two_qubits();
  const EigenBasis basis = make_eigen_basis(m);
  PulseProgram p;
  p.t_final = 0.05;
  p.segments.push_back({0.0, 0.05, 0.0, {{16.0, 0.0}}, 1.0});
  PropagationOptions opt;
  opt.dt = 1e-3;
  opt.rho_stride = 1;
  MetricsRecorder rec(basis);
  opt.observer = std::ref(rec);
  ElectrodeSpec tip, sub;
  tip.base_rate_uev = 1.0;
  sub.label = "substrate";
  sub.base_rate_uev = 1.0;
  const RateModel rates(basis, symmetric_bias_electrodes(6.0, tip, sub));
  const auto tr = propagate(basis, rates, p, initial_state(basis, InitialMode::ground), opt);

  const auto rows = lines_of(trajectory_table(tr, basis, rec.samples()));
  REQUIRE(rows.size() == tr.times.size() + 2);
  CHECK(rows[0].rfind("time\tp1\t", 0) == 0);
  CHECK(rows[1].rfind("ns\t", 0) == 0);
  const std::size_t width = columns(rows[0]);
  // time, 8 populations, 6 spins, 2 currents, 5 metrics
  CHECK(width == 1 + 8 + 6 + 2 + 5);
  for (const auto& r : rows) CHECK(columns(r) == width);
  CHECK(lines_of(trajectory_table(tr, basis, {}))[0].find("bound_slack") == std::string::npos);
  CHECK_THROWS_AS(trajectory_table(tr, basis, {SampleMetrics{}}), ValidationError);

  const auto rho_rows = lines_of(density_matrix_table(tr, 2));
  CHECK(columns(rho_rows.back()) == 1 + 2 * 64);
  CHECK(rho_rows.size() < rows.size());
}

TEST_CASE("calibration table round trip") {
  CalibrationSet cals;
  RabiCalibration a;
  a.transition = {0, 2};
  a.frequency_ghz = 16.160805789918;
  a.rabi_ghz = 0.00256;
  a.amplitude = 0.97;
  a.offset = 0.01;
  a.fit_residual = 3e-4;
  cals[a.transition] = a;
  RabiCalibration b = a;
  b.transition = {2, 3};
  b.frequency_ghz = 15.359;
  cals[b.transition] = b;

  const std::string text = calibration_table(cals);
  CHECK(text.find("1\t3\t") != std::string::npos);
  const CalibrationSet back = parse_calibration_table(text);
  REQUIRE(back.size() == 2);
  CHECK(back.at({0, 2}).rabi_ghz == doctest::Approx(0.00256));
  CHECK(back.at({2, 3}).frequency_ghz == doctest::Approx(15.359));
  CHECK(calibration_table(back) == text);
  CHECK_THROWS_AS(parse_calibration_table("a\nb\n1\t3\t16\n"), ParseError);
}

TEST_CASE("output sets appear together") {
  const fs::path dir = scratch("ok");
  OutputSet set;
  set.add("a.tsv", "1\n");
  set.add("b.json", "{}\n");
  set.commit(dir);
  CHECK(fs::exists(dir / "a.tsv"));
  CHECK(fs::exists(dir / "b.json"));
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().extension() != ".partial");
  fs::remove_all(dir);

  // A name that cannot be written aborts the whole set.
  const fs::path bad = scratch("bad");
  OutputSet broken;
  broken.add("a.tsv", "1\n");
  broken.add("missing/sub/b.tsv", "2\n");
  CHECK_THROWS_AS(broken.commit(bad), IoError);
  std::size_t left = 0;
  if (fs::exists(bad))
    for ([[maybe_unused]] const auto& e : fs::recursive_directory_iterator(bad)) ++left;
  CHECK(left == 0);
  fs::remove_all(bad);
}

// esrsim: command-line driver for propagation, CW sweeps, gate compilation and Rabi calibration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "esr/analysis.hpp"
#include "esr/config.hpp"
#include "esr/error.hpp"
#include "esr/gates.hpp"
#include "esr/output.hpp"
#include "esr/propagator.hpp"
#include "esr/pulse.hpp"

namespace {

using nlohmann::ordered_json;

enum ExitCode : int {
  ok = 0,
  other_failure = 1,
  usage = 2,
  io_failure = 3,
  parse_failure = 4,
  validation_failure = 5,
  capacity_failure = 6,
  numerical_failure = 7,
  calibration_failure = 8,
};

int exit_code_for(esr::ErrorKind kind) {
  switch (kind) {
    case esr::ErrorKind::io:
      return io_failure;
    case esr::ErrorKind::parse:
      return parse_failure;
    case esr::ErrorKind::validation:
      return validation_failure;
    case esr::ErrorKind::capacity:
      return capacity_failure;
    case esr::ErrorKind::numerical:
      return numerical_failure;
    case esr::ErrorKind::calibration:
      return calibration_failure;
  }
  return other_failure;
}

struct Arguments {
  std::string mode = "propagate";
  std::string config;
  std::string pulses;
  std::string out_dir = ".";
  std::optional<double> dt;
  bool seedless = false;
  bool pv = false;
  std::string gates;
  std::string calibrations;
  double t_final = 750.0;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Resolved configuration as key -> value text, read back from the serializer.
ordered_json configuration_object(const esr::RunConfiguration& cfg) {
  ordered_json out = ordered_json::object();
  std::istringstream in(esr::serialize_configuration(cfg));
  std::string line;
  while (std::getline(in, line)) {
    if (const auto bang = line.find('!'); bang != std::string::npos) line.erase(bang);
    std::istringstream words(line);
    std::string key, word, value;
    if (!(words >> key)) continue;
    while (words >> word) value += (value.empty() ? "" : " ") + word;
    out[key] = value;
  }
  return out;
}

ordered_json metadata(const Arguments& args, const esr::RunConfiguration& cfg, const std::vector<std::string>& files) {
  ordered_json m;
  m["tool"] = "esrsim";
  m["version"] = esr::tool_version();
  m["revision"] = esr::source_revision();
  m["created_utc"] = utc_timestamp();
  m["mode"] = args.mode;
  m["inputs"] = {{"config", args.config}, {"pulses", args.pulses}, {"calibrations", args.calibrations},
                 {"gates", args.gates}};
  m["configuration"] = configuration_object(cfg);
  m["units"] = {{"time", "ns"},         {"frequency", "GHz (cyclic)"}, {"energy", "meV"},
                {"rate", "ueV"},        {"field", "T"},                {"exchange", "GHz"},
                {"current", "pA"},      {"phase", "rad"},              {"temperature", "K"}};
  m["outputs"] = files;
  return m;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

esr::PropagationOptions propagation_options(const esr::RunConfiguration& cfg) {
  esr::PropagationOptions p;
  p.dt = cfg.simulation.dt;
  p.sample_interval = cfg.simulation.sample_interval;
  p.integrator = cfg.simulation.integrator;
  p.rho_stride = cfg.simulation.rho_output_stride;
  return p;
}

esr::Matrix starting_state(const esr::RunConfiguration& cfg, const esr::EigenBasis& basis) {
  const double temperature = std::min(cfg.tip.temperature_k, cfg.substrate.temperature_k);
  return esr::initial_state(basis, cfg.simulation.initial_state, temperature, cfg.simulation.initial_weights);
}

bool is_two_qubit(const esr::EigenBasis& basis) {
  const auto& spins = basis.catalog.site_spins();
  return spins.size() == 1 && spins[0] == 0.5;
}

std::vector<esr::Transition> default_transitions(const esr::EigenBasis& basis) {
  return {esr::gate_transition(basis, esr::GateKind::x, esr::Qubit::site),
          esr::gate_transition(basis, esr::GateKind::cnot, esr::Qubit::site)};
}

esr::CalibrationSet run_calibrations(const esr::RunConfiguration& cfg, const esr::EigenBasis& basis,
                                     const esr::RateModel& rates, const std::vector<esr::Transition>& transitions) {
  esr::CalibrationOptions opt;
  opt.window = cfg.calibration.window;
  opt.max_window = cfg.calibration.max_window;
  opt.max_residual = cfg.calibration.max_residual;
  opt.propagation = propagation_options(cfg);
  opt.propagation.rho_stride = 0;
  esr::CalibrationSet out;
  for (const auto& tr : transitions) out.emplace(tr, esr::calibrate_rabi(basis, rates, tr, opt));
  return out;
}

// "X(site), Y^-1/2(site), CNOT(site)"; for CNOT the qubit names the control.
std::vector<std::pair<esr::GateKind, esr::Qubit>> parse_gate_list(const std::string& text) {
  static const std::regex item(R"(\s*([^\s(,]+)\s*\(\s*([A-Za-z0-9_]+)\s*\)\s*)");
  std::vector<std::pair<esr::GateKind, esr::Qubit>> gates;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    std::smatch m;
    if (!std::regex_match(token, m, item))
      throw esr::ValidationError("gate '" + token + "' must look like NAME(qubit)");
    const std::string q = m[2];
    esr::Qubit qubit;
    if (q == "site" || q == "site2" || q == "2")
      qubit = esr::Qubit::site;
    else if (q == "transport" || q == "site1" || q == "1")
      qubit = esr::Qubit::transport;
    else
      throw esr::ValidationError("unknown qubit '" + q + "' (use transport or site)");
    gates.emplace_back(esr::parse_gate(m[1]), qubit);
  }
  if (gates.empty()) throw esr::ValidationError("empty gate list");
  return gates;
}

ordered_json summary_json(const esr::DensityMatrixTrajectory& tr, const esr::EigenBasis& basis,
                          const std::optional<esr::EntanglementSummary>& ent) {
  ordered_json s;
  s["samples"] = tr.times.size();
  s["steps"] = tr.steps;
  s["dt_ns"] = tr.dt;
  s["basis_dimension"] = basis.size();
  std::vector<double> energies(basis.energies().data(), basis.energies().data() + basis.size());
  s["eigenenergies_ghz"] = energies;
  const auto last = tr.populations.rows() - 1;
  std::vector<double> final_pop;
  for (Eigen::Index i = 0; i < tr.populations.cols(); ++i) final_pop.push_back(tr.populations(last, i));
  s["final_populations"] = final_pop;
  if (ent) {
    s["entanglement"] = {
        {"peak_fidelity", ent->peak_fidelity},
        {"peak_fidelity_time_ns", ent->peak_fidelity_time},
        {"peak_concurrence", ent->peak_concurrence},
        {"peak_concurrence_time_ns", ent->peak_concurrence_time},
        {"min_bound_slack", ent->min_bound_slack},
        {"bound_holds", ent->bound_holds},
        {"max_leakage", ent->max_leakage},
        {"free_evolution_start_ns", ent->free_evolution_start},
        {"fidelity_oscillation_ghz", ent->fidelity_oscillation_ghz},
        {"concurrence_decay_time_ns", ent->decay_time_ns},
    };
  }
  return s;
}

int run(const Arguments& args) {
  if (args.config.empty()) throw esr::ValidationError("--config is required");
  esr::RunConfiguration cfg = esr::load_configuration(args.config);
  if (args.dt) cfg.simulation.dt = *args.dt;
  if (args.pv) cfg.rates.principal_value = true;
  cfg.validate();

  const esr::EigenBasis basis = esr::make_eigen_basis(cfg.model);
  esr::OutputSet out;
  std::vector<std::string> files;
  auto add = [&](const std::string& name, std::string content) {
    files.push_back(name);
    out.add(name, std::move(content));
  };

  if (args.mode == "propagate") {
    if (args.pulses.empty()) throw esr::ValidationError("propagate needs --pulses");
    const esr::PulseProgram program = esr::parse_pulse_program(esr::read_text_file(args.pulses));
    const esr::RateModel rates(basis, cfg.electrodes(), cfg.rates);
    esr::PropagationOptions opt = propagation_options(cfg);
    const bool metrics = is_two_qubit(basis);
    esr::MetricsRecorder recorder(basis);
    if (metrics) opt.observer = [&](std::size_t k, double t, const esr::Matrix& rho) { recorder(k, t, rho); };
    const esr::DensityMatrixTrajectory tr = esr::propagate(basis, rates, program, starting_state(cfg, basis), opt);
    std::optional<esr::EntanglementSummary> ent;
    if (metrics) ent = esr::summarize(recorder.times(), recorder.samples(), program);
    add("trajectory.tsv", esr::trajectory_table(tr, basis, recorder.samples()));
    if (cfg.simulation.rho_output_stride > 0) add("density_matrix.tsv", esr::density_matrix_table(tr, 1));
    add("summary.json", dump(summary_json(tr, basis, ent)));
  } else if (args.mode == "sweep") {
    esr::PulseSegment drive{0.0, 1.0, 1.0, {esr::Tone{cfg.sweep.f_min, 0.0}}};
    if (!args.pulses.empty()) {
      const esr::PulseProgram program = esr::parse_pulse_program(esr::read_text_file(args.pulses));
      const auto it = std::find_if(program.segments.begin(), program.segments.end(),
                                   [](const esr::PulseSegment& s) { return s.driven(); });
      if (it == program.segments.end()) throw esr::ValidationError("sweep template has no driven segment");
      drive = *it;
    }
    std::vector<double> grid(cfg.sweep.points);
    for (std::size_t i = 0; i < grid.size(); ++i)
      grid[i] = grid.size() == 1 ? cfg.sweep.f_min
                                 : cfg.sweep.f_min + (cfg.sweep.f_max - cfg.sweep.f_min) * static_cast<double>(i) /
                                                         static_cast<double>(grid.size() - 1);
    esr::SweepOptions opt;
    opt.settle_time = cfg.sweep.settle_time;
    opt.periods_per_window = cfg.sweep.periods_per_window;
    opt.tolerance = cfg.sweep.tolerance;
    opt.threads = cfg.sweep.threads;
    opt.propagation = propagation_options(cfg);
    const esr::RateModel rates(basis, cfg.electrodes(), cfg.rates);
    const esr::SweepResult sweep = esr::cw_spectrum(basis, rates, drive, grid, starting_state(cfg, basis), opt);
    add("spectrum.tsv", esr::spectrum_table(sweep));
  } else if (args.mode == "calibrate") {
    const esr::RateModel rates(basis, cfg.electrodes(), cfg.rates);
    const auto transitions =
        cfg.calibration.transitions.empty() ? default_transitions(basis) : cfg.calibration.transitions;
    add("calibrations.tsv", esr::calibration_table(run_calibrations(cfg, basis, rates, transitions)));
  } else if (args.mode == "compile") {
    if (args.gates.empty()) throw esr::ValidationError("compile needs --gates");
    const auto gates = parse_gate_list(args.gates);
    esr::CalibrationSet cals;
    if (!args.calibrations.empty()) {
      cals = esr::parse_calibration_table(esr::read_text_file(args.calibrations));
    } else {
      const esr::RateModel rates(basis, cfg.electrodes(), cfg.rates);
      std::vector<esr::Transition> needed;
      for (const auto& [gate, qubit] : gates) {
        if (gate == esr::GateKind::z) continue;
        const auto tr = esr::gate_transition(basis, gate, qubit);
        if (std::find(needed.begin(), needed.end(), tr) == needed.end()) needed.push_back(tr);
      }
      cals = run_calibrations(cfg, basis, rates, needed);
    }
    const esr::PulseProgram program = esr::compile_circuit(gates, basis, cals, args.t_final);
    program.validate();
    add("program.txt", esr::serialize_pulse_program(program));
    add("calibrations.tsv", esr::calibration_table(cals));
  } else {
    throw esr::ValidationError("unknown mode '" + args.mode + "'");
  }

  files.push_back("metadata.json");
  out.add("metadata.json", dump(metadata(args, cfg, files)));
  out.commit(args.out_dir);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ESR-STM two-qubit gate simulator"};
  Arguments args;
  app.add_option("--mode", args.mode, "propagate | sweep | compile | calibrate")
      ->check(CLI::IsMember({"propagate", "sweep", "compile", "calibrate"}));
  app.add_option("--config", args.config, "run configuration file")->required();
  app.add_option("--pulses", args.pulses, "pulse program (propagate; optional drive template for sweep)");
  app.add_option("--out-dir", args.out_dir, "directory receiving all outputs");
  app.add_option("--dt", args.dt, "integration step in ns, overrides the configuration");
  app.add_flag("--seedless", args.seedless, "accepted for reproducibility scripts; the simulator uses no RNG");
  app.add_flag("--pv", args.pv, "force principal-value rate terms on");
  app.add_option("--gates", args.gates, "compile: comma separated gates such as \"X(site),Y^-1/2(site),CNOT(site)\"");
  app.add_option("--calibrations", args.calibrations, "compile: calibration table from a calibrate run");
  app.add_option("--t-final", args.t_final, "compile: program end time in ns");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    return run(args);
  } catch (const esr::Error& e) {
    std::cerr << "esrsim: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "esrsim: " << e.what() << '\n';
    return other_failure;
  }
}

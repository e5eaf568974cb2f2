#include "esr/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "esr/error.hpp"

namespace esr {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double to_number(std::string_view word, int line) {
  double v = 0.0;
  const char* first = word.data();
  const char* last = word.data() + word.size();
  if (!word.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v))
    throw ParseError("malformed number '" + std::string(word) + "'", line);
  return v;
}

std::size_t to_count(std::string_view word, int line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), v);
  if (ec != std::errc{} || ptr != word.data() + word.size())
    throw ParseError("malformed non-negative integer '" + std::string(word) + "'", line);
  return v;
}

bool to_bool(std::string_view word, int line) {
  if (word == "1" || word == "true" || word == "on") return true;
  if (word == "0" || word == "false" || word == "off") return false;
  throw ParseError("expected a boolean (0/1), got '" + std::string(word) + "'", line);
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

using Words = std::vector<std::string_view>;

void expect_count(const Words& w, std::size_t n, std::string_view key, int line) {
  if (w.size() != n)
    throw ParseError(std::string(key) + " expects " + std::to_string(n) + " value" + (n == 1 ? "" : "s") + ", got " +
                         std::to_string(w.size()),
                     line);
}

double one(const Words& w, std::string_view key, int line) {
  expect_count(w, 1, key, line);
  return to_number(w[0], line);
}

Vec3 three(const Words& w, std::string_view key, int line) {
  expect_count(w, 3, key, line);
  return {to_number(w[0], line), to_number(w[1], line), to_number(w[2], line)};
}

Transition parse_transition(std::string_view word, int line) {
  const auto dash = word.find('-');
  if (dash == std::string_view::npos) throw ParseError("transition must look like i-j, got '" + std::string(word) + "'", line);
  const std::size_t i = to_count(word.substr(0, dash), line);
  const std::size_t j = to_count(word.substr(dash + 1), line);
  if (i == 0 || j == 0) throw ParseError("transition labels start at 1", line);
  return {i - 1, j - 1};
}

std::string mode_name(InitialMode m) {
  switch (m) {
    case InitialMode::ground:
      return "ground";
    case InitialMode::thermal:
      return "thermal";
    case InitialMode::custom:
      return "custom";
  }
  return "ground";
}

void electrode_key(ElectrodeSpec& el, std::string_view field, const Words& w, std::string_view key, int line) {
  if (field == "temperature")
    el.temperature_k = one(w, key, line);
  else if (field == "base_rate")
    el.base_rate_uev = one(w, key, line);
  else if (field == "polarization")
    el.spin_polarization = three(w, key, line);
  else if (field == "drive_amplitude")
    el.drive_amplitude = one(w, key, line);
  else
    throw ParseError("unknown key '" + std::string(key) + "'", line);
}

}  // namespace

std::vector<ElectrodeSpec> RunConfiguration::electrodes() const {
  return symmetric_bias_electrodes(bias_mv, tip, substrate);
}

void RunConfiguration::validate() const {
  model.validate();
  for (const auto& el : electrodes()) el.validate();
  if (!std::isfinite(bias_mv)) throw ValidationError("bias must be finite");
  if (!(rates.level_broadening_uev >= 0.0)) throw ValidationError("rates.level_broadening must be non-negative");
  if (!(rates.bandwidth_mev > 0.0)) throw ValidationError("rates.bandwidth must be positive");
  if (!(simulation.dt >= 0.0)) throw ValidationError("simulation.dt must be positive (0 selects the default)");
  if (!(simulation.sample_interval > 0.0)) throw ValidationError("simulation.sample_interval must be positive");
  if (simulation.initial_state == InitialMode::custom) {
    if (simulation.initial_weights.empty()) throw ValidationError("custom initial state needs simulation.initial_weights");
    if (simulation.initial_weights.size() > model.dimension())
      throw ValidationError("more initial weights than basis states");
    double sum = 0.0;
    for (double w : simulation.initial_weights) {
      if (w < 0.0) throw ValidationError("initial weights must be non-negative");
      sum += w;
    }
    if (!(sum > 0.0)) throw ValidationError("initial weights are all zero");
  }
  if (!(sweep.f_max >= sweep.f_min) || !(sweep.f_min > 0.0)) throw ValidationError("sweep range must be positive and ordered");
  if (sweep.points == 0) throw ValidationError("sweep.points must be positive");
  if (!(sweep.settle_time >= 0.0)) throw ValidationError("sweep.settle_time must be non-negative");
  if (!(sweep.tolerance > 0.0)) throw ValidationError("sweep.tolerance must be positive");
  if (!(calibration.window >= 0.0) || !(calibration.max_window > 0.0))
    throw ValidationError("calibration windows must be positive");
  if (!(calibration.max_residual > 0.0)) throw ValidationError("calibration.max_residual must be positive");
  const std::size_t n = model.dimension();
  for (const auto& [i, j] : calibration.transitions)
    if (i >= n || j >= n || i == j) throw ValidationError("calibration transition outside the basis");
}

RunConfiguration parse_configuration(std::string_view text) {
  RunConfiguration cfg;
  cfg.model.sites.clear();
  cfg.tip.label = "tip";
  cfg.substrate.label = "substrate";

  std::map<std::size_t, SpinSiteSpec> sites;
  std::map<std::size_t, ExchangeCoupling> exchanges;
  std::map<std::size_t, std::set<std::string>> exchange_fields;
  std::set<std::string> seen;
  static const std::regex site_key(R"(site([0-9]+)\.([a-z_]+))");
  static const std::regex exchange_key(R"(exchange([0-9]+)\.([a-z_]+))");

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto bang = line.find('!'); bang != std::string_view::npos) line = line.substr(0, bang);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    Words words = split_words(line);
    const std::string key(words.front());
    words.erase(words.begin());
    if (!seen.insert(key).second) throw ParseError("key '" + key + "' given twice", line_no);
    const int ln = line_no;

    std::smatch m;
    if (std::regex_match(key, m, site_key)) {
      const std::size_t index = std::stoul(m[1]);
      if (index == 0) throw ParseError("spin sites are numbered from 1 (0 is the transport orbital)", ln);
      SpinSiteSpec& s = sites[index];
      const std::string field = m[2];
      if (field == "spin")
        s.spin = one(words, key, ln);
      else if (field == "g")
        s.g_factors = three(words, key, ln);
      else if (field == "b_field")
        s.b_field = three(words, key, ln);
      else if (field == "stevens") {
        expect_count(words, 4, key, ln);
        s.stevens = {to_number(words[0], ln), to_number(words[1], ln), to_number(words[2], ln),
                     to_number(words[3], ln)};
      } else
        throw ParseError("unknown key '" + key + "'", ln);
    } else if (std::regex_match(key, m, exchange_key)) {
      const std::size_t index = std::stoul(m[1]);
      ExchangeCoupling& x = exchanges[index];
      const std::string field = m[2];
      exchange_fields[index].insert(field);
      if (field == "sites") {
        expect_count(words, 2, key, ln);
        x.site_a = static_cast<int>(to_count(words[0], ln));
        x.site_b = static_cast<int>(to_count(words[1], ln));
      } else if (field == "j") {
        if (words.size() == 1) {
          const double j = to_number(words[0], ln);
          x.j_ghz = {j, j, j};
        } else {
          x.j_ghz = three(words, key, ln);
        }
      } else {
        throw ParseError("unknown key '" + key + "'", ln);
      }
    } else if (key == "model.quantization_axis") {
      cfg.model.quantization_axis = three(words, key, ln);
    } else if (key == "transport.epsilon") {
      cfg.model.transport.epsilon_up_mev = cfg.model.transport.epsilon_down_mev = one(words, key, ln);
    } else if (key == "transport.epsilon_up") {
      cfg.model.transport.epsilon_up_mev = one(words, key, ln);
    } else if (key == "transport.epsilon_down") {
      cfg.model.transport.epsilon_down_mev = one(words, key, ln);
    } else if (key == "transport.coulomb_u") {
      cfg.model.transport.coulomb_u_mev = one(words, key, ln);
    } else if (key == "transport.g") {
      cfg.model.transport.g_factors = three(words, key, ln);
    } else if (key == "transport.b_field") {
      cfg.model.transport.b_field = three(words, key, ln);
    } else if (key == "bias.voltage") {
      cfg.bias_mv = one(words, key, ln);
    } else if (key.starts_with("tip.")) {
      electrode_key(cfg.tip, std::string_view(key).substr(4), words, key, ln);
    } else if (key.starts_with("substrate.")) {
      electrode_key(cfg.substrate, std::string_view(key).substr(10), words, key, ln);
    } else if (key == "rates.principal_value") {
      expect_count(words, 1, key, ln);
      cfg.rates.principal_value = to_bool(words[0], ln);
    } else if (key == "rates.level_broadening") {
      cfg.rates.level_broadening_uev = one(words, key, ln);
    } else if (key == "rates.bandwidth") {
      cfg.rates.bandwidth_mev = one(words, key, ln);
    } else if (key == "rates.symmetric_energies") {
      expect_count(words, 1, key, ln);
      cfg.rates.symmetric_energies = to_bool(words[0], ln);
    } else if (key == "simulation.dt") {
      cfg.simulation.dt = one(words, key, ln);
    } else if (key == "simulation.sample_interval") {
      cfg.simulation.sample_interval = one(words, key, ln);
    } else if (key == "simulation.rho_output_stride") {
      expect_count(words, 1, key, ln);
      cfg.simulation.rho_output_stride = to_count(words[0], ln);
    } else if (key == "simulation.initial_state") {
      expect_count(words, 1, key, ln);
      if (words[0] == "ground")
        cfg.simulation.initial_state = InitialMode::ground;
      else if (words[0] == "thermal")
        cfg.simulation.initial_state = InitialMode::thermal;
      else if (words[0] == "custom")
        cfg.simulation.initial_state = InitialMode::custom;
      else
        throw ParseError("initial state must be ground, thermal or custom", ln);
    } else if (key == "simulation.initial_weights") {
      cfg.simulation.initial_weights.clear();
      for (auto w : words) cfg.simulation.initial_weights.push_back(to_number(w, ln));
    } else if (key == "simulation.integrator") {
      expect_count(words, 1, key, ln);
      if (words[0] == "lawson_rk4")
        cfg.simulation.integrator = Integrator::lawson_rk4;
      else if (words[0] == "rk4")
        cfg.simulation.integrator = Integrator::rk4;
      else
        throw ParseError("integrator must be lawson_rk4 or rk4", ln);
    } else if (key == "sweep.f_min") {
      cfg.sweep.f_min = one(words, key, ln);
    } else if (key == "sweep.f_max") {
      cfg.sweep.f_max = one(words, key, ln);
    } else if (key == "sweep.points") {
      expect_count(words, 1, key, ln);
      cfg.sweep.points = to_count(words[0], ln);
    } else if (key == "sweep.settle_time") {
      cfg.sweep.settle_time = one(words, key, ln);
    } else if (key == "sweep.periods_per_window") {
      expect_count(words, 1, key, ln);
      cfg.sweep.periods_per_window = to_count(words[0], ln);
    } else if (key == "sweep.tolerance") {
      cfg.sweep.tolerance = one(words, key, ln);
    } else if (key == "sweep.threads") {
      expect_count(words, 1, key, ln);
      cfg.sweep.threads = to_count(words[0], ln);
    } else if (key == "calibration.transitions") {
      cfg.calibration.transitions.clear();
      for (auto w : words) cfg.calibration.transitions.push_back(parse_transition(w, ln));
    } else if (key == "calibration.window") {
      cfg.calibration.window = one(words, key, ln);
    } else if (key == "calibration.max_window") {
      cfg.calibration.max_window = one(words, key, ln);
    } else if (key == "calibration.max_residual") {
      cfg.calibration.max_residual = one(words, key, ln);
    } else {
      throw ParseError("unknown key '" + key + "'", ln);
    }
    if (end == text.size()) break;
  }

  std::size_t expected = 1;
  for (auto& [index, site] : sites) {
    if (index != expected) throw ValidationError("spin sites must be numbered 1, 2, ... without gaps");
    cfg.model.sites.push_back(site);
    ++expected;
  }
  for (auto& [index, x] : exchanges) {
    if (!exchange_fields[index].contains("sites"))
      throw ValidationError("exchange" + std::to_string(index) + " needs a sites entry");
    cfg.model.exchanges.push_back(x);
  }
  cfg.validate();
  return cfg;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

RunConfiguration load_configuration(const std::string& path) { return parse_configuration(read_text_file(path)); }

std::string serialize_configuration(const RunConfiguration& c) {
  std::ostringstream os;
  auto put = [&](const std::string& key, const std::string& value, const std::string& comment) {
    std::string line = key;
    line.resize(std::max<std::size_t>(line.size() + 1, 28), ' ');
    line += value;
    if (!comment.empty()) {
      line.resize(std::max<std::size_t>(line.size() + 1, 60), ' ');
      line += "! " + comment;
    }
    os << line << '\n';
  };
  const auto& m = c.model;
  os << "! Quantum impurity\n";
  put("model.quantization_axis", fmt(m.quantization_axis), "axis of the digital labels");
  put("transport.epsilon_up", fmt(m.transport.epsilon_up_mev), "meV");
  put("transport.epsilon_down", fmt(m.transport.epsilon_down_mev), "meV");
  put("transport.coulomb_u", fmt(m.transport.coulomb_u_mev), "meV");
  put("transport.g", fmt(m.transport.g_factors), "g tensor diagonal");
  put("transport.b_field", fmt(m.transport.b_field), "T");
  for (std::size_t i = 0; i < m.sites.size(); ++i) {
    const auto& s = m.sites[i];
    const std::string p = "site" + std::to_string(i + 1) + ".";
    put(p + "spin", fmt(s.spin), "");
    put(p + "g", fmt(s.g_factors), "");
    put(p + "b_field", fmt(s.b_field), "T");
    put(p + "stevens",
        fmt(s.stevens.b20) + " " + fmt(s.stevens.b22) + " " + fmt(s.stevens.b40) + " " + fmt(s.stevens.b44),
        "B20 B22 B40 B44 (meV)");
  }
  for (std::size_t i = 0; i < m.exchanges.size(); ++i) {
    const auto& x = m.exchanges[i];
    const std::string p = "exchange" + std::to_string(i + 1) + ".";
    put(p + "sites", std::to_string(x.site_a) + " " + std::to_string(x.site_b), "0 is the transport orbital");
    put(p + "j", fmt(x.j_ghz), "GHz, x y z");
  }
  os << "! Electrodes\n";
  put("bias.voltage", fmt(c.bias_mv), "mV, split symmetrically");
  for (const auto* el : {&c.tip, &c.substrate}) {
    const std::string p = el == &c.tip ? "tip." : "substrate.";
    put(p + "temperature", fmt(el->temperature_k), "K");
    put(p + "base_rate", fmt(el->base_rate_uev), "ueV");
    put(p + "polarization", fmt(el->spin_polarization), "");
    put(p + "drive_amplitude", fmt(el->drive_amplitude), "");
  }
  put("rates.principal_value", c.rates.principal_value ? "1" : "0", "energy-shift terms");
  put("rates.level_broadening", fmt(c.rates.level_broadening_uev), "ueV");
  put("rates.bandwidth", fmt(c.rates.bandwidth_mev), "meV");
  put("rates.symmetric_energies", c.rates.symmetric_energies ? "1" : "0", "");
  os << "! Simulation\n";
  const auto& s = c.simulation;
  put("simulation.dt", fmt(s.dt), "ns, 0 = automatic");
  put("simulation.sample_interval", fmt(s.sample_interval), "ns");
  put("simulation.rho_output_stride", std::to_string(s.rho_output_stride), "");
  put("simulation.initial_state", mode_name(s.initial_state), "");
  if (!s.initial_weights.empty()) {
    std::string w;
    for (double x : s.initial_weights) w += (w.empty() ? "" : " ") + fmt(x);
    put("simulation.initial_weights", w, "");
  }
  put("simulation.integrator", s.integrator == Integrator::rk4 ? "rk4" : "lawson_rk4", "");
  os << "! Sweep\n";
  put("sweep.f_min", fmt(c.sweep.f_min), "GHz");
  put("sweep.f_max", fmt(c.sweep.f_max), "GHz");
  put("sweep.points", std::to_string(c.sweep.points), "");
  put("sweep.settle_time", fmt(c.sweep.settle_time), "ns");
  put("sweep.periods_per_window", std::to_string(c.sweep.periods_per_window), "");
  put("sweep.tolerance", fmt(c.sweep.tolerance), "");
  put("sweep.threads", std::to_string(c.sweep.threads), "");
  os << "! Calibration\n";
  if (!c.calibration.transitions.empty()) {
    std::string t;
    for (const auto& [i, j] : c.calibration.transitions)
      t += (t.empty() ? "" : " ") + std::to_string(i + 1) + "-" + std::to_string(j + 1);
    put("calibration.transitions", t, "eigenstate labels from 1");
  }
  put("calibration.window", fmt(c.calibration.window), "ns, 0 = automatic");
  put("calibration.max_window", fmt(c.calibration.max_window), "ns");
  put("calibration.max_residual", fmt(c.calibration.max_residual), "");
  return os.str();
}

}  // namespace esr

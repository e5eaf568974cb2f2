#include "esr/pulse.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "esr/error.hpp"

namespace esr {

namespace {

constexpr double edge_tolerance = 1e-9;  // ns

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Line {
  int number = 0;
  std::string_view raw;
  std::string_view values;
  std::optional<std::string_view> comment;
};

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  // Next line with non-empty content; comment-only and blank lines are skipped.
  std::optional<Line> next(bool keep_raw = false) {
    while (pos_ <= text_.size()) {
      if (pos_ == text_.size()) {
        pos_ = text_.size() + 1;
        return std::nullopt;
      }
      auto end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      Line line;
      line.number = ++line_number_;
      line.raw = text_.substr(pos_, end - pos_);
      if (!line.raw.empty() && line.raw.back() == '\r') line.raw.remove_suffix(1);
      pos_ = end + 1;
      const auto bang = line.raw.find('!');
      line.values = trim(line.raw.substr(0, bang));
      if (bang != std::string_view::npos) line.comment = line.raw.substr(bang + 1);
      if (!line.values.empty() || (keep_raw && !trim(line.raw).empty())) return line;
    }
    return std::nullopt;
  }

  int line_number() const { return line_number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_number_ = 0;
};

std::vector<std::string_view> tokens(std::string_view s) {
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

double parse_double(std::string_view tok, int line) {
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw ParseError("malformed number '" + std::string(tok) + "'", line);
  return value;
}

std::vector<double> numbers(const Line& line, std::size_t expected, const char* what) {
  const auto toks = tokens(line.values);
  if (toks.size() != expected)
    throw ParseError(std::string(what) + ": expected " + std::to_string(expected) + " value(s), found " +
                         std::to_string(toks.size()),
                     line.number);
  std::vector<double> out;
  for (auto t : toks) out.push_back(parse_double(t, line.number));
  return out;
}

std::size_t parse_count(const Line& line, const char* what) {
  const auto toks = tokens(line.values);
  if (toks.size() != 1) throw ParseError(std::string(what) + ": expected one integer", line.number);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(toks[0].data(), toks[0].data() + toks[0].size(), value);
  if (ec != std::errc() || ptr != toks[0].data() + toks[0].size() || value < 0)
    throw ParseError(std::string(what) + ": malformed count '" + std::string(toks[0]) + "'", line.number);
  return static_cast<std::size_t>(value);
}

Line require(LineReader& reader, const char* what, bool keep_raw = false) {
  auto line = reader.next(keep_raw);
  if (!line) throw ParseError(std::string("unexpected end of input, expected ") + what, reader.line_number() + 1);
  return *line;
}

std::string comment_of(const Line& line) { return line.comment ? std::string(*line.comment) : std::string(); }

// Shortest round-trip fixed-point text with at least `min_decimals` decimals.
std::string format_number(double value, int min_decimals) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  std::string s(buf, ptr);
  auto dot = s.find('.');
  if (dot == std::string::npos) {
    s += '.';
    dot = s.size() - 1;
  }
  const auto decimals = static_cast<int>(s.size() - dot - 1);
  if (decimals < min_decimals) s.append(static_cast<std::size_t>(min_decimals - decimals), '0');
  return s;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void emit(std::ostringstream& os, const std::string& values, std::size_t width, const std::string& comment) {
  if (comment.empty()) {
    os << values << '\n';
    return;
  }
  os << (values.size() < width ? pad(values, width) : values + ' ') << '!' << comment << '\n';
}

std::string time_pair(double a, double b, std::size_t first_width) {
  std::string first = format_number(a, 3);
  return (first.size() < first_width ? pad(first, first_width) : first + ' ') + format_number(b, 3);
}

// Header lines put their comment at column 20, pulse lines at column 18.
constexpr std::size_t header_width = 20;
constexpr std::size_t header_time_width = 12;
constexpr std::size_t pulse_width = 18;
constexpr std::size_t pulse_time_width = 10;

PulseLayout default_layout(const PulseProgram& program) {
  PulseLayout layout;
  layout.times_comment = " Initial and final time (ns)";
  layout.separator = "---------------Pulse definition block----------------------------";
  layout.count_comment = " Number of pulses";
  layout.max_frequencies_comment = " Maximum number of frequencies";
  for (std::size_t k = 0; k < program.segments.size(); ++k) {
    const auto& seg = program.segments[k];
    const std::string tag = " Pulse " + std::to_string(k + 1) + " - ";
    PulseLayout::SegmentComments c;
    c.times = tag + "times (ns)";
    c.toggle = tag + (seg.driven() ? "toggle" : "toggle (no driving)");
    for (std::size_t f = 0; f < program.max_frequencies; ++f) {
      c.frequency.push_back(tag + "pulse frequency (GHz)");
      c.phase.push_back(tag + "phase shift (radians)");
    }
    layout.segments.push_back(std::move(c));
  }
  return layout;
}

}  // namespace

void PulseProgram::validate() const {
  if (!(t_final > t_initial)) throw ValidationError("final time must exceed initial time");
  if (segments.empty()) throw ValidationError("pulse program has no pulses");
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& s = segments[k];
    const std::string name = "pulse " + std::to_string(k + 1);
    if (!(s.t_end > s.t_start)) throw ValidationError(name + ": non-positive duration");
    if (s.toggle != 0.0 && s.toggle != 1.0) throw ValidationError(name + ": toggle must be 0.0 or 1.0");
    if (s.tones.size() > max_frequencies)
      throw ValidationError(name + ": more frequencies than the declared maximum");
    if (!(s.amplitude_scale >= 0.0)) throw ValidationError(name + ": negative amplitude scale");
    const double expected_start = k == 0 ? t_initial : segments[k - 1].t_end;
    if (s.t_start < expected_start - edge_tolerance)
      throw ValidationError(name + (k == 0 ? ": starts before the initial time"
                                           : ": overlaps pulse " + std::to_string(k)));
    if (s.t_start > expected_start + edge_tolerance)
      throw ValidationError(name + (k == 0 ? ": leaves a gap after the initial time"
                                           : ": leaves a gap after pulse " + std::to_string(k)));
  }
  const double last_end = segments.back().t_end;
  if (std::abs(last_end - t_final) > edge_tolerance)
    throw ValidationError("pulse " + std::to_string(segments.size()) +
                          (last_end < t_final ? ": leaves a gap before the final time"
                                              : ": extends past the final time"));
}

std::size_t PulseProgram::segment_at(double t) const {
  if (segments.empty() || t < t_initial - edge_tolerance || t > t_final + edge_tolerance)
    throw std::out_of_range("time " + format_number(t, 3) + " ns lies outside the pulse program");
  auto it = std::upper_bound(segments.begin(), segments.end(), t,
                             [](double value, const PulseSegment& s) { return value < s.t_start; });
  if (it == segments.begin()) return 0;
  return static_cast<std::size_t>(std::distance(segments.begin(), it) - 1);
}

PulseDocument parse_pulse_document(std::string_view text) {
  LineReader reader(text);
  PulseDocument doc;
  auto& prog = doc.program;
  auto& layout = doc.layout;

  const auto first = require(reader, "initial and final time");
  const auto span = numbers(first, 2, "initial and final time");
  prog.t_initial = span[0];
  prog.t_final = span[1];
  layout.times_comment = comment_of(first);

  const auto sep = require(reader, "separator line", true);
  if (trim(sep.raw).empty() || trim(sep.raw).front() != '-')
    throw ParseError("expected a separator line starting with '-'", sep.number);
  layout.separator = std::string(sep.raw);

  const auto count_line = require(reader, "number of pulses");
  const auto count = parse_count(count_line, "number of pulses");
  layout.count_comment = comment_of(count_line);
  const auto max_line = require(reader, "maximum number of frequencies");
  prog.max_frequencies = parse_count(max_line, "maximum number of frequencies");
  layout.max_frequencies_comment = comment_of(max_line);

  for (std::size_t k = 0; k < count; ++k) {
    PulseSegment seg;
    PulseLayout::SegmentComments comments;
    const auto times = require(reader, "pulse time window");
    const auto window = numbers(times, 2, "pulse time window");
    seg.t_start = window[0];
    seg.t_end = window[1];
    comments.times = comment_of(times);
    const auto toggle = require(reader, "pulse toggle");
    seg.toggle = numbers(toggle, 1, "pulse toggle")[0];
    comments.toggle = comment_of(toggle);
    for (std::size_t f = 0; f < prog.max_frequencies; ++f) {
      const auto freq = require(reader, "pulse frequency");
      const auto phase = require(reader, "pulse phase");
      seg.tones.push_back({numbers(freq, 1, "pulse frequency")[0], numbers(phase, 1, "pulse phase")[0]});
      comments.frequency.push_back(comment_of(freq));
      comments.phase.push_back(comment_of(phase));
    }
    prog.segments.push_back(std::move(seg));
    layout.segments.push_back(std::move(comments));
  }
  if (auto extra = reader.next()) throw ParseError("unexpected content after the last pulse", extra->number);

  prog.validate();
  return doc;
}

PulseProgram parse_pulse_program(std::string_view text) { return parse_pulse_document(text).program; }

std::string serialize_pulse_program(const PulseProgram& program) {
  return serialize_pulse_program(program, default_layout(program));
}

std::string serialize_pulse_program(const PulseProgram& program, const PulseLayout& layout) {
  if (layout.segments.size() != program.segments.size())
    throw ValidationError("pulse layout does not match the number of pulses");
  std::ostringstream os;
  emit(os, time_pair(program.t_initial, program.t_final, header_time_width), header_width, layout.times_comment);
  os << layout.separator << '\n';
  emit(os, std::to_string(program.segments.size()), header_width, layout.count_comment);
  emit(os, std::to_string(program.max_frequencies), header_width, layout.max_frequencies_comment);
  for (std::size_t k = 0; k < program.segments.size(); ++k) {
    const auto& seg = program.segments[k];
    const auto& c = layout.segments[k];
    emit(os, time_pair(seg.t_start, seg.t_end, pulse_time_width), pulse_width, c.times);
    emit(os, format_number(seg.toggle, 1), pulse_width, c.toggle);
    if (seg.driven() && seg.tones.size() != program.max_frequencies)
      throw ValidationError("pulse " + std::to_string(k + 1) +
                            ": a driven pulse must list every frequency slot to be serialized");
    for (std::size_t f = 0; f < program.max_frequencies; ++f) {
      // Undriven pulses may omit tones; the file still needs a value in every slot.
      const Tone tone = f < seg.tones.size() ? seg.tones[f] : Tone{};
      const std::string fc = f < c.frequency.size() ? c.frequency[f] : std::string();
      const std::string pc = f < c.phase.size() ? c.phase[f] : std::string();
      emit(os, format_number(tone.frequency_ghz, 3), pulse_width, fc);
      emit(os, format_number(tone.phase, 1), pulse_width, pc);
    }
  }
  return os.str();
}

double drive_factor(const PulseSegment& segment, double electrode_amplitude, double t) {
  if (!segment.driven()) return 1.0;
  double sum = 0.0;
  for (const auto& tone : segment.tones)
    sum += std::cos(2.0 * std::numbers::pi * tone.frequency_ghz * t + tone.phase);
  return 1.0 + electrode_amplitude * segment.amplitude_scale * sum;
}

double drive_factor(const PulseProgram& program, double electrode_amplitude, double t) {
  return drive_factor(program.segments[program.segment_at(t)], electrode_amplitude, t);
}

}  // namespace esr

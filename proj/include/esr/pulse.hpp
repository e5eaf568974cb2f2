#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace esr {

/// One drive tone: cos(2 pi f t + phase), f in GHz, t in ns, phase in radians.
struct Tone {
  double frequency_ghz = 0.0;
  double phase = 0.0;

  bool operator==(const Tone&) const = default;
};

struct PulseSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  double toggle = 0.0;  // 1.0 drives, 0.0 is free evolution
  std::vector<Tone> tones;
  double amplitude_scale = 1.0;

  double duration() const { return t_end - t_start; }
  bool driven() const { return toggle == 1.0; }
  bool operator==(const PulseSegment&) const = default;
};

/// Segments are sorted and tile [t_initial, t_final] without gaps or overlaps.
struct PulseProgram {
  double t_initial = 0.0;
  double t_final = 0.0;
  std::size_t max_frequencies = 1;
  std::vector<PulseSegment> segments;

  /// Throws ValidationError naming the first offending pulse (1-based).
  void validate() const;
  /// Index of the segment containing t; an edge belongs to the later segment.
  std::size_t segment_at(double t) const;

  bool operator==(const PulseProgram&) const = default;
};

/// Comment text and separator retained from a parsed file so that serialization can
/// reproduce it. Comments are stored as everything after the '!'.
struct PulseLayout {
  std::string times_comment;
  std::string separator;
  std::string count_comment;
  std::string max_frequencies_comment;
  struct SegmentComments {
    std::string times;
    std::string toggle;
    std::vector<std::string> frequency;
    std::vector<std::string> phase;
  };
  std::vector<SegmentComments> segments;
};

struct PulseDocument {
  PulseProgram program;
  PulseLayout layout;
};

PulseDocument parse_pulse_document(std::string_view text);
PulseProgram parse_pulse_program(std::string_view text);

/// Emits the pulse-file grammar. Without a layout, descriptive comments are generated.
std::string serialize_pulse_program(const PulseProgram& program);
std::string serialize_pulse_program(const PulseProgram& program, const PulseLayout& layout);

/// 1 + A * scale * sum_k cos(2 pi f_k t + phase_k) on driven segments, exactly 1 otherwise.
double drive_factor(const PulseSegment& segment, double electrode_amplitude, double t);
/// Throws std::out_of_range when t lies outside the program interval.
double drive_factor(const PulseProgram& program, double electrode_amplitude, double t);

}  // namespace esr

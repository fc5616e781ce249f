#pragma once

// Generation controls: model-level (global) and per-track parameters, with
// range validation that reports every offending field.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calliope/error.hpp"
#include "calliope/midi.hpp"
#include "calliope/piece.hpp"

namespace calliope {

/// Ordered note-duration scale. `Any` means "no bound" when used as a range end.
enum class DurationClass { Any = 0, ThirtySecond, Sixteenth, Eighth, Quarter, Half, Whole };

inline constexpr std::array<std::string_view, 7> kDurationClassNames = {"Any", "1/32", "1/16", "1/8",
                                                                        "1/4", "1/2",  "Whole"};

inline std::string_view to_string(DurationClass d) { return kDurationClassNames[static_cast<int>(d)]; }

inline std::optional<DurationClass> duration_class_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kDurationClassNames.size(); ++i)
    if (kDurationClassNames[i] == s) return static_cast<DurationClass>(i);
  return std::nullopt;
}

/// Note length of a class in ticks: ppq * 4 * fraction-of-whole.
constexpr Tick duration_ticks(DurationClass d, int ppq) {
  switch (d) {
    case DurationClass::ThirtySecond: return ppq / 8;
    case DurationClass::Sixteenth: return ppq / 4;
    case DurationClass::Eighth: return ppq / 2;
    case DurationClass::Quarter: return ppq;
    case DurationClass::Half: return ppq * 2;
    case DurationClass::Whole: return ppq * 4;
    case DurationClass::Any: break;
  }
  return 0;
}

struct DurationRange {
  DurationClass min = DurationClass::Any;
  DurationClass max = DurationClass::Any;

  bool operator==(const DurationRange&) const = default;

  /// Concrete classes admitted by the range, shortest first.
  std::vector<DurationClass> allowed() const {
    const int lo = min == DurationClass::Any ? 1 : static_cast<int>(min);
    const int hi = max == DurationClass::Any ? 6 : static_cast<int>(max);
    std::vector<DurationClass> out;
    for (int i = lo; i <= hi; ++i) out.push_back(static_cast<DurationClass>(i));
    return out;
  }
};

namespace bounds {
inline constexpr double kTemperatureMin = 0.8;
inline constexpr double kTemperatureMax = 1.2;
inline constexpr int kPolyphonyLimitMin = 1;
inline constexpr int kPolyphonyLimitMax = 6;
inline constexpr int kPercentageMax = 100;
inline constexpr int kWindowMin = 1;
inline constexpr int kWindowMax = 8;
inline constexpr int kMaxStepsMax = 8;
// Lowest tempo whose quarter-note length fits the 24-bit SMF tempo field.
inline constexpr int kTempoMin = 4;
inline constexpr int kTempoMax = 1000;
inline constexpr int kDensityMax = 10;
inline constexpr int kPolyphonyRangeMax = 6;
inline constexpr int kBatchSizeMax = 1000;
}  // namespace bounds

struct GlobalParams {
  double temperature = 1.0;
  int polyphony_hard_limit = 6;
  int percentage = 100;
  int model_dim = 4;
  int tracks_per_step = 4;
  int bars_per_step = 2;
  int max_steps = 0;  // 0 = unlimited
  std::optional<int> tempo;  // BPM for the output; unset keeps the input tempo map

  bool operator==(const GlobalParams&) const = default;
};

struct Instrument {
  enum class Kind { Program, Group };
  Kind kind = Kind::Program;
  int value = 0;

  bool operator==(const Instrument&) const = default;
};

struct TrackParams {
  Instrument instrument;
  int note_density = 0;  // 0 = chosen at random per request
  int polyphony_min = 0;
  int polyphony_max = 6;
  DurationRange duration_range;

  bool operator==(const TrackParams&) const = default;
};

/// Per-track limits as seen by a generator after the global overrides apply.
struct EffectiveConstraints {
  Instrument instrument;
  int density_level = 1;  // 1..10, already resolved
  int polyphony_min = 0;
  int polyphony_max = 6;
  int polyphony_hard_limit = 6;
  DurationRange duration_range;

  bool operator==(const EffectiveConstraints&) const = default;
};

struct GenerationRequest {
  BarSelection selection;
  GlobalParams global;
  std::map<int, TrackParams> per_track;
  int batch_size = 1;
  std::uint64_t seed = 0;
};

namespace params_detail {

inline std::string range_text(double lo, double hi) {
  auto fmt = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  return "[" + fmt(lo) + ", " + fmt(hi) + "]";
}

inline void check_int(std::vector<FieldError>& errs, const std::string& field, long long v, long long lo,
                      long long hi) {
  if (v < lo || v > hi)
    errs.push_back({field, "must be an integer in " + range_text(static_cast<double>(lo), static_cast<double>(hi)) +
                               ", got " + std::to_string(v)});
}

}  // namespace params_detail

inline void collect_errors(const GlobalParams& g, std::vector<FieldError>& errs) {
  using namespace bounds;
  using params_detail::check_int;
  if (!(g.temperature >= kTemperatureMin && g.temperature <= kTemperatureMax))
    errs.push_back({"global.temperature", "must be within " + params_detail::range_text(kTemperatureMin, kTemperatureMax) +
                                              ", got " + std::to_string(g.temperature)});
  check_int(errs, "global.polyphony_hard_limit", g.polyphony_hard_limit, kPolyphonyLimitMin, kPolyphonyLimitMax);
  check_int(errs, "global.percentage", g.percentage, 0, kPercentageMax);
  check_int(errs, "global.model_dim", g.model_dim, kWindowMin, kWindowMax);
  check_int(errs, "global.tracks_per_step", g.tracks_per_step, kWindowMin, kWindowMax);
  check_int(errs, "global.bars_per_step", g.bars_per_step, kWindowMin, kWindowMax);
  check_int(errs, "global.max_steps", g.max_steps, 0, kMaxStepsMax);
  if (g.tempo) check_int(errs, "global.tempo", *g.tempo, kTempoMin, kTempoMax);
  if (g.bars_per_step > g.model_dim)
    errs.push_back({"global.bars_per_step", "must not exceed model_dim (" + std::to_string(g.model_dim) + ")"});
}

inline void collect_errors(const TrackParams& t, const std::string& prefix, std::vector<FieldError>& errs) {
  using namespace bounds;
  using params_detail::check_int;
  if (t.instrument.kind == Instrument::Kind::Program)
    check_int(errs, prefix + ".instrument.program", t.instrument.value, 0, gm::kProgramCount - 1);
  else
    check_int(errs, prefix + ".instrument.group", t.instrument.value, 0, gm::kGroupCount - 1);
  check_int(errs, prefix + ".note_density", t.note_density, 0, kDensityMax);
  check_int(errs, prefix + ".polyphony_min", t.polyphony_min, 0, kPolyphonyRangeMax);
  check_int(errs, prefix + ".polyphony_max", t.polyphony_max, 0, kPolyphonyRangeMax);
  if (t.polyphony_min > t.polyphony_max)
    errs.push_back({prefix + ".polyphony_min", "must not exceed polyphony_max"});
  const auto& d = t.duration_range;
  if (d.min != DurationClass::Any && d.max != DurationClass::Any && d.min > d.max)
    errs.push_back({prefix + ".duration_range", "min must not exceed max"});
}

inline void validate(const GlobalParams& g) {
  std::vector<FieldError> errs;
  collect_errors(g, errs);
  if (!errs.empty()) throw ValidationError(std::move(errs));
}

inline void validate(const TrackParams& t) {
  std::vector<FieldError> errs;
  collect_errors(t, "track", errs);
  if (!errs.empty()) throw ValidationError(std::move(errs));
}

/// Checks every parameter range and that the request fits the piece's shape.
inline void validate(const GenerationRequest& r, const Piece& piece) {
  std::vector<FieldError> errs;
  collect_errors(r.global, errs);
  if (r.selection.empty()) errs.push_back({"selection", "must select at least one cell"});
  for (const auto& c : r.selection) {
    if (!piece.in_bounds(c)) {
      errs.push_back({"selection", "cell (" + std::to_string(c.track) + ", " + std::to_string(c.bar) +
                                       ") outside the " + std::to_string(piece.track_count()) + "x" +
                                       std::to_string(piece.bar_count()) + " grid"});
      break;
    }
  }
  for (const auto& c : r.selection)
    if (!r.per_track.contains(c.track)) {
      errs.push_back({"per_track", "missing parameters for selected track " + std::to_string(c.track)});
      break;
    }
  for (const auto& [idx, tp] : r.per_track) {
    if (idx < 0 || idx >= piece.track_count())
      errs.push_back({"per_track", "track " + std::to_string(idx) + " does not exist"});
    collect_errors(tp, "per_track." + std::to_string(idx), errs);
  }
  params_detail::check_int(errs, "batch_size", r.batch_size, 1, bounds::kBatchSizeMax);
  if (!errs.empty()) throw ValidationError(std::move(errs));
}

/// Track polyphony range with the global hard limit applied to its upper end.
inline std::pair<int, int> effective_polyphony(const TrackParams& track, const GlobalParams& global) {
  const int hi = std::min(track.polyphony_max, global.polyphony_hard_limit);
  const int lo = std::min(track.polyphony_min, hi);
  return {lo, hi};
}

}  // namespace calliope

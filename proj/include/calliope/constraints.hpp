#pragma once

// Hard and soft constraint enforcement for one generated cell.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "calliope/error.hpp"
#include "calliope/params.hpp"
#include "calliope/piece.hpp"

namespace calliope {

struct ConstraintReport {
  int clamped_durations = 0;
  int dropped_for_polyphony = 0;
  int dropped_unison_overlaps = 0;
  // Soft constraints: reported, never enforced by mutation.
  int density_target = 0;  // 0 when no density level applies
  int note_count = 0;
  int sparse_onsets = 0;  // onset ticks with fewer than polyphony_min notes

  int density_deviation() const { return density_target == 0 ? 0 : note_count - density_target; }
};

/// Notes-per-bar target for a density level: round(level * beats / 2), at
/// least 1, where beats counts quarter notes in the bar.
inline int target_notes_per_bar(int level, const Bar& bar, int ppq) {
  const double beats = static_cast<double>(bar.length()) / ppq;
  return std::max(1, static_cast<int>(std::lround(level * beats / 2.0)));
}

namespace constraints_detail {

inline bool overlaps(const NoteEvent& a, Tick from, Tick to) { return a.onset < to && a.end() > from; }

// A same-pitch note strictly inside another cannot be written so that
// first-in-first-out pairing reads it back unchanged.
inline bool nested_unison(const NoteEvent& a, const NoteEvent& b) {
  if (a.pitch != b.pitch) return false;
  return (a.onset < b.onset && a.end() > b.end()) || (b.onset < a.onset && b.end() > a.end());
}

}  // namespace constraints_detail

/// Enforces, in order: duration range (clamped to the class lengths, `Any`
/// leaves that side open); no same-pitch note nested inside another; the
/// polyphony hard limit, counting `fixed` notes (already in the track outside
/// this cell) as sounding. Overflow is resolved by dropping generated notes,
/// latest onset first, then lowest velocity, then lowest pitch.
inline std::vector<NoteEvent> enforce_constraints(std::vector<NoteEvent> notes, const EffectiveConstraints& c,
                                                  const Bar& bar, int ppq, std::span<const NoteEvent> fixed = {},
                                                  ConstraintReport* report = nullptr) {
  using namespace constraints_detail;
  ConstraintReport local;
  ConstraintReport& rep = report ? *report : local;
  rep = ConstraintReport{};

  for (const auto& n : notes)
    if (!bar.contains(n.onset))
      throw Error(ErrorCode::NoteOutsideCell, "onset " + std::to_string(n.onset) + " outside bar " +
                                                  std::to_string(bar.index));
  sort_notes(notes);

  const Tick lo = c.duration_range.min == DurationClass::Any ? 1 : duration_ticks(c.duration_range.min, ppq);
  const Tick hi = c.duration_range.max == DurationClass::Any ? 0 : duration_ticks(c.duration_range.max, ppq);
  for (auto& n : notes) {
    Tick d = std::max<Tick>(n.duration, std::max<Tick>(lo, 1));
    if (hi > 0) d = std::min(d, hi);
    if (d != n.duration) ++rep.clamped_durations;
    n.duration = d;
  }

  Tick span_end = bar.end;
  for (const auto& n : notes) span_end = std::max(span_end, n.end());
  std::vector<NoteEvent> context;
  for (const auto& f : fixed)
    if (overlaps(f, bar.start, span_end)) context.push_back(f);

  std::vector<NoteEvent> kept;
  for (const auto& n : notes) {
    const bool clash = std::any_of(context.begin(), context.end(), [&](const auto& o) { return nested_unison(n, o); }) ||
                       std::any_of(kept.begin(), kept.end(), [&](const auto& o) { return nested_unison(n, o); });
    if (clash) {
      ++rep.dropped_unison_overlaps;
    } else {
      kept.push_back(n);
    }
  }

  std::vector<Tick> probes;
  for (const auto& n : kept) probes.push_back(n.onset);
  for (const auto& f : context)
    if (f.onset >= bar.start) probes.push_back(f.onset);
  std::sort(probes.begin(), probes.end());
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());

  const auto limit = static_cast<std::size_t>(std::max(c.polyphony_hard_limit, 1));
  for (Tick t : probes) {
    for (;;) {
      auto sounding = [t](const NoteEvent& n) { return n.onset <= t && n.end() > t; };
      const auto fixed_count = static_cast<std::size_t>(std::count_if(context.begin(), context.end(), sounding));
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < kept.size(); ++i)
        if (sounding(kept[i])) active.push_back(i);
      if (fixed_count + active.size() <= limit || active.empty()) break;
      const auto victim = *std::max_element(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = kept[a];
        const auto& y = kept[b];
        // "less" means "dropped later"
        if (x.onset != y.onset) return x.onset < y.onset;
        if (x.velocity != y.velocity) return x.velocity > y.velocity;
        return x.pitch > y.pitch;
      });
      kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(victim));
      ++rep.dropped_for_polyphony;
    }
  }

  rep.note_count = static_cast<int>(kept.size());
  if (c.density_level > 0) rep.density_target = target_notes_per_bar(c.density_level, bar, ppq);
  if (c.polyphony_min > 1) {
    for (std::size_t i = 0; i < kept.size();) {
      std::size_t j = i;
      while (j < kept.size() && kept[j].onset == kept[i].onset) ++j;
      if (static_cast<int>(j - i) < c.polyphony_min) ++rep.sparse_onsets;
      i = j;
    }
  }
  return kept;
}

/// Convenience form taking raw track and global parameters; a density of 0
/// contributes no density target.
inline std::vector<NoteEvent> enforce_constraints(std::vector<NoteEvent> notes, const TrackParams& track,
                                                  const GlobalParams& global, const Bar& bar, int ppq,
                                                  ConstraintReport* report = nullptr) {
  const auto [pmin, pmax] = effective_polyphony(track, global);
  EffectiveConstraints c{track.instrument, track.note_density, pmin, pmax, global.polyphony_hard_limit,
                         track.duration_range};
  return enforce_constraints(std::move(notes), c, bar, ppq, {}, report);
}

}  // namespace calliope

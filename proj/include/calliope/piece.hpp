#pragma once

// The score model: a multi-track piece segmented into a shared list of bars,
// addressed as (track, bar) cells.

#include <algorithm>
#include <compare>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "calliope/error.hpp"
#include "calliope/gm.hpp"
#include "calliope/midi.hpp"

namespace calliope {

struct Bar {
  int index = 0;
  Tick start = 0;
  Tick end = 0;  // exclusive
  int numerator = 4;
  int denominator = 4;

  bool operator==(const Bar&) const = default;
  Tick length() const { return end - start; }
  bool contains(Tick tick) const { return tick >= start && tick < end; }
};

struct Track {
  std::string name;
  int channel = 0;
  int program = 0;
  bool is_percussion = false;
  std::vector<NoteEvent> notes;  // sorted by note_less

  bool operator==(const Track&) const = default;
  int instrument_group() const { return gm::group_of_program(program); }
  /// Channel used on export; percussion always plays on the GM drum channel.
  int output_channel() const { return is_percussion ? gm::kPercussionChannel : channel; }
};

struct Cell {
  int track = 0;
  int bar = 0;

  auto operator<=>(const Cell&) const = default;
};

using BarSelection = std::set<Cell>;

/// Metadata for a new track, or a partial update of an existing one.
struct TrackMetadata {
  std::optional<std::string> name;
  std::optional<int> channel;
  std::optional<int> program;
  std::optional<bool> is_percussion;
};

struct SegmentReport {
  PairingReport pairing;
  int snapped_time_signatures = 0;
  int inexact_bar_lengths = 0;
};

struct Piece {
  int ppq = 480;
  TempoMap tempo_map;
  std::vector<Bar> bars;
  std::vector<Track> tracks;

  bool operator==(const Piece&) const = default;

  int track_count() const { return static_cast<int>(tracks.size()); }
  int bar_count() const { return static_cast<int>(bars.size()); }
  Tick end_tick() const { return bars.empty() ? 0 : bars.back().end; }
  bool in_bounds(Cell c) const {
    return c.track >= 0 && c.track < track_count() && c.bar >= 0 && c.bar < bar_count();
  }
  /// Index of the bar containing `tick`, or -1 past the end.
  int bar_at(Tick tick) const {
    auto it = std::upper_bound(bars.begin(), bars.end(), tick,
                               [](Tick t, const Bar& b) { return t < b.end; });
    return it == bars.end() ? -1 : it->index;
  }
};

namespace grid_detail {

inline Tick bar_ticks(int numerator, int denominator, int ppq, bool* exact = nullptr) {
  const Tick num = static_cast<Tick>(numerator) * 4 * ppq;
  if (exact) *exact = num % denominator == 0;
  return std::max<Tick>(1, num / denominator);
}

inline void check_cell(const Piece& piece, Cell cell) {
  if (!piece.in_bounds(cell))
    throw Error(ErrorCode::IndexOutOfBounds, "cell (" + std::to_string(cell.track) + ", " +
                                                 std::to_string(cell.bar) + ") outside piece");
}

inline void check_track_index(const Piece& piece, int index) {
  if (index < 0 || index >= piece.track_count())
    throw Error(ErrorCode::IndexOutOfBounds, "track " + std::to_string(index) + " does not exist");
}

inline Track default_track(int ordinal) {
  Track t;
  t.name = "Track " + std::to_string(ordinal);
  return t;
}

inline void apply_metadata(Track& track, const TrackMetadata& meta) {
  auto check = [](int v, int hi, const char* what) {
    if (v < 0 || v > hi) throw Error(ErrorCode::InvalidArgument, std::string(what) + " out of range");
  };
  if (meta.name) track.name = *meta.name;
  if (meta.program) {
    check(*meta.program, 127, "program");
    track.program = *meta.program;
  }
  if (meta.channel) {
    check(*meta.channel, 15, "channel");
    track.channel = *meta.channel;
    if (!meta.is_percussion) track.is_percussion = track.channel == gm::kPercussionChannel;
  }
  if (meta.is_percussion) {
    track.is_percussion = *meta.is_percussion;
    if (track.is_percussion) {
      track.channel = gm::kPercussionChannel;
    } else if (track.channel == gm::kPercussionChannel) {
      track.channel = 0;
    }
  }
  for (auto& n : track.notes) n.channel = static_cast<std::uint8_t>(track.output_channel());
}

/// Builds bars up to `end`, honouring meter changes only on bar boundaries.
inline std::vector<Bar> build_bars(const std::vector<TimeSignaturePoint>& sigs, int ppq, Tick end,
                                   SegmentReport& report) {
  std::vector<Bar> bars;
  std::size_t next = 0;
  TimeSignaturePoint current{};
  Tick start = 0;
  do {
    while (next < sigs.size() && sigs[next].tick <= start) {
      if (sigs[next].tick < start) ++report.snapped_time_signatures;
      current = sigs[next++];
    }
    bool exact = true;
    const Tick len = bar_ticks(current.numerator, current.denominator, ppq, &exact);
    if (!exact) ++report.inexact_bar_lengths;
    bars.push_back(Bar{static_cast<int>(bars.size()), start, start + len, current.numerator,
                       current.denominator});
    start += len;
  } while (start < end);
  return bars;
}

inline std::vector<TimeSignaturePoint> signatures_from_bars(const std::vector<Bar>& bars) {
  std::vector<TimeSignaturePoint> sigs;
  for (const auto& b : bars) {
    if (!sigs.empty() && sigs.back().numerator == b.numerator && sigs.back().denominator == b.denominator)
      continue;
    sigs.push_back(TimeSignaturePoint{b.start, b.numerator, b.denominator});
  }
  return sigs;
}

}  // namespace grid_detail

/// Segments a parsed file into a bar grid. Each (SMF track, channel) pair that
/// carries channel-voice events becomes one track. The piece extends to the
/// later of the last note end and the last End-of-Track, padded to a whole
/// bar; there is always at least one bar and one track.
inline Piece segment_bars(const RawMidiFile& file, SegmentReport* report = nullptr) {
  SegmentReport local;
  SegmentReport& rep = report ? *report : local;
  if (file.division == 0 || (file.division & 0x8000))
    throw Error(ErrorCode::UnsupportedFormat, "only PPQ time division is supported");

  Piece piece;
  piece.ppq = file.division;
  piece.tempo_map = midi::build_tempo_map(file);

  Tick end = 0;
  for (const auto& raw : file.tracks) {
    const auto ticks = midi::absolute_ticks(raw);
    if (!ticks.empty()) end = std::max(end, ticks.back());

    std::set<int> channels;
    std::array<int, 16> program{};
    std::array<bool, 16> program_seen{};
    for (const auto& e : raw.events) {
      if (!e.is_channel()) continue;
      channels.insert(e.channel());
      if (e.command() == 0xC0 && !program_seen[e.channel()]) {
        program_seen[e.channel()] = true;
        program[e.channel()] = e.data[0];
      }
    }
    if (channels.empty()) continue;

    const auto notes = midi::pair_notes(raw, &rep.pairing);
    const std::string name = midi::track_name(raw);
    for (int ch : channels) {
      Track track;
      track.name = name;
      track.channel = ch;
      track.program = program[ch];
      track.is_percussion = ch == gm::kPercussionChannel;
      for (const auto& n : notes) {
        if (n.channel != ch) continue;
        track.notes.push_back(n);
        end = std::max(end, n.end());
      }
      piece.tracks.push_back(std::move(track));
    }
  }
  if (piece.tracks.empty()) piece.tracks.push_back(grid_detail::default_track(1));

  piece.bars = grid_detail::build_bars(piece.tempo_map.time_signatures, piece.ppq, end, rep);
  piece.tempo_map.time_signatures = grid_detail::signatures_from_bars(piece.bars);
  return piece;
}

/// Notes whose onset lies in the cell's half-open bar interval.
inline std::vector<NoteEvent> notes_in_cell(const Piece& piece, Cell cell) {
  grid_detail::check_cell(piece, cell);
  const Bar& bar = piece.bars[cell.bar];
  const auto& notes = piece.tracks[cell.track].notes;
  auto lo = std::lower_bound(notes.begin(), notes.end(), bar.start,
                             [](const NoteEvent& n, Tick t) { return n.onset < t; });
  auto hi = std::lower_bound(lo, notes.end(), bar.end,
                             [](const NoteEvent& n, Tick t) { return n.onset < t; });
  return {lo, hi};
}

/// Returns a copy of `piece` whose cell holds exactly `notes`. Note channels
/// follow the track; durations are cut at the end of the piece.
inline Piece replace_cell_notes(const Piece& piece, Cell cell, std::vector<NoteEvent> notes) {
  grid_detail::check_cell(piece, cell);
  const Bar& bar = piece.bars[cell.bar];
  Piece out = piece;
  Track& track = out.tracks[cell.track];
  for (auto& n : notes) {
    if (!bar.contains(n.onset))
      throw Error(ErrorCode::NoteOutsideCell, "onset " + std::to_string(n.onset) + " outside bar " +
                                                  std::to_string(cell.bar));
    if (n.duration <= 0 || n.pitch > 127 || n.velocity < 1 || n.velocity > 127)
      throw Error(ErrorCode::InvariantViolation, "note fields out of range");
    n.channel = static_cast<std::uint8_t>(track.output_channel());
    n.duration = std::min(n.duration, out.end_tick() - n.onset);
  }
  std::erase_if(track.notes, [&](const NoteEvent& n) { return bar.contains(n.onset); });
  track.notes.insert(track.notes.end(), notes.begin(), notes.end());
  sort_notes(track.notes);
  return out;
}

inline Piece add_track(const Piece& piece, const TrackMetadata& metadata = {}) {
  Piece out = piece;
  Track track = grid_detail::default_track(piece.track_count() + 1);
  grid_detail::apply_metadata(track, metadata);
  out.tracks.push_back(std::move(track));
  return out;
}

inline Piece delete_track(const Piece& piece, int index) {
  grid_detail::check_track_index(piece, index);
  if (piece.track_count() == 1) throw Error(ErrorCode::LastTrackDeletion, "a piece keeps at least one track");
  Piece out = piece;
  out.tracks.erase(out.tracks.begin() + index);
  return out;
}

inline Piece edit_track_metadata(const Piece& piece, int index, const TrackMetadata& patch) {
  grid_detail::check_track_index(piece, index);
  Piece out = piece;
  grid_detail::apply_metadata(out.tracks[index], patch);
  return out;
}

/// Format-1 export: a conductor track with tempo and meter, then one SMF track
/// per piece track. Every track's End-of-Track sits at the end of the last bar.
inline RawMidiFile piece_to_midifile(const Piece& piece) {
  RawMidiFile file;
  file.format = 1;
  file.division = static_cast<std::uint16_t>(piece.ppq);

  struct Timed {
    Tick tick;
    int order;
    RawEvent event;
  };
  auto flush = [](std::vector<Timed>& timed, Tick end) {
    std::stable_sort(timed.begin(), timed.end(), [](const Timed& a, const Timed& b) {
      return std::tie(a.tick, a.order) < std::tie(b.tick, b.order);
    });
    RawTrack track;
    Tick now = 0;
    for (auto& t : timed) {
      t.event.delta = static_cast<std::uint32_t>(t.tick - now);
      now = t.tick;
      track.events.push_back(std::move(t.event));
    }
    track.events.push_back(RawEvent::end_of_track(static_cast<std::uint32_t>(std::max(end, now) - now)));
    return track;
  };

  const Tick end = piece.end_tick();
  std::vector<Timed> conductor;
  for (const auto& sig : piece.tempo_map.time_signatures)
    conductor.push_back({sig.tick, 0, RawEvent::meta(0, midi::kMetaTimeSignature,
                                                     midi::time_signature_payload(sig.numerator, sig.denominator))});
  for (const auto& tp : piece.tempo_map.tempos)
    conductor.push_back({tp.tick, 1, RawEvent::meta(0, midi::kMetaTempo, midi::tempo_payload(tp.micros_per_quarter))});
  file.tracks.push_back(flush(conductor, end));

  for (const auto& track : piece.tracks) {
    const auto ch = static_cast<std::uint8_t>(track.output_channel());
    std::vector<Timed> timed;
    if (!track.name.empty())
      timed.push_back({0, 0, RawEvent::meta(0, midi::kMetaTrackName, Bytes(track.name.begin(), track.name.end()))});
    timed.push_back({0, 1, RawEvent::channel_message(0, 0xC0 | ch, static_cast<std::uint8_t>(track.program))});
    // Offs sort before ons at equal ticks; ons keep canonical note order so
    // first-in-first-out pairing recovers the same durations.
    for (const auto& n : track.notes) {
      timed.push_back({n.onset, 3, RawEvent::channel_message(0, 0x90 | ch, n.pitch, n.velocity)});
      timed.push_back({n.end(), 2, RawEvent::channel_message(0, 0x80 | ch, n.pitch, 64)});
    }
    file.tracks.push_back(flush(timed, end));
  }
  return file;
}

/// Structural validation for pieces loaded from storage.
inline void check_piece(const Piece& piece) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvariantViolation, m); };
  if (piece.ppq <= 0 || piece.ppq >= 0x8000) fail("ppq out of range");
  if (piece.bars.empty()) fail("piece has no bars");
  if (piece.tracks.empty()) fail("piece has no tracks");
  Tick expected = 0;
  for (std::size_t i = 0; i < piece.bars.size(); ++i) {
    const Bar& b = piece.bars[i];
    if (b.index != static_cast<int>(i) || b.start != expected || b.end <= b.start) fail("bars not contiguous");
    if (b.numerator <= 0 || b.denominator <= 0) fail("bad time signature");
    if (b.length() != grid_detail::bar_ticks(b.numerator, b.denominator, piece.ppq)) fail("bar length mismatch");
    expected = b.end;
  }
  for (const auto& t : piece.tracks) {
    if (t.channel < 0 || t.channel > 15 || t.program < 0 || t.program > 127) fail("track metadata out of range");
    if (!std::is_sorted(t.notes.begin(), t.notes.end(), note_less)) fail("notes not sorted");
    for (const auto& n : t.notes) {
      if (n.duration <= 0 || n.pitch > 127 || n.velocity < 1 || n.velocity > 127 || n.channel > 15)
        fail("note fields out of range");
      if (n.onset < 0 || n.end() > piece.end_tick()) fail("note outside piece");
    }
  }
}

}  // namespace calliope

#pragma once

// Standard MIDI File (formats 0 and 1) event model, codec, note pairing and
// tempo/time-signature maps.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calliope/error.hpp"

namespace calliope {

using Tick = std::int64_t;
using Bytes = std::vector<std::uint8_t>;

namespace midi {

inline constexpr std::uint8_t kMetaStatus = 0xFF;
inline constexpr std::uint8_t kSysExStatus = 0xF0;
inline constexpr std::uint8_t kSysExEscape = 0xF7;

inline constexpr std::uint8_t kMetaTrackName = 0x03;
inline constexpr std::uint8_t kMetaEndOfTrack = 0x2F;
inline constexpr std::uint8_t kMetaTempo = 0x51;
inline constexpr std::uint8_t kMetaTimeSignature = 0x58;

inline constexpr std::uint32_t kMaxVarLen = 0x0FFFFFFF;
inline constexpr std::uint32_t kDefaultMicrosPerQuarter = 500000;  // 120 BPM

/// Number of data bytes following a channel-voice status byte.
constexpr int channel_data_length(std::uint8_t status) {
  const std::uint8_t hi = status & 0xF0;
  return (hi == 0xC0 || hi == 0xD0) ? 1 : 2;
}

constexpr bool is_channel_status(std::uint8_t status) { return status >= 0x80 && status < 0xF0; }

}  // namespace midi

/// One event of a track chunk. Running status is always expanded on parse, so
/// every event carries its own status byte.
struct RawEvent {
  std::uint32_t delta = 0;
  std::uint8_t status = 0;     // 0x80-0xEF channel voice, 0xFF meta, 0xF0/0xF7 sysex
  std::uint8_t meta_type = 0;  // meaningful for meta events only
  Bytes data;

  bool operator==(const RawEvent&) const = default;

  bool is_channel() const { return midi::is_channel_status(status); }
  bool is_meta() const { return status == midi::kMetaStatus; }
  bool is_sysex() const { return status == midi::kSysExStatus || status == midi::kSysExEscape; }
  bool is_end_of_track() const { return is_meta() && meta_type == midi::kMetaEndOfTrack; }
  std::uint8_t channel() const { return status & 0x0F; }
  std::uint8_t command() const { return status & 0xF0; }

  static RawEvent channel_message(std::uint32_t delta, std::uint8_t status, std::uint8_t d1,
                                  std::uint8_t d2 = 0) {
    RawEvent e{delta, status, 0, {d1}};
    if (midi::channel_data_length(status) == 2) e.data.push_back(d2);
    return e;
  }
  static RawEvent meta(std::uint32_t delta, std::uint8_t type, Bytes payload = {}) {
    return RawEvent{delta, midi::kMetaStatus, type, std::move(payload)};
  }
  static RawEvent end_of_track(std::uint32_t delta = 0) {
    return meta(delta, midi::kMetaEndOfTrack);
  }
};

struct RawTrack {
  std::vector<RawEvent> events;

  bool operator==(const RawTrack&) const = default;
};

struct RawMidiFile {
  std::uint16_t format = 1;
  std::uint16_t division = 480;  // ticks per quarter note
  std::vector<RawTrack> tracks;

  bool operator==(const RawMidiFile&) const = default;
};

/// Lenient-parse diagnostics.
struct ParseReport {
  int skipped_chunks = 0;
  int missing_end_of_track = 0;
  int trailing_track_bytes = 0;
};

struct NoteEvent {
  Tick onset = 0;
  Tick duration = 1;
  std::uint8_t pitch = 60;
  std::uint8_t velocity = 100;
  std::uint8_t channel = 0;

  bool operator==(const NoteEvent&) const = default;
  Tick end() const { return onset + duration; }
};

/// Canonical note order used by every container of notes.
inline bool note_less(const NoteEvent& a, const NoteEvent& b) {
  return std::tie(a.onset, a.pitch, a.duration, a.velocity, a.channel) <
         std::tie(b.onset, b.pitch, b.duration, b.velocity, b.channel);
}

inline void sort_notes(std::vector<NoteEvent>& notes) {
  std::sort(notes.begin(), notes.end(), note_less);
}

struct PairingReport {
  int orphan_note_offs = 0;
  int unterminated_notes = 0;
  int zero_length_notes = 0;
};

struct TempoPoint {
  Tick tick = 0;
  std::uint32_t micros_per_quarter = midi::kDefaultMicrosPerQuarter;

  bool operator==(const TempoPoint&) const = default;
  double bpm() const { return 60'000'000.0 / micros_per_quarter; }
};

struct TimeSignaturePoint {
  Tick tick = 0;
  int numerator = 4;
  int denominator = 4;

  bool operator==(const TimeSignaturePoint&) const = default;
};

/// Tempo and meter changes, strictly ascending in tick, with an entry at
/// tick 0 for each list (120 BPM and 4/4 when the file has none).
struct TempoMap {
  std::vector<TempoPoint> tempos{TempoPoint{}};
  std::vector<TimeSignaturePoint> time_signatures{TimeSignaturePoint{}};

  bool operator==(const TempoMap&) const = default;
};

namespace midi {

// --- variable-length quantities -------------------------------------------

/// Decodes a variable-length quantity starting at `pos`, advancing it. At
/// most four bytes are accepted.
inline std::uint32_t read_varlen(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    if (pos >= bytes.size()) throw Error(ErrorCode::TruncatedChunk, "variable-length quantity cut off");
    const std::uint8_t b = bytes[pos++];
    value = (value << 7) | (b & 0x7F);
    if ((b & 0x80) == 0) return value;
  }
  throw Error(ErrorCode::BadVarLen, "variable-length quantity longer than 4 bytes");
}

inline void write_varlen(Bytes& out, std::uint32_t value) {
  if (value > kMaxVarLen) throw Error(ErrorCode::InvariantViolation, "value exceeds 28-bit varlen range");
  std::array<std::uint8_t, 4> buf{};
  int n = 0;
  buf[n++] = value & 0x7F;
  while ((value >>= 7) != 0) buf[n++] = static_cast<std::uint8_t>((value & 0x7F) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

namespace detail {

inline std::uint32_t read_be(std::span<const std::uint8_t> bytes, std::size_t pos, int width) {
  std::uint32_t v = 0;
  for (int i = 0; i < width; ++i) v = (v << 8) | bytes[pos + i];
  return v;
}

inline void write_be(Bytes& out, std::uint32_t v, int width) {
  for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline RawTrack parse_track(std::span<const std::uint8_t> chunk, ParseReport& report) {
  RawTrack track;
  std::size_t pos = 0;
  std::uint8_t running = 0;
  while (pos < chunk.size()) {
    RawEvent ev;
    ev.delta = read_varlen(chunk, pos);
    if (pos >= chunk.size()) throw Error(ErrorCode::TruncatedChunk, "event status missing");
    std::uint8_t status = chunk[pos];
    if (status & 0x80) {
      ++pos;
    } else {
      if (running == 0) throw Error(ErrorCode::MalformedEvent, "running status without a prior status byte");
      status = running;
    }
    ev.status = status;

    if (is_channel_status(status)) {
      running = status;
      const int n = channel_data_length(status);
      if (pos + n > chunk.size()) throw Error(ErrorCode::TruncatedChunk, "channel event data cut off");
      for (int i = 0; i < n; ++i) {
        const std::uint8_t d = chunk[pos++];
        if (d & 0x80) throw Error(ErrorCode::MalformedEvent, "data byte has high bit set");
        ev.data.push_back(d);
      }
    } else if (status == kMetaStatus) {
      if (pos >= chunk.size()) throw Error(ErrorCode::TruncatedChunk, "meta type missing");
      ev.meta_type = chunk[pos++];
      const std::uint32_t len = read_varlen(chunk, pos);
      if (len > chunk.size() - pos) throw Error(ErrorCode::TruncatedChunk, "meta payload cut off");
      ev.data.assign(chunk.begin() + pos, chunk.begin() + pos + len);
      pos += len;
    } else if (status == kSysExStatus || status == kSysExEscape) {
      const std::uint32_t len = read_varlen(chunk, pos);
      if (len > chunk.size() - pos) throw Error(ErrorCode::TruncatedChunk, "sysex payload cut off");
      ev.data.assign(chunk.begin() + pos, chunk.begin() + pos + len);
      pos += len;
    } else {
      throw Error(ErrorCode::MalformedEvent, "system message not allowed in a track chunk");
    }

    const bool eot = ev.is_end_of_track();
    track.events.push_back(std::move(ev));
    if (eot) {
      if (pos < chunk.size()) ++report.trailing_track_bytes;
      return track;
    }
  }
  ++report.missing_end_of_track;
  track.events.push_back(RawEvent::end_of_track());
  return track;
}

}  // namespace detail

// --- file codec -------------------------------------------------------------

/// Parses SMF bytes. Unknown meta and sysex events are kept verbatim. A track
/// chunk lacking End-of-Track gets one appended (counted in `report`).
inline RawMidiFile parse_smf(std::span<const std::uint8_t> bytes, ParseReport* report = nullptr) {
  ParseReport local;
  ParseReport& rep = report ? *report : local;

  if (bytes.empty()) throw Error(ErrorCode::MalformedHeader, "empty input");
  if (bytes.size() < 8 || !std::equal(bytes.begin(), bytes.begin() + 4, "MThd"))
    throw Error(ErrorCode::MalformedHeader, "missing MThd");
  const std::uint32_t header_len = detail::read_be(bytes, 4, 4);
  if (header_len < 6) throw Error(ErrorCode::MalformedHeader, "header length below 6");
  if (header_len > bytes.size() - 8) throw Error(ErrorCode::TruncatedChunk, "header chunk cut off");

  RawMidiFile file;
  const std::uint32_t format = detail::read_be(bytes, 8, 2);
  const std::uint32_t ntracks = detail::read_be(bytes, 10, 2);
  const std::uint32_t division = detail::read_be(bytes, 12, 2);
  if (format > 1) throw Error(ErrorCode::UnsupportedFormat, "SMF format " + std::to_string(format));
  if (division & 0x8000) throw Error(ErrorCode::UnsupportedFormat, "SMPTE time division");
  if (division == 0) throw Error(ErrorCode::MalformedHeader, "zero ticks per quarter");
  if (format == 0 && ntracks != 1)
    throw Error(ErrorCode::MalformedHeader, "format 0 declares " + std::to_string(ntracks) + " tracks");
  file.format = static_cast<std::uint16_t>(format);
  file.division = static_cast<std::uint16_t>(division);

  std::size_t pos = 8 + header_len;
  while (file.tracks.size() < ntracks) {
    if (bytes.size() - pos < 8) throw Error(ErrorCode::TruncatedChunk, "chunk header cut off");
    const bool is_track = std::equal(bytes.begin() + pos, bytes.begin() + pos + 4, "MTrk");
    const std::uint32_t len = detail::read_be(bytes, pos + 4, 4);
    pos += 8;
    if (len > bytes.size() - pos) throw Error(ErrorCode::TruncatedChunk, "chunk body cut off");
    if (is_track) {
      file.tracks.push_back(detail::parse_track(bytes.subspan(pos, len), rep));
    } else {
      ++rep.skipped_chunks;
    }
    pos += len;
  }
  return file;
}

inline void check_invariants(const RawMidiFile& file) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvariantViolation, m); };
  if (file.format > 1) fail("format must be 0 or 1");
  if (file.format == 0 && file.tracks.size() != 1) fail("format 0 requires exactly one track");
  if (file.division == 0 || (file.division & 0x8000)) fail("division must be a positive PPQ below 0x8000");
  if (file.tracks.size() > 0xFFFF) fail("too many tracks");
  for (std::size_t t = 0; t < file.tracks.size(); ++t) {
    const auto& events = file.tracks[t].events;
    const std::string where = "track " + std::to_string(t) + ": ";
    if (events.empty() || !events.back().is_end_of_track()) fail(where + "must end with End-of-Track");
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& e = events[i];
      if (e.delta > kMaxVarLen) fail(where + "delta exceeds varlen range");
      if (e.is_end_of_track() && i + 1 != events.size()) fail(where + "End-of-Track before last event");
      if (e.is_channel()) {
        if (static_cast<int>(e.data.size()) != channel_data_length(e.status))
          fail(where + "channel event has wrong data length");
        for (auto d : e.data)
          if (d & 0x80) fail(where + "data byte above 127");
      } else if (!e.is_meta() && !e.is_sysex()) {
        fail(where + "unsupported status byte");
      }
      if (e.data.size() > kMaxVarLen) fail(where + "payload too large");
    }
  }
}

/// Serializes with an explicit status byte on every event (no running status).
inline Bytes write_smf(const RawMidiFile& file) {
  check_invariants(file);
  Bytes out{'M', 'T', 'h', 'd'};
  detail::write_be(out, 6, 4);
  detail::write_be(out, file.format, 2);
  detail::write_be(out, static_cast<std::uint32_t>(file.tracks.size()), 2);
  detail::write_be(out, file.division, 2);

  for (const auto& track : file.tracks) {
    Bytes body;
    for (const auto& e : track.events) {
      write_varlen(body, e.delta);
      body.push_back(e.status);
      if (e.is_meta()) {
        body.push_back(e.meta_type);
        write_varlen(body, static_cast<std::uint32_t>(e.data.size()));
      } else if (e.is_sysex()) {
        write_varlen(body, static_cast<std::uint32_t>(e.data.size()));
      }
      body.insert(body.end(), e.data.begin(), e.data.end());
    }
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    detail::write_be(out, static_cast<std::uint32_t>(body.size()), 4);
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

// --- track utilities ----------------------------------------------------------

inline std::vector<Tick> absolute_ticks(const RawTrack& track) {
  std::vector<Tick> ticks;
  ticks.reserve(track.events.size());
  Tick now = 0;
  for (const auto& e : track.events) ticks.push_back(now += e.delta);
  return ticks;
}

inline std::string track_name(const RawTrack& track) {
  for (const auto& e : track.events)
    if (e.is_meta() && e.meta_type == kMetaTrackName) return std::string(e.data.begin(), e.data.end());
  return {};
}

/// Pairs note-on/note-off events. Velocity-0 note-ons are note-offs; repeated
/// same-pitch note-ons are matched first-in-first-out; notes still sounding
/// at End-of-Track are closed there.
inline std::vector<NoteEvent> pair_notes(const RawTrack& track, PairingReport* report = nullptr) {
  PairingReport local;
  PairingReport& rep = report ? *report : local;

  struct Pending {
    Tick onset;
    std::uint8_t velocity;
  };
  std::map<int, std::deque<Pending>> sounding;  // key: channel * 128 + pitch
  std::vector<NoteEvent> notes;

  auto close = [&](int key, const Pending& p, Tick at) {
    Tick dur = at - p.onset;
    if (dur <= 0) {
      dur = 1;
      ++rep.zero_length_notes;
    }
    notes.push_back(NoteEvent{p.onset, dur, static_cast<std::uint8_t>(key % 128), p.velocity,
                              static_cast<std::uint8_t>(key / 128)});
  };

  Tick now = 0;
  for (const auto& e : track.events) {
    now += e.delta;
    if (!e.is_channel()) continue;
    const std::uint8_t cmd = e.command();
    if (cmd != 0x90 && cmd != 0x80) continue;
    const int key = e.channel() * 128 + e.data[0];
    if (cmd == 0x90 && e.data[1] > 0) {
      sounding[key].push_back(Pending{now, e.data[1]});
    } else {
      auto it = sounding.find(key);
      if (it == sounding.end() || it->second.empty()) {
        ++rep.orphan_note_offs;
        continue;
      }
      close(key, it->second.front(), now);
      it->second.pop_front();
    }
  }
  for (auto& [key, queue] : sounding) {
    for (const auto& p : queue) {
      ++rep.unterminated_notes;
      close(key, p, now);
    }
  }
  sort_notes(notes);
  return notes;
}

// --- tempo map ------------------------------------------------------------------

/// Collects tempo and time-signature meta events from every track. When two
/// entries share a tick the one from the later track wins.
inline TempoMap build_tempo_map(const RawMidiFile& file) {
  std::map<Tick, std::uint32_t> tempos;
  std::map<Tick, std::pair<int, int>> sigs;
  for (const auto& track : file.tracks) {
    Tick now = 0;
    for (const auto& e : track.events) {
      now += e.delta;
      if (!e.is_meta()) continue;
      if (e.meta_type == kMetaTempo && e.data.size() == 3) {
        const std::uint32_t us = (e.data[0] << 16) | (e.data[1] << 8) | e.data[2];
        if (us > 0) tempos[now] = us;
      } else if (e.meta_type == kMetaTimeSignature && e.data.size() >= 2) {
        if (e.data[0] > 0 && e.data[1] <= 6) sigs[now] = {e.data[0], 1 << e.data[1]};
      }
    }
  }
  TempoMap map;
  map.tempos.clear();
  map.time_signatures.clear();
  if (!tempos.contains(0)) map.tempos.push_back(TempoPoint{});
  for (const auto& [tick, us] : tempos) {
    if (!map.tempos.empty() && map.tempos.back().micros_per_quarter == us) continue;
    map.tempos.push_back(TempoPoint{tick, us});
  }
  if (!sigs.contains(0)) map.time_signatures.push_back(TimeSignaturePoint{});
  for (const auto& [tick, sig] : sigs) {
    if (!map.time_signatures.empty() && map.time_signatures.back().numerator == sig.first &&
        map.time_signatures.back().denominator == sig.second)
      continue;
    map.time_signatures.push_back(TimeSignaturePoint{tick, sig.first, sig.second});
  }
  return map;
}

/// Seconds elapsed from tick 0 to `tick`, integrating over tempo segments.
inline double tick_to_seconds(const TempoMap& map, Tick tick, int ppq) {
  if (tick <= 0) return 0.0;
  double micros = 0.0;
  Tick seg_start = 0;
  double us_per_q = midi::kDefaultMicrosPerQuarter;
  for (const auto& tp : map.tempos) {
    if (tp.tick >= tick) break;
    micros += static_cast<double>(tp.tick - seg_start) * us_per_q;
    seg_start = tp.tick;
    us_per_q = tp.micros_per_quarter;
  }
  micros += static_cast<double>(tick - seg_start) * us_per_q;
  return micros / ppq / 1e6;
}

inline Bytes tempo_payload(std::uint32_t micros_per_quarter) {
  return {static_cast<std::uint8_t>(micros_per_quarter >> 16),
          static_cast<std::uint8_t>(micros_per_quarter >> 8),
          static_cast<std::uint8_t>(micros_per_quarter)};
}

inline Bytes time_signature_payload(int numerator, int denominator) {
  std::uint8_t power = 0;
  while ((1 << power) < denominator) ++power;
  return {static_cast<std::uint8_t>(numerator), power, 24, 8};
}

}  // namespace midi
}  // namespace calliope

#pragma once

// Shared generators for property tests.

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "calliope/midi.hpp"
#include "calliope/params.hpp"
#include "calliope/piece.hpp"

namespace calliope::testing {

/// Random valid RawMidiFile: channel messages of every kind, tempo/meter and
/// unknown metas, sysex blobs; each track closed by End-of-Track.
inline RawMidiFile random_midifile(std::mt19937_64& gen) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  RawMidiFile f;
  f.format = static_cast<std::uint16_t>(pick(0, 1));
  f.division = static_cast<std::uint16_t>(pick(1, 0x7FFF));
  const int ntracks = f.format == 0 ? 1 : pick(0, 4);
  for (int t = 0; t < ntracks; ++t) {
    RawTrack track;
    const int nevents = pick(0, 40);
    for (int i = 0; i < nevents; ++i) {
      const auto delta = static_cast<std::uint32_t>(pick(0, 3) == 0 ? pick(0, 0x0FFFFFFF) : pick(0, 960));
      const int kind = pick(0, 9);
      if (kind < 7) {
        static constexpr std::uint8_t kCommands[] = {0x80, 0x90, 0xA0, 0xB0, 0xC0, 0xD0, 0xE0};
        const auto status = static_cast<std::uint8_t>(kCommands[pick(0, 6)] | pick(0, 15));
        track.events.push_back(RawEvent::channel_message(delta, status, static_cast<std::uint8_t>(pick(0, 127)),
                                                         static_cast<std::uint8_t>(pick(0, 127))));
      } else if (kind < 9) {
        static constexpr std::uint8_t kMetaTypes[] = {0x01, 0x03, 0x21, 0x51, 0x58, 0x59, 0x7F, 0x60};
        const auto type = kMetaTypes[pick(0, 7)];
        Bytes payload(static_cast<std::size_t>(pick(0, 20)));
        for (auto& b : payload) b = static_cast<std::uint8_t>(pick(0, 255));
        track.events.push_back(RawEvent::meta(delta, type, payload));
      } else {
        Bytes payload(static_cast<std::size_t>(pick(0, 200)));
        for (auto& b : payload) b = static_cast<std::uint8_t>(pick(0, 127));
        track.events.push_back(RawEvent{delta, pick(0, 1) ? midi::kSysExStatus : midi::kSysExEscape, 0, payload});
      }
    }
    track.events.push_back(RawEvent::end_of_track(static_cast<std::uint32_t>(pick(0, 100))));
    f.tracks.push_back(std::move(track));
  }
  return f;
}

struct PieceShape {
  int tracks = 2;
  int bars = 4;
  int ppq = 480;
  int max_notes_per_bar = 4;
  bool monophonic = false;
};

/// Random piece in 4/4. Same-pitch notes never nest, so the piece survives a
/// MIDI round trip unchanged.
inline Piece random_piece(std::mt19937_64& gen, const PieceShape& shape) {
  auto pick = [&](long long lo, long long hi) { return std::uniform_int_distribution<long long>(lo, hi)(gen); };
  Piece p;
  p.ppq = shape.ppq;
  const Tick bar_len = 4LL * shape.ppq;
  for (int b = 0; b < shape.bars; ++b) p.bars.push_back(Bar{b, b * bar_len, (b + 1) * bar_len, 4, 4});
  p.tempo_map.tempos = {TempoPoint{0, static_cast<std::uint32_t>(pick(300000, 900000))}};
  for (int t = 0; t < shape.tracks; ++t) {
    Track track;
    track.name = "T" + std::to_string(t);
    track.channel = t % 16 == 9 ? 10 : t % 16;
    track.program = static_cast<int>(pick(0, 127));
    const Tick end = p.end_tick();
    if (shape.monophonic) {
      Tick at = pick(0, shape.ppq);
      while (at < end) {
        const Tick dur = std::min<Tick>(pick(shape.ppq / 8, shape.ppq * 2), end - at);
        track.notes.push_back(NoteEvent{at, dur, static_cast<std::uint8_t>(pick(36, 84)),
                                        static_cast<std::uint8_t>(pick(1, 127)),
                                        static_cast<std::uint8_t>(track.channel)});
        at += dur + pick(0, shape.ppq);
        if (static_cast<int>(track.notes.size()) >= shape.max_notes_per_bar * shape.bars) break;
      }
    } else {
      std::map<int, Tick> busy_until;  // pitch -> end of last note
      for (int b = 0; b < shape.bars; ++b) {
        const int n = static_cast<int>(pick(0, shape.max_notes_per_bar));
        std::vector<Tick> onsets;
        for (int i = 0; i < n; ++i) onsets.push_back(b * bar_len + pick(0, bar_len - 1));
        std::sort(onsets.begin(), onsets.end());
        for (Tick on : onsets) {
          const int pitch = static_cast<int>(pick(36, 84));
          if (busy_until[pitch] > on) continue;
          const Tick dur = std::min<Tick>(pick(1, shape.ppq * 3), end - on);
          busy_until[pitch] = on + dur;
          track.notes.push_back(NoteEvent{on, dur, static_cast<std::uint8_t>(pitch),
                                          static_cast<std::uint8_t>(pick(1, 127)),
                                          static_cast<std::uint8_t>(track.channel)});
        }
      }
    }
    sort_notes(track.notes);
    p.tracks.push_back(std::move(track));
  }
  return p;
}

/// Maximum number of simultaneously sounding notes, by sweep line.
inline int max_simultaneous(const std::vector<NoteEvent>& notes) {
  std::vector<std::pair<Tick, int>> events;
  for (const auto& n : notes) {
    events.push_back({n.onset, +1});
    events.push_back({n.end(), -1});
  }
  std::sort(events.begin(), events.end());  // -1 before +1 at equal ticks
  int active = 0;
  int peak = 0;
  for (const auto& [tick, d] : events) peak = std::max(peak, active += d);
  return peak;
}

inline TrackParams default_track_params() { return TrackParams{}; }

inline GenerationRequest full_request(const Piece& piece, BarSelection selection, int batch, std::uint64_t seed) {
  GenerationRequest r;
  r.selection = std::move(selection);
  for (const auto& c : r.selection) r.per_track[c.track] = TrackParams{};
  (void)piece;
  r.batch_size = batch;
  r.seed = seed;
  return r;
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k < j; ++k) r[idx[k]] = (static_cast<double>(i + j - 1)) / 2.0 + 1.0;
      i = j;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Upper 1% point of the chi-square distribution with 9 degrees of freedom.
inline constexpr double kChiSquare9At001 = 21.665994333461924;

}  // namespace calliope::testing

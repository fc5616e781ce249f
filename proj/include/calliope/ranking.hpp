#pragma once

// Feature-distance ranking of generated pieces against a reference piece.
//
// Each track contributes a fixed block of statistics; pieces with different
// track counts are compared after zero-padding the shorter vector. Tracks are
// positional, so reordering tracks changes the vector.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "calliope/error.hpp"
#include "calliope/generator.hpp"
#include "calliope/piece.hpp"

namespace calliope {

struct TrackFeatures {
  std::array<double, 12> pitch_class_histogram{};
  std::array<double, 7> duration_class_histogram{};  // indexed by DurationClass; Any = off-scale
  double notes_per_bar_mean = 0;
  double notes_per_bar_stddev = 0;
  double mean_polyphony = 0;

  static constexpr std::size_t kSize = 12 + 7 + 3;
};

struct FeatureVector {
  std::vector<TrackFeatures> tracks;

  /// Concatenation over tracks in index order, zero-padded to `track_count`.
  std::vector<double> flatten(std::size_t track_count = 0) const {
    std::vector<double> out;
    out.reserve(std::max(track_count, tracks.size()) * TrackFeatures::kSize);
    for (const auto& t : tracks) {
      out.insert(out.end(), t.pitch_class_histogram.begin(), t.pitch_class_histogram.end());
      out.insert(out.end(), t.duration_class_histogram.begin(), t.duration_class_histogram.end());
      out.push_back(t.notes_per_bar_mean);
      out.push_back(t.notes_per_bar_stddev);
      out.push_back(t.mean_polyphony);
    }
    if (track_count > tracks.size()) out.resize(track_count * TrackFeatures::kSize, 0.0);
    return out;
  }
};

/// Time-weighted mean count of sounding notes over the ticks where at least
/// one note sounds.
inline double mean_polyphony(const std::vector<NoteEvent>& notes) {
  std::map<Tick, int> delta;
  for (const auto& n : notes) {
    ++delta[n.onset];
    --delta[n.end()];
  }
  double weighted = 0;
  double sounding_ticks = 0;
  int active = 0;
  Tick prev = 0;
  for (const auto& [tick, d] : delta) {
    if (active > 0) {
      weighted += static_cast<double>(active) * static_cast<double>(tick - prev);
      sounding_ticks += static_cast<double>(tick - prev);
    }
    active += d;
    prev = tick;
  }
  return sounding_ticks > 0 ? weighted / sounding_ticks : 0.0;
}

inline TrackFeatures extract_track_features(const Piece& piece, const Track& track) {
  TrackFeatures f;
  if (track.notes.empty()) return f;
  const double n = static_cast<double>(track.notes.size());
  for (const auto& note : track.notes) {
    f.pitch_class_histogram[note.pitch % 12] += 1.0 / n;
    f.duration_class_histogram[static_cast<int>(nearest_duration_class(note.duration, piece.ppq))] += 1.0 / n;
  }
  std::vector<double> per_bar(piece.bars.size(), 0.0);
  for (const auto& note : track.notes) {
    const int b = piece.bar_at(note.onset);
    if (b >= 0) per_bar[b] += 1.0;
  }
  if (!per_bar.empty()) {
    double sum = 0;
    for (double c : per_bar) sum += c;
    f.notes_per_bar_mean = sum / static_cast<double>(per_bar.size());
    double var = 0;
    for (double c : per_bar) var += (c - f.notes_per_bar_mean) * (c - f.notes_per_bar_mean);
    f.notes_per_bar_stddev = std::sqrt(var / static_cast<double>(per_bar.size()));
  }
  f.mean_polyphony = mean_polyphony(track.notes);
  return f;
}

inline FeatureVector extract_features(const Piece& piece) {
  FeatureVector v;
  for (const auto& t : piece.tracks) v.tracks.push_back(extract_track_features(piece, t));
  return v;
}

/// Euclidean distance between equally sized vectors.
inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " dimensions");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum);
}

/// Distance between two pieces' features after padding to the larger track count.
inline double distance(const FeatureVector& a, const FeatureVector& b) {
  const std::size_t tracks = std::max(a.tracks.size(), b.tracks.size());
  return distance(a.flatten(tracks), b.flatten(tracks));
}

struct RankedEntry {
  std::string id;
  double distance = 0;
  int rank = 0;

  bool operator==(const RankedEntry&) const = default;
};

using RankedList = std::vector<RankedEntry>;

/// Ascending distance to the reference; ties broken by ascending id.
inline RankedList rank_outputs(const Piece& reference, const std::vector<std::pair<std::string, Piece>>& candidates) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "nothing to rank");
  const FeatureVector ref = extract_features(reference);
  RankedList list;
  list.reserve(candidates.size());
  for (const auto& [id, piece] : candidates) list.push_back({id, distance(ref, extract_features(piece)), 0});
  std::sort(list.begin(), list.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < list.size(); ++i) list[i].rank = static_cast<int>(i) + 1;
  return list;
}

/// Keeps entries with distance <= threshold; ranks are left as assigned.
inline RankedList filter_by_threshold(const RankedList& list, double threshold) {
  RankedList out;
  std::copy_if(list.begin(), list.end(), std::back_inserter(out),
               [&](const RankedEntry& e) { return e.distance <= threshold; });
  return out;
}

}  // namespace calliope

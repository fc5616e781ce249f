#pragma once

// Pluggable bar-infilling generators and the built-in context-conditioned
// Markov generator.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "calliope/constraints.hpp"
#include "calliope/params.hpp"
#include "calliope/piece.hpp"
#include "calliope/plan.hpp"
#include "calliope/rng.hpp"
#include "calliope/sampling.hpp"

namespace calliope {

using CellNotes = std::map<Cell, std::vector<NoteEvent>>;

/// What a generator sees for one plan step. Target cells still hold their
/// previous notes in `piece`; generators should treat them as replaceable.
struct GenerationContext {
  const Piece& piece;
  BarRange window;
  std::span<const Cell> targets;
  std::span<const Cell> context;
  const std::map<int, EffectiveConstraints>& constraints;  // keyed by track index
  double temperature = 1.0;
};

class Generator {
 public:
  virtual ~Generator() = default;

  /// Notes for each target cell, onsets inside the cell. Must be
  /// deterministic given the context and the state of `rng`.
  virtual CellNotes generate_cells(const GenerationContext& ctx, Rng& rng) = 0;

  /// False when calls must not overlap (e.g. one exclusive model process).
  virtual bool concurrent_safe() const { return true; }
  virtual std::string name() const = 0;
};

/// Duration class whose length is nearest in log scale, or `Any` when the
/// duration is more than half an octave outside 1/32..Whole.
inline DurationClass nearest_duration_class(Tick duration, int ppq) {
  if (duration <= 0) return DurationClass::Any;
  const double whole_fraction = static_cast<double>(duration) / (4.0 * ppq);
  const double octaves = std::log2(whole_fraction);  // 0 = whole, -5 = 1/32
  if (octaves < -5.5 || octaves > 0.5) return DurationClass::Any;
  const int idx = static_cast<int>(std::lround(octaves)) + 6;
  return static_cast<DurationClass>(std::clamp(idx, 1, 6));
}

/// Order-1 pitch Markov chain plus onset-grid occupancy, both estimated from
/// the step's context cells. Every categorical draw goes through
/// temperature_sample.
class ContextMarkovGenerator : public Generator {
 public:
  static constexpr std::array<int, 5> kPentatonic = {0, 2, 4, 7, 9};
  static constexpr int kDefaultVelocity = 80;

  std::string name() const override { return "context-markov/1"; }

  CellNotes generate_cells(const GenerationContext& ctx, Rng& rng) override {
    CellNotes out;
    for (const Cell& cell : ctx.targets) out[cell] = fill_cell(ctx, cell, rng);
    return out;
  }

 private:
  struct Model {
    std::vector<int> support;                          // ascending pitches
    std::map<int, std::map<int, double>> transitions;  // from -> to -> count
    std::map<int, double> unigram;
    std::vector<double> grid_weights;
    std::vector<double> duration_weights;  // parallel to allowed classes
    std::vector<DurationClass> allowed;
    int velocity = kDefaultVelocity;
    int previous_pitch = -1;
  };

  static std::vector<NoteEvent> collect(const GenerationContext& ctx, int track_filter) {
    std::vector<NoteEvent> notes;
    for (const Cell& c : ctx.context) {
      if (track_filter >= 0 && c.track != track_filter) continue;
      auto cell_notes = notes_in_cell(ctx.piece, c);
      notes.insert(notes.end(), cell_notes.begin(), cell_notes.end());
    }
    sort_notes(notes);
    return notes;
  }

  static Model estimate(const GenerationContext& ctx, Cell cell, const EffectiveConstraints& c) {
    const Piece& piece = ctx.piece;
    const Bar& bar = piece.bars[cell.bar];
    const auto own = collect(ctx, cell.track);
    const auto all = collect(ctx, -1);
    Model m;

    if (!own.empty()) {
      std::set<int> pitches;
      for (std::size_t i = 0; i < own.size(); ++i) {
        pitches.insert(own[i].pitch);
        m.unigram[own[i].pitch] += 1.0;
        if (i + 1 < own.size()) m.transitions[own[i].pitch][own[i + 1].pitch] += 1.0;
        if (own[i].onset < bar.start) m.previous_pitch = own[i].pitch;
      }
      m.support.assign(pitches.begin(), pitches.end());
    } else {
      int root = 60;
      if (!all.empty()) {
        std::vector<int> ps;
        for (const auto& n : all) ps.push_back(n.pitch);
        std::nth_element(ps.begin(), ps.begin() + ps.size() / 2, ps.end());
        root = ps[ps.size() / 2];
      }
      for (int step : kPentatonic)
        if (root + step <= 127) m.support.push_back(root + step);
      for (int p : m.support) m.unigram[p] = 1.0;
    }

    const Tick grid = std::max<Tick>(1, piece.ppq / 4);
    const auto slots = static_cast<std::size_t>((bar.length() + grid - 1) / grid);
    m.grid_weights.assign(std::max<std::size_t>(slots, 1), 0.25);
    const auto& occupancy_source = own.empty() ? all : own;
    for (const auto& n : occupancy_source) {
      const int b = piece.bar_at(n.onset);
      if (b < 0) continue;
      const auto slot = static_cast<std::size_t>((n.onset - piece.bars[b].start) / grid);
      if (slot < m.grid_weights.size()) m.grid_weights[slot] += 1.0;
    }

    m.allowed = c.duration_range.allowed();
    m.duration_weights.assign(m.allowed.size(), 1.0);
    for (const auto& n : own.empty() ? all : own) {
      const auto cls = nearest_duration_class(n.duration, piece.ppq);
      for (std::size_t i = 0; i < m.allowed.size(); ++i)
        if (m.allowed[i] == cls) m.duration_weights[i] += 1.0;
    }

    if (!occupancy_source.empty()) {
      double sum = 0;
      for (const auto& n : occupancy_source) sum += n.velocity;
      m.velocity = static_cast<int>(std::lround(sum / static_cast<double>(occupancy_source.size())));
    }
    return m;
  }

  static int draw_from(const std::map<int, double>& counts, const std::vector<int>& exclude, double temperature,
                       Rng& rng) {
    std::vector<int> keys;
    std::vector<double> weights;
    for (const auto& [k, w] : counts) {
      if (w <= 0 || std::find(exclude.begin(), exclude.end(), k) != exclude.end()) continue;
      keys.push_back(k);
      weights.push_back(w);
    }
    if (keys.empty()) return -1;
    return keys[temperature_sample(weights, temperature, rng)];
  }

  static std::vector<NoteEvent> fill_cell(const GenerationContext& ctx, Cell cell, Rng& rng) {
    const Piece& piece = ctx.piece;
    const Bar& bar = piece.bars[cell.bar];
    const Track& track = piece.tracks[cell.track];
    const EffectiveConstraints& c = ctx.constraints.at(cell.track);
    const double temp = ctx.temperature;
    Model m = estimate(ctx, cell, c);

    const int target = target_notes_per_bar(c.density_level, bar, piece.ppq);
    static constexpr std::array<double, 3> kSpread = {1.0, 2.0, 1.0};
    const int wanted = std::max(1, target + static_cast<int>(temperature_sample(kSpread, temp, rng)) - 1);

    const int chord_lo = std::max(1, c.polyphony_min);
    const int chord_hi = std::max(chord_lo, std::min(std::max(1, c.polyphony_max), c.polyphony_hard_limit));
    const std::vector<double> chord_weights(static_cast<std::size_t>(chord_hi - chord_lo + 1), 1.0);

    struct Onset {
      std::size_t slot;
      int size;
    };
    std::vector<Onset> onsets;
    std::vector<std::size_t> free_slots(m.grid_weights.size());
    for (std::size_t i = 0; i < free_slots.size(); ++i) free_slots[i] = i;
    int placed = 0;
    while (placed < wanted && !free_slots.empty()) {
      std::vector<double> w;
      for (auto s : free_slots) w.push_back(m.grid_weights[s]);
      const auto pick = temperature_sample(w, temp, rng);
      const std::size_t slot = free_slots[pick];
      free_slots.erase(free_slots.begin() + static_cast<std::ptrdiff_t>(pick));
      int size = chord_lo + static_cast<int>(temperature_sample(chord_weights, temp, rng));
      size = std::min({size, wanted - placed, static_cast<int>(m.support.size())});
      onsets.push_back({slot, size});
      placed += size;
    }
    std::sort(onsets.begin(), onsets.end(), [](const Onset& a, const Onset& b) { return a.slot < b.slot; });

    const Tick grid = std::max<Tick>(1, piece.ppq / 4);
    const Tick min_len = duration_ticks(m.allowed.front(), piece.ppq);
    std::vector<NoteEvent> notes;
    int previous = m.previous_pitch;
    for (std::size_t i = 0; i < onsets.size(); ++i) {
      const Tick onset = bar.start + static_cast<Tick>(onsets[i].slot) * grid;
      const Tick next = i + 1 < onsets.size() ? bar.start + static_cast<Tick>(onsets[i + 1].slot) * grid : bar.end;

      std::vector<int> chord;
      int root = -1;
      if (previous >= 0) {
        auto row = m.transitions.find(previous);
        if (row != m.transitions.end()) root = draw_from(row->second, chord, temp, rng);
      }
      if (root < 0) root = draw_from(m.unigram, chord, temp, rng);
      chord.push_back(root);
      while (static_cast<int>(chord.size()) < onsets[i].size) {
        const int extra = draw_from(m.unigram, chord, temp, rng);
        if (extra < 0) break;
        chord.push_back(extra);
      }
      previous = root;

      const auto cls = m.allowed[temperature_sample(m.duration_weights, temp, rng)];
      const Tick len = std::max(min_len, std::min(duration_ticks(cls, piece.ppq), next - onset));
      const int jitter = static_cast<int>(rng.uniform_int(-8, 8));
      const auto velocity = static_cast<std::uint8_t>(std::clamp(m.velocity + jitter, 1, 127));
      for (int p : chord)
        notes.push_back(NoteEvent{onset, std::max<Tick>(1, len), static_cast<std::uint8_t>(p), velocity,
                                  static_cast<std::uint8_t>(track.output_channel())});
    }
    sort_notes(notes);
    return notes;
  }
};

}  // namespace calliope

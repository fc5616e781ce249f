#pragma once

// Step planner: splits a bar selection into model-window-sized generation
// steps over blocks of tracks.

#include <algorithm>
#include <vector>

#include "calliope/error.hpp"
#include "calliope/params.hpp"
#include "calliope/piece.hpp"
#include "calliope/rng.hpp"

namespace calliope {

/// Inclusive bar interval.
struct BarRange {
  int first = 0;
  int last = 0;

  bool operator==(const BarRange&) const = default;
  int size() const { return last - first + 1; }
  bool contains(int bar) const { return bar >= first && bar <= last; }
};

struct GenerationStep {
  std::vector<int> track_block;
  BarRange window;           // bars the model sees in this step
  BarRange step_bars;        // leading bars_per_step bars of the window
  std::vector<Cell> candidates;  // (track_block x step_bars) intersected with the selection
  std::vector<Cell> targets;     // cells regenerated in this step
  std::vector<Cell> context;     // read-only cells handed to the generator
};

struct StepPlan {
  std::vector<GenerationStep> steps;
  std::vector<Cell> unvisited;  // selected cells no step targets

  std::size_t target_count() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.targets.size();
    return n;
  }
};

/// ceil(percentage / 100 * candidates), in integers.
constexpr std::size_t target_quota(int percentage, std::size_t candidates) {
  return (static_cast<std::size_t>(percentage) * candidates + 99) / 100;
}

/// Windows of `model_dim` bars start at the first selected bar and advance by
/// `bars_per_step`; each step regenerates the leading `bars_per_step` bars of
/// its window for one block of `tracks_per_step` consecutive tracks. Within a
/// step a uniformly random `percentage` share (rounded up) of the selected
/// candidates becomes the target set. Context is every other cell of the
/// window across all tracks plus up to `model_dim` bars preceding the window
/// on the block's tracks.
inline StepPlan plan_steps(const BarSelection& selection, const GlobalParams& global, int n_tracks, int n_bars,
                           Rng& rng) {
  if (selection.empty()) throw Error(ErrorCode::EmptySelection, "no cells selected");
  if (global.model_dim < 1 || global.tracks_per_step < 1 || global.bars_per_step < 1)
    throw Error(ErrorCode::InvalidArgument, "window sizes must be positive");
  int first_bar = n_bars;
  int last_bar = -1;
  for (const auto& c : selection) {
    if (c.track < 0 || c.track >= n_tracks || c.bar < 0 || c.bar >= n_bars)
      throw Error(ErrorCode::IndexOutOfBounds, "selected cell outside the grid");
    first_bar = std::min(first_bar, c.bar);
    last_bar = std::max(last_bar, c.bar);
  }

  StepPlan plan;
  for (int ws = first_bar; ws <= last_bar; ws += global.bars_per_step) {
    const BarRange window{ws, std::min(ws + global.model_dim - 1, n_bars - 1)};
    const BarRange step_bars{ws, std::min(ws + global.bars_per_step - 1, n_bars - 1)};
    for (int tb = 0; tb < n_tracks; tb += global.tracks_per_step) {
      GenerationStep step;
      step.window = window;
      step.step_bars = step_bars;
      for (int t = tb; t < std::min(tb + global.tracks_per_step, n_tracks); ++t) step.track_block.push_back(t);

      for (int t : step.track_block)
        for (int b = step_bars.first; b <= step_bars.last; ++b)
          if (selection.contains(Cell{t, b})) step.candidates.push_back(Cell{t, b});
      if (step.candidates.empty()) continue;

      const std::size_t quota = target_quota(global.percentage, step.candidates.size());
      std::vector<Cell> pool = step.candidates;
      if (quota < pool.size()) {
        for (std::size_t i = 0; i < quota; ++i) {
          const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                  static_cast<std::int64_t>(pool.size() - 1)));
          std::swap(pool[i], pool[j]);
        }
        pool.resize(quota);
        std::sort(pool.begin(), pool.end());
      }
      step.targets = std::move(pool);

      const BarSelection target_set(step.targets.begin(), step.targets.end());
      BarSelection context;
      for (int t = 0; t < n_tracks; ++t)
        for (int b = window.first; b <= window.last; ++b)
          if (!target_set.contains(Cell{t, b})) context.insert(Cell{t, b});
      for (int t : step.track_block)
        for (int b = std::max(0, window.first - global.model_dim); b < window.first; ++b) context.insert(Cell{t, b});
      step.context.assign(context.begin(), context.end());

      plan.steps.push_back(std::move(step));
    }
  }

  if (global.max_steps > 0 && plan.steps.size() > static_cast<std::size_t>(global.max_steps))
    plan.steps.resize(global.max_steps);

  BarSelection visited;
  for (const auto& s : plan.steps) visited.insert(s.targets.begin(), s.targets.end());
  for (const auto& c : selection)
    if (!visited.contains(c)) plan.unvisited.push_back(c);
  return plan;
}

}  // namespace calliope

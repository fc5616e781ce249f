#pragma once

// Batch generation: plan, invoke the generator step by step, enforce
// constraints and write results back into a copy of the piece.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "calliope/constraints.hpp"
#include "calliope/generator.hpp"
#include "calliope/params.hpp"
#include "calliope/piece.hpp"
#include "calliope/plan.hpp"
#include "calliope/rng.hpp"

namespace calliope {

struct StepRecord {
  std::size_t step = 0;
  BarRange window;
  std::vector<Cell> targets;
  std::vector<ConstraintReport> reports;  // parallel to targets
};

struct GeneratedOutput {
  std::size_t index = 0;
  std::uint64_t request_seed = 0;  // derived seed this item ran with
  Piece piece;
  std::map<int, EffectiveConstraints> constraints;
  std::vector<StepRecord> step_trace;
  std::vector<Cell> unvisited;
};

struct GenerateOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Per-track constraints with density resolved and the hard polyphony limit
/// applied to the range.
inline std::map<int, EffectiveConstraints> effective_constraints(const GenerationRequest& request, Rng& rng) {
  std::map<int, EffectiveConstraints> out;
  for (const auto& [track, tp] : request.per_track) {
    const auto [pmin, pmax] = effective_polyphony(tp, request.global);
    out[track] = EffectiveConstraints{tp.instrument,
                                      resolve_density(tp.note_density, rng),
                                      pmin,
                                      pmax,
                                      request.global.polyphony_hard_limit,
                                      tp.duration_range};
  }
  return out;
}

/// Runs batch item `k` of a validated request.
inline GeneratedOutput generate_one(const GenerationRequest& request, const Piece& input, Generator& generator,
                                    std::size_t k) {
  GeneratedOutput out;
  out.index = k;
  out.request_seed = derive_seed(request.seed, k);
  Rng rng(out.request_seed);

  out.constraints = effective_constraints(request, rng);
  const StepPlan plan = plan_steps(request.selection, request.global, input.track_count(), input.bar_count(), rng);
  if (plan.target_count() == 0) throw Error(ErrorCode::PlanEmpty, "the plan regenerates no cells");
  out.unvisited = plan.unvisited;

  Piece work = input;
  if (request.global.tempo) {
    const auto us = static_cast<std::uint32_t>(std::lround(60'000'000.0 / *request.global.tempo));
    work.tempo_map.tempos = {TempoPoint{0, us}};
  }

  for (std::size_t s = 0; s < plan.steps.size(); ++s) {
    const GenerationStep& step = plan.steps[s];
    if (step.targets.empty()) continue;

    CellNotes produced;
    try {
      GenerationContext ctx{work, step.window, step.targets, step.context, out.constraints,
                            request.global.temperature};
      produced = generator.generate_cells(ctx, rng);
    } catch (const GeneratorFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw GeneratorFailure(s, e.what());
    }

    const BarSelection target_set(step.targets.begin(), step.targets.end());
    for (const auto& [cell, notes] : produced) {
      if (!target_set.contains(cell))
        throw GeneratorFailure(s, "generator returned notes for a non-target cell");
      const Bar& bar = work.bars[cell.bar];
      for (const auto& n : notes)
        if (!bar.contains(n.onset) || n.duration <= 0 || n.pitch > 127 || n.velocity < 1 || n.velocity > 127)
          throw GeneratorFailure(s, "generator returned an invalid note");
    }

    for (const Cell& cell : step.targets) work = replace_cell_notes(work, cell, {});

    StepRecord record{s, step.window, step.targets, {}};
    for (const Cell& cell : step.targets) {
      auto it = produced.find(cell);
      std::vector<NoteEvent> notes = it == produced.end() ? std::vector<NoteEvent>{} : it->second;
      const auto& fixed = work.tracks[cell.track].notes;
      ConstraintReport report;
      notes = enforce_constraints(std::move(notes), out.constraints.at(cell.track), work.bars[cell.bar], work.ppq,
                                  fixed, &report);
      work = replace_cell_notes(work, cell, std::move(notes));
      record.reports.push_back(report);
    }
    out.step_trace.push_back(std::move(record));
  }
  out.piece = std::move(work);
  return out;
}

/// Produces exactly `batch_size` outputs. Item k uses derive_seed(seed, k), so
/// the batch is reproducible from (request, piece) regardless of scheduling.
inline std::vector<GeneratedOutput> generate(const GenerationRequest& request, const Piece& piece,
                                             Generator& generator, GenerateOptions options = {}) {
  validate(request, piece);
  const auto n = static_cast<std::size_t>(request.batch_size);
  std::vector<GeneratedOutput> outputs(n);

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  if (!generator.concurrent_safe()) threads = 1;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  if (threads <= 1) {
    for (std::size_t k = 0; k < n; ++k) outputs[k] = generate_one(request, piece, generator, k);
    return outputs;
  }

  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          outputs[k] = generate_one(request, piece, generator, k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (k < failed_index) {
            failed_index = k;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return outputs;
}

}  // namespace calliope

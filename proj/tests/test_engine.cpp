#include <gtest/gtest.h>

#include <random>
#include <set>

#include "calliope/constraints.hpp"
#include "calliope/generate.hpp"
#include "calliope/generator.hpp"
#include "calliope/plan.hpp"
#include "calliope/sampling.hpp"
#include "support.hpp"

namespace calliope {
namespace {

BarSelection block(int tracks, int first_bar, int bars) {
  BarSelection s;
  for (int t = 0; t < tracks; ++t)
    for (int b = first_bar; b < first_bar + bars; ++b) s.insert({t, b});
  return s;
}

// --- plan_steps -------------------------------------------------------------

TEST(PlanSteps, QuarterOfSixteenCells) {
  GlobalParams g;
  g.tracks_per_step = 4;
  g.bars_per_step = 4;
  g.percentage = 25;
  Rng rng(1);
  const StepPlan plan = plan_steps(block(4, 0, 4), g, 4, 4, rng);
  ASSERT_EQ(plan.steps.size(), 1u);
  EXPECT_EQ(plan.steps[0].candidates.size(), 16u);
  EXPECT_EQ(plan.steps[0].targets.size(), 4u);
  EXPECT_EQ(plan.unvisited.size(), 12u);
}

// Independent enumeration of the sliding-window recurrence: window k starts
// at first + k*stride, spans model_dim bars clipped to the piece, targets its
// first `stride` bars.
std::vector<std::pair<BarRange, BarRange>> enumerate_windows(int first, int last, int n_bars, int model_dim, int stride) {
  std::vector<std::pair<BarRange, BarRange>> out;
  for (int k = 0;; ++k) {
    const int start = first + k * stride;
    if (start > last) break;
    out.push_back({{start, std::min(start + model_dim, n_bars) - 1}, {start, std::min(start + stride, n_bars) - 1}});
  }
  return out;
}

TEST(PlanSteps, SlidingWindowsOverEightBars) {
  GlobalParams g;
  g.tracks_per_step = 2;
  g.bars_per_step = 2;
  g.model_dim = 4;
  g.percentage = 100;
  Rng rng(1);
  const StepPlan plan = plan_steps(block(2, 0, 8), g, 2, 8, rng);
  const auto expected = enumerate_windows(0, 7, 8, 4, 2);
  ASSERT_EQ(expected.size(), 4u);
  EXPECT_EQ(expected[3].first, (BarRange{6, 7}));
  ASSERT_EQ(plan.steps.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(plan.steps[i].window, expected[i].first);
    std::set<int> bars;
    for (const auto& c : plan.steps[i].targets) bars.insert(c.bar);
    EXPECT_EQ(bars, (std::set<int>{expected[i].second.first, expected[i].second.last}));
    EXPECT_EQ(plan.steps[i].targets.size(), 4u);
  }
}

TEST(PlanSteps, FullPercentageCoversSelectionOnce) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 200; ++i) {
    const int n_tracks = 1 + static_cast<int>(gen() % 8);
    const int n_bars = 1 + static_cast<int>(gen() % 16);
    BarSelection sel;
    for (int k = 0; k < 1 + static_cast<int>(gen() % 30); ++k)
      sel.insert({static_cast<int>(gen() % n_tracks), static_cast<int>(gen() % n_bars)});
    GlobalParams g;
    g.model_dim = 1 + static_cast<int>(gen() % 8);
    g.bars_per_step = 1 + static_cast<int>(gen() % g.model_dim);
    g.tracks_per_step = 1 + static_cast<int>(gen() % 8);
    Rng rng(i);
    const StepPlan plan = plan_steps(sel, g, n_tracks, n_bars, rng);
    std::multiset<Cell> seen;
    for (const auto& s : plan.steps) {
      EXPECT_EQ(s.targets, s.candidates);
      EXPECT_LE(s.window.size(), g.model_dim);
      EXPECT_LE(static_cast<int>(s.track_block.size()), g.tracks_per_step);
      seen.insert(s.targets.begin(), s.targets.end());
    }
    EXPECT_EQ(std::set<Cell>(seen.begin(), seen.end()), sel);
    EXPECT_EQ(seen.size(), sel.size());
    EXPECT_TRUE(plan.unvisited.empty());
  }
}

TEST(PlanSteps, QuotaAndMaxSteps) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 200; ++i) {
    GlobalParams g;
    g.percentage = static_cast<int>(gen() % 101);
    g.max_steps = static_cast<int>(gen() % 9);
    g.bars_per_step = 1 + static_cast<int>(gen() % 4);
    g.model_dim = 4;
    g.tracks_per_step = 1 + static_cast<int>(gen() % 3);
    Rng rng(i);
    const StepPlan plan = plan_steps(block(5, 1, 10), g, 5, 12, rng);
    if (g.max_steps > 0) EXPECT_LE(plan.steps.size(), static_cast<std::size_t>(g.max_steps));
    for (const auto& s : plan.steps) {
      const std::size_t quota = (static_cast<std::size_t>(g.percentage) * s.candidates.size() + 99) / 100;
      EXPECT_EQ(s.targets.size(), quota);
      for (const auto& c : s.targets) {
        EXPECT_TRUE(std::find(s.candidates.begin(), s.candidates.end(), c) != s.candidates.end());
        EXPECT_TRUE(std::find(s.context.begin(), s.context.end(), c) == s.context.end());
      }
    }
  }
}

TEST(PlanSteps, ContextHoldsWindowAndPrecedingBars) {
  GlobalParams g;
  g.model_dim = 4;
  g.bars_per_step = 2;
  g.tracks_per_step = 1;
  Rng rng(1);
  const StepPlan plan = plan_steps(BarSelection{{0, 6}}, g, 2, 10, rng);
  ASSERT_EQ(plan.steps.size(), 1u);
  const auto& ctx = plan.steps[0].context;
  const std::set<Cell> got(ctx.begin(), ctx.end());
  EXPECT_TRUE(got.contains({1, 6}));  // neighbouring track, same bar
  EXPECT_TRUE(got.contains({0, 9}));  // same-window right context
  EXPECT_TRUE(got.contains({0, 2}));  // preceding bars of the block's track
  EXPECT_FALSE(got.contains({0, 1}));
  EXPECT_FALSE(got.contains({1, 5}));
  EXPECT_FALSE(got.contains({0, 6}));
}

TEST(PlanSteps, EmptySelection) {
  Rng rng(1);
  try {
    plan_steps({}, GlobalParams{}, 1, 1, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySelection);
  }
}

// --- parameters -------------------------------------------------------------

TEST(EffectivePolyphony, OverrideRule) {
  auto eff = [](int lo, int hi, int limit) {
    TrackParams t;
    t.polyphony_min = lo;
    t.polyphony_max = hi;
    GlobalParams g;
    g.polyphony_hard_limit = limit;
    return effective_polyphony(t, g);
  };
  EXPECT_EQ(eff(0, 6, 4), std::make_pair(0, 4));
  EXPECT_EQ(eff(2, 3, 6), std::make_pair(2, 3));
  EXPECT_EQ(eff(5, 6, 2), std::make_pair(2, 2));
  for (int lo = 0; lo <= 6; ++lo)
    for (int hi = lo; hi <= 6; ++hi)
      for (int limit = 1; limit <= 6; ++limit) {
        const auto [a, b] = eff(lo, hi, limit);
        EXPECT_EQ(b, std::min(hi, limit));
        EXPECT_LE(a, b);
        EXPECT_EQ(a, std::min(lo, b));
      }
}

TEST(Validation, TemperatureBoundsNamed) {
  GlobalParams g;
  g.temperature = 1.5;
  try {
    validate(g);
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.fields().size(), 1u);
    EXPECT_EQ(e.fields()[0].field, "global.temperature");
    EXPECT_NE(e.fields()[0].message.find("[0.8, 1.2]"), std::string::npos);
  }
}

TEST(Validation, RequestShape) {
  Piece p;
  p.bars = {Bar{0, 0, 1920, 4, 4}};
  p.tracks = {Track{}};
  GenerationRequest r;
  r.selection = {{0, 0}};
  EXPECT_THROW(validate(r, p), ValidationError);  // per_track missing
  r.per_track[0] = TrackParams{};
  EXPECT_NO_THROW(validate(r, p));
  r.selection.insert({0, 3});
  EXPECT_THROW(validate(r, p), ValidationError);
  r.selection = {{0, 0}};
  r.global.bars_per_step = 5;
  EXPECT_THROW(validate(r, p), ValidationError);
  r.global.bars_per_step = 2;
  r.per_track[0].polyphony_min = 4;
  r.per_track[0].polyphony_max = 3;
  EXPECT_THROW(validate(r, p), ValidationError);
  r.per_track[0] = TrackParams{};
  r.per_track[0].duration_range = {DurationClass::Whole, DurationClass::Eighth};
  EXPECT_THROW(validate(r, p), ValidationError);
  r.per_track[0] = TrackParams{};
  r.batch_size = 0;
  EXPECT_THROW(validate(r, p), ValidationError);
}

// --- sampling -----------------------------------------------------------------

TEST(ResolveDensity, IdentityAndRange) {
  Rng rng(3);
  EXPECT_EQ(resolve_density(7, rng), 7);
  for (int i = 0; i < 100; ++i) {
    const int v = resolve_density(0, rng);
    EXPECT_GE(v, 1);
    EXPECT_LE(v, 10);
  }
  Rng a(42), b(42);
  EXPECT_EQ(resolve_density(0, a), resolve_density(0, b));
}

TEST(ResolveDensity, ZeroIsUniform) {
  Rng rng(2024);
  std::array<int, 10> counts{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[resolve_density(0, rng) - 1];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
  EXPECT_LT(chi2, testing::kChiSquare9At001);
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (int c : counts) EXPECT_LT(std::abs(c - draws / 10.0), 3 * sigma);
}

TEST(TemperatureSample, SingleCandidateAndErrors) {
  Rng rng(1);
  const std::vector<double> one{2.5};
  for (int i = 0; i < 10; ++i) EXPECT_EQ(temperature_sample(one, 0.9, rng), 0u);
  auto code = [&](std::vector<double> w, double t) {
    try {
      temperature_sample(w, t, rng);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ParseError;
  };
  EXPECT_EQ(code({}, 1.0), ErrorCode::EmptyWeights);
  EXPECT_EQ(code({1.0, 0.0}, 1.0), ErrorCode::NonPositiveWeight);
  EXPECT_EQ(code({1.0, -2.0}, 1.0), ErrorCode::NonPositiveWeight);
  EXPECT_EQ(code({1.0}, 0.0), ErrorCode::InvalidArgument);
  EXPECT_NO_THROW(temperature_sample(one, 5.0, rng));  // any positive T
}

double frequency_of(std::size_t index, const std::vector<double>& w, double t, int draws, std::uint64_t seed) {
  Rng rng(seed);
  int hits = 0;
  for (int i = 0; i < draws; ++i) hits += temperature_sample(w, t, rng) == index;
  return static_cast<double>(hits) / draws;
}

TEST(TemperatureSample, MatchesClosedForm) {
  // weights [1,3], T=1: 3/4
  EXPECT_NEAR(frequency_of(1, {1, 3}, 1.0, 100000, 10), 0.75, 0.01);
  // weights [1,3], T=0.8: 3^1.25 / (1 + 3^1.25) = 0.797907...
  EXPECT_NEAR(frequency_of(1, {1, 3}, 0.8, 100000, 11), 0.7979072094689398, 0.01);
  // weights [2,1,5], T=1.2: w^(1/1.2) normalised
  const double a = std::pow(2.0, 1 / 1.2), b = 1.0, c = std::pow(5.0, 1 / 1.2);
  EXPECT_NEAR(frequency_of(2, {2, 1, 5}, 1.2, 100000, 12), c / (a + b + c), 0.01);
}

// --- constraints ----------------------------------------------------------------

EffectiveConstraints limits(int hard, DurationRange d = {}) {
  EffectiveConstraints c;
  c.polyphony_hard_limit = hard;
  c.polyphony_max = hard;
  c.duration_range = d;
  return c;
}

const Bar kBar{0, 0, 1920, 4, 4};

TEST(EnforceConstraints, DropsLatestOnsetOverLimit) {
  const std::vector<NoteEvent> notes{{0, 960, 60, 90, 0}, {10, 960, 64, 90, 0}, {20, 960, 67, 90, 0}};
  ConstraintReport report;
  const auto out = enforce_constraints(notes, limits(2), kBar, 480, {}, &report);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].pitch, 60);
  EXPECT_EQ(out[1].pitch, 64);
  EXPECT_EQ(report.dropped_for_polyphony, 1);
}

TEST(EnforceConstraints, TieBreakVelocityThenPitch) {
  const std::vector<NoteEvent> notes{{0, 100, 60, 50, 0}, {0, 100, 64, 40, 0}, {0, 100, 67, 40, 0}};
  const auto out = enforce_constraints(notes, limits(2), kBar, 480);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].pitch, 60);  // 64 had the lowest velocity and pitch
  EXPECT_EQ(out[1].pitch, 67);
}

TEST(EnforceConstraints, ClampsDurationsToRange) {
  // Whole at PPQ 480 = 480 * 4 * 1 = 1920 ticks; 1/16 = 120 ticks.
  const std::vector<NoteEvent> notes{{0, 5000, 60, 90, 0}, {1000, 7, 62, 90, 0}};
  ConstraintReport report;
  const auto out =
      enforce_constraints(notes, limits(6, {DurationClass::Sixteenth, DurationClass::Whole}), kBar, 480, {}, &report);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].duration, 1920);
  EXPECT_EQ(out[1].duration, 120);
  EXPECT_EQ(report.clamped_durations, 2);
}

TEST(EnforceConstraints, EmptyInput) {
  ConstraintReport report;
  EXPECT_TRUE(enforce_constraints({}, limits(3), kBar, 480, {}, &report).empty());
  EXPECT_EQ(report.density_target, 2);  // level 1 in 4/4
  EXPECT_EQ(report.density_deviation(), -2);
  EXPECT_EQ(report.sparse_onsets, 0);
}

TEST(EnforceConstraints, CountsFixedNotesAndReportsSoftDeviations) {
  const std::vector<NoteEvent> fixed{{-100 + 100, 4000, 40, 90, 0}};
  const std::vector<NoteEvent> notes{{480, 100, 60, 90, 0}, {480, 100, 64, 90, 0}};
  EffectiveConstraints c = limits(2);
  c.density_level = 5;
  c.polyphony_min = 3;
  ConstraintReport report;
  const auto out = enforce_constraints(notes, c, kBar, 480, fixed, &report);
  EXPECT_EQ(out.size(), 1u);
  EXPECT_EQ(report.density_target, 10);  // round(5 * 4 / 2)
  EXPECT_EQ(report.note_count, 1);
  EXPECT_EQ(report.density_deviation(), -9);
  EXPECT_EQ(report.sparse_onsets, 1);
}

TEST(EnforceConstraints, DropsNestedUnison) {
  const std::vector<NoteEvent> fixed{{0, 1000, 60, 90, 0}};
  const std::vector<NoteEvent> notes{{100, 50, 60, 90, 0}, {200, 50, 62, 90, 0}};
  ConstraintReport report;
  const auto out = enforce_constraints(notes, limits(6), kBar, 480, fixed, &report);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].pitch, 62);
  EXPECT_EQ(report.dropped_unison_overlaps, 1);
}

TEST(EnforceConstraints, RejectsOutsideCell) {
  EXPECT_THROW(enforce_constraints({{1920, 10, 60, 90, 0}}, limits(6), kBar, 480), Error);
}

TEST(EnforceConstraints, PolyphonySafetyProperty) {
  std::mt19937_64 gen(77);
  for (int i = 0; i < 500; ++i) {
    const int limit = 1 + static_cast<int>(gen() % 6);
    std::vector<NoteEvent> notes;
    for (int k = 0; k < static_cast<int>(gen() % 30); ++k)
      notes.push_back({static_cast<Tick>(gen() % 1920), 1 + static_cast<Tick>(gen() % 2000),
                       static_cast<std::uint8_t>(gen() % 128), static_cast<std::uint8_t>(1 + gen() % 127), 0});
    const auto out = enforce_constraints(notes, limits(limit), kBar, 480);
    EXPECT_LE(testing::max_simultaneous(out), limit);
  }
}

TEST(EnforceConstraints, TrackParamsOverload) {
  TrackParams t;
  t.polyphony_max = 6;
  GlobalParams g;
  g.polyphony_hard_limit = 1;
  const auto out = enforce_constraints({{0, 100, 60, 90, 0}, {50, 100, 61, 90, 0}}, t, g, kBar, 480);
  EXPECT_EQ(out.size(), 1u);
}

// --- generator ------------------------------------------------------------------

TEST(ContextMarkov, StaysWithinContextPitchSet) {
  Piece p;
  p.bars = {Bar{0, 0, 1920, 4, 4}, Bar{1, 1920, 3840, 4, 4}};
  Track t;
  for (int i = 0; i < 8; ++i) t.notes.push_back({i * 240, 240, static_cast<std::uint8_t>(std::array{60, 64, 67}[i % 3]), 90, 0});
  p.tracks = {t};
  std::map<int, EffectiveConstraints> cons{{0, EffectiveConstraints{{}, 8, 1, 3, 6, {}}}};
  const std::vector<Cell> targets{{0, 1}};
  const std::vector<Cell> context{{0, 0}};
  ContextMarkovGenerator gen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto out = gen.generate_cells({p, {0, 1}, targets, context, cons, 1.0}, rng);
    ASSERT_TRUE(out.contains({0, 1}));
    EXPECT_FALSE(out.at({0, 1}).empty());
    for (const auto& n : out.at({0, 1})) {
      EXPECT_TRUE(n.pitch == 60 || n.pitch == 64 || n.pitch == 67) << int(n.pitch);
      EXPECT_TRUE(p.bars[1].contains(n.onset));
    }
  }
}

TEST(ContextMarkov, PentatonicFallbacks) {
  Piece p;
  p.bars = {Bar{0, 0, 1920, 4, 4}};
  p.tracks = {Track{}, Track{}};
  std::map<int, EffectiveConstraints> cons{{0, EffectiveConstraints{}}, {1, EffectiveConstraints{}}};
  cons[0].density_level = 10;
  ContextMarkovGenerator gen;
  const std::vector<Cell> targets{{0, 0}};
  const std::vector<Cell> context{{1, 0}};
  Rng rng(9);
  const std::set<int> c_major_penta{60, 62, 64, 67, 69};
  for (const auto& n : gen.generate_cells({p, {0, 0}, targets, context, cons, 1.0}, rng).at({0, 0}))
    EXPECT_TRUE(c_major_penta.contains(n.pitch));

  // Neighbour median pitch 50 roots the scale when the track itself is empty.
  p.tracks[1].notes = {{0, 100, 48, 90, 0}, {100, 100, 50, 90, 0}, {200, 100, 55, 90, 0}};
  const std::set<int> d_penta{50, 52, 54, 57, 59};
  for (const auto& n : gen.generate_cells({p, {0, 0}, targets, context, cons, 1.0}, rng).at({0, 0}))
    EXPECT_TRUE(d_penta.contains(n.pitch));
}

TEST(ContextMarkov, Deterministic) {
  std::mt19937_64 g(1);
  const Piece p = testing::random_piece(g, {2, 4, 480, 5, false});
  std::map<int, EffectiveConstraints> cons{{0, EffectiveConstraints{}}, {1, EffectiveConstraints{}}};
  const std::vector<Cell> targets{{0, 2}, {1, 3}};
  const std::vector<Cell> context{{0, 0}, {0, 1}, {1, 1}, {1, 2}};
  ContextMarkovGenerator gen;
  Rng a(5), b(5);
  EXPECT_EQ(gen.generate_cells({p, {0, 3}, targets, context, cons, 0.9}, a),
            gen.generate_cells({p, {0, 3}, targets, context, cons, 0.9}, b));
}

// --- generate -------------------------------------------------------------------

/// Returns the target cells' current notes unchanged.
class EchoGenerator : public Generator {
 public:
  std::string name() const override { return "echo"; }
  CellNotes generate_cells(const GenerationContext& ctx, Rng&) override {
    CellNotes out;
    for (const auto& c : ctx.targets) out[c] = notes_in_cell(ctx.piece, c);
    return out;
  }
};

class ThrowingGenerator : public Generator {
 public:
  std::string name() const override { return "throws"; }
  CellNotes generate_cells(const GenerationContext&, Rng&) override { throw std::runtime_error("model crashed"); }
};

class StrayGenerator : public Generator {
 public:
  std::string name() const override { return "stray"; }
  CellNotes generate_cells(const GenerationContext& ctx, Rng&) override {
    CellNotes out;
    out[Cell{ctx.targets[0].track, ctx.targets[0].bar}] = {NoteEvent{ctx.piece.end_tick() + 5, 1, 60, 90, 0}};
    return out;
  }
};

TEST(Generate, BatchCountAndDeterminism) {
  std::mt19937_64 g(2);
  const Piece p = testing::random_piece(g, {2, 6, 480, 4, false});
  GenerationRequest r = testing::full_request(p, block(2, 1, 4), 5, 99);
  ContextMarkovGenerator gen;
  const auto a = generate(r, p, gen);
  const auto b = generate(r, p, gen, {.threads = 3});
  ASSERT_EQ(a.size(), 5u);
  ASSERT_EQ(b.size(), 5u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].piece, b[k].piece);
    EXPECT_EQ(a[k].request_seed, derive_seed(99, k));
  }
  EXPECT_NE(a[0].piece, a[1].piece);
}

TEST(Generate, SingleCellOnlyChangesThatCell) {
  std::mt19937_64 g(3);
  const Piece p = testing::random_piece(g, {3, 5, 480, 4, false});
  GenerationRequest r = testing::full_request(p, {{1, 2}}, 3, 7);
  r.global.percentage = 100;
  ContextMarkovGenerator gen;
  for (const auto& out : generate(r, p, gen)) {
    for (int t = 0; t < 3; ++t)
      for (int b = 0; b < 5; ++b)
        if (Cell{t, b} != Cell{1, 2}) EXPECT_EQ(notes_in_cell(out.piece, {t, b}), notes_in_cell(p, {t, b}));
  }
}

TEST(Generate, EchoStubReproducesInput) {
  std::mt19937_64 g(4);
  const Piece p = testing::random_piece(g, {2, 4, 480, 3, true});
  GenerationRequest r = testing::full_request(p, block(2, 0, 4), 2, 1);
  EchoGenerator echo;
  for (const auto& out : generate(r, p, echo)) EXPECT_EQ(out.piece, p);
}

TEST(Generate, FailuresCarryStepIndex) {
  std::mt19937_64 g(5);
  const Piece p = testing::random_piece(g, {1, 4, 480, 3, false});
  GenerationRequest r = testing::full_request(p, block(1, 0, 4), 2, 1);
  ThrowingGenerator bad;
  try {
    generate(r, p, bad);
    FAIL();
  } catch (const GeneratorFailure& e) {
    EXPECT_EQ(e.step(), 0u);
    EXPECT_NE(std::string(e.what()).find("model crashed"), std::string::npos);
  }
  StrayGenerator stray;
  EXPECT_THROW(generate(r, p, stray), GeneratorFailure);
}

TEST(Generate, ZeroPercentIsPlanEmpty) {
  std::mt19937_64 g(6);
  const Piece p = testing::random_piece(g, {1, 2, 480, 3, false});
  GenerationRequest r = testing::full_request(p, block(1, 0, 2), 1, 1);
  r.global.percentage = 0;
  ContextMarkovGenerator gen;
  try {
    generate(r, p, gen);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PlanEmpty);
  }
}

TEST(Generate, TempoOverrideAndTrace) {
  std::mt19937_64 g(7);
  const Piece p = testing::random_piece(g, {2, 8, 480, 3, false});
  GenerationRequest r = testing::full_request(p, block(2, 0, 8), 1, 1);
  r.global.tempo = 90;
  r.global.max_steps = 2;
  r.global.tracks_per_step = 1;
  ContextMarkovGenerator gen;
  const auto out = generate(r, p, gen);
  ASSERT_EQ(out[0].piece.tempo_map.tempos.size(), 1u);
  EXPECT_EQ(out[0].piece.tempo_map.tempos[0].micros_per_quarter, 666667u);
  EXPECT_EQ(out[0].step_trace.size(), 2u);
  EXPECT_EQ(out[0].unvisited.size(), 16u - 4u);
}

}  // namespace
}  // namespace calliope

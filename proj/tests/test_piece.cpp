#include <gtest/gtest.h>

#include <random>

#include "calliope/piece.hpp"
#include "support.hpp"

namespace calliope {
namespace {

RawMidiFile file_with_notes(int numerator, int denominator, std::vector<std::pair<Tick, Tick>> notes, Tick eot) {
  RawMidiFile f;
  f.format = 1;
  f.tracks.push_back(RawTrack{{RawEvent::meta(0, midi::kMetaTimeSignature,
                                              midi::time_signature_payload(numerator, denominator)),
                               RawEvent::end_of_track()}});
  std::vector<std::pair<Tick, RawEvent>> timed;
  for (auto [on, off] : notes) {
    timed.push_back({on, RawEvent::channel_message(0, 0x90, 60, 100)});
    timed.push_back({off, RawEvent::channel_message(0, 0x80, 60, 0)});
  }
  std::stable_sort(timed.begin(), timed.end(), [](auto& a, auto& b) { return a.first < b.first; });
  RawTrack t;
  Tick now = 0;
  for (auto& [tick, e] : timed) {
    e.delta = static_cast<std::uint32_t>(tick - now);
    now = tick;
    t.events.push_back(e);
  }
  t.events.push_back(RawEvent::end_of_track(static_cast<std::uint32_t>(eot - now)));
  f.tracks.push_back(t);
  return f;
}

TEST(SegmentBars, TwoBarsOfFourFour) {
  // 4/4 at PPQ 480: 4 * 480 = 1920 ticks per bar; content ends at 3840.
  const Piece p = segment_bars(file_with_notes(4, 4, {{2880, 3840}}, 3840));
  ASSERT_EQ(p.bar_count(), 2);
  EXPECT_EQ(p.bars[0], (Bar{0, 0, 1920, 4, 4}));
  EXPECT_EQ(p.bars[1], (Bar{1, 1920, 3840, 4, 4}));
}

TEST(SegmentBars, EmptyFileHasOneBarOneTrack) {
  RawMidiFile f;
  f.format = 0;
  f.tracks.push_back(RawTrack{{RawEvent::end_of_track()}});
  const Piece p = segment_bars(f);
  EXPECT_EQ(p.bar_count(), 1);
  EXPECT_EQ(p.track_count(), 1);
  EXPECT_TRUE(p.tracks[0].notes.empty());
}

TEST(SegmentBars, ThreeFourOnsetInSecondBar) {
  // 3/4 at PPQ 480: 3 * 480 = 1440 ticks per bar; onset 1440 opens bar 1.
  const Piece p = segment_bars(file_with_notes(3, 4, {{1440, 1500}}, 1500));
  ASSERT_EQ(p.bar_count(), 2);
  EXPECT_EQ(p.bars[1].start, 1440);
  EXPECT_EQ(p.bar_at(1440), 1);
  EXPECT_EQ(notes_in_cell(p, {0, 1}).size(), 1u);
}

TEST(SegmentBars, MidBarMeterChangeSnapsToNextBar) {
  RawMidiFile f = file_with_notes(4, 4, {{0, 6000}}, 6000);
  f.tracks[0].events.insert(f.tracks[0].events.begin() + 1,
                            RawEvent::meta(1000, midi::kMetaTimeSignature, midi::time_signature_payload(3, 4)));
  SegmentReport report;
  const Piece p = segment_bars(f, &report);
  EXPECT_EQ(report.snapped_time_signatures, 1);
  EXPECT_EQ(p.bars[0].numerator, 4);
  EXPECT_EQ(p.bars[1].numerator, 3);
  EXPECT_EQ(p.bars[1].length(), 1440);
  ASSERT_EQ(p.tempo_map.time_signatures.size(), 2u);
  EXPECT_EQ(p.tempo_map.time_signatures[1].tick, 1920);
}

TEST(SegmentBars, FormatZeroSplitsChannels) {
  RawMidiFile f;
  f.format = 0;
  f.tracks.push_back(RawTrack{{RawEvent::channel_message(0, 0xC3, 40), RawEvent::channel_message(0, 0x93, 60, 90),
                               RawEvent::channel_message(0, 0x99, 36, 90), RawEvent::channel_message(100, 0x83, 60, 0),
                               RawEvent::channel_message(0, 0x89, 36, 0), RawEvent::end_of_track()}});
  const Piece p = segment_bars(f);
  ASSERT_EQ(p.track_count(), 2);
  EXPECT_EQ(p.tracks[0].channel, 3);
  EXPECT_EQ(p.tracks[0].program, 40);
  EXPECT_FALSE(p.tracks[0].is_percussion);
  EXPECT_TRUE(p.tracks[1].is_percussion);
}

TEST(NotesInCell, HalfOpenAndBounds) {
  const Piece p = segment_bars(file_with_notes(4, 4, {{0, 100}, {1920, 2000}}, 3840));
  EXPECT_EQ(notes_in_cell(p, {0, 0}).size(), 1u);
  const auto second = notes_in_cell(p, {0, 1});
  ASSERT_EQ(second.size(), 1u);
  EXPECT_EQ(second[0].onset, 1920);  // onset at bar 0's end belongs to bar 1
  EXPECT_THROW(notes_in_cell(p, {1, 0}), Error);
  EXPECT_THROW(notes_in_cell(p, {0, 2}), Error);

  Piece empty = add_track(p);
  EXPECT_TRUE(notes_in_cell(empty, {1, 0}).empty());
}

TEST(NotesInCell, CellsPartitionEachTrack) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 50; ++i) {
    const Piece p = testing::random_piece(gen, {3, 6, 480, 6, false});
    for (int t = 0; t < p.track_count(); ++t) {
      std::vector<NoteEvent> joined;
      for (int b = 0; b < p.bar_count(); ++b) {
        const auto cell = notes_in_cell(p, {t, b});
        for (const auto& n : cell) EXPECT_TRUE(p.bars[b].contains(n.onset));
        joined.insert(joined.end(), cell.begin(), cell.end());
      }
      EXPECT_EQ(joined, p.tracks[t].notes);
    }
  }
}

TEST(ReplaceCellNotes, EmptyingAndIdentity) {
  std::mt19937_64 gen(8);
  const Piece p = testing::random_piece(gen, {2, 4, 480, 5, false});
  const Piece cleared = replace_cell_notes(p, {1, 2}, {});
  EXPECT_TRUE(notes_in_cell(cleared, {1, 2}).empty());
  for (int t = 0; t < 2; ++t)
    for (int b = 0; b < 4; ++b)
      if (Cell{t, b} != Cell{1, 2}) EXPECT_EQ(notes_in_cell(cleared, {t, b}), notes_in_cell(p, {t, b}));
  EXPECT_EQ(replace_cell_notes(p, {0, 1}, notes_in_cell(p, {0, 1})), p);
}

TEST(ReplaceCellNotes, RejectsNotesOutsideCell) {
  std::mt19937_64 gen(8);
  const Piece p = testing::random_piece(gen, {1, 2, 480, 2, false});
  try {
    replace_cell_notes(p, {0, 0}, {NoteEvent{1920, 10, 60, 90, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoteOutsideCell);
  }
}

TEST(ReplaceCellNotes, DisjointReplacementsCommute) {
  std::mt19937_64 gen(12);
  for (int i = 0; i < 30; ++i) {
    const Piece p = testing::random_piece(gen, {2, 4, 480, 4, false});
    const std::vector<NoteEvent> a{NoteEvent{100, 3000, 70, 80, 0}, NoteEvent{500, 10, 72, 80, 0}};
    const std::vector<NoteEvent> b{NoteEvent{1920 * 2 + 5, 960, 40, 20, 0}};
    const Piece ab = replace_cell_notes(replace_cell_notes(p, {0, 0}, a), {1, 2}, b);
    const Piece ba = replace_cell_notes(replace_cell_notes(p, {1, 2}, b), {0, 0}, a);
    EXPECT_EQ(ab, ba);
  }
}

TEST(ReplaceCellNotes, FrameProperty) {
  std::mt19937_64 gen(13);
  for (int i = 0; i < 50; ++i) {
    const Piece p = testing::random_piece(gen, {3, 5, 480, 4, false});
    const Cell target{static_cast<int>(gen() % 3), static_cast<int>(gen() % 5)};
    const Bar& bar = p.bars[target.bar];
    const Piece q = replace_cell_notes(p, target, {NoteEvent{bar.start, 100000, 50, 60, 0}});
    EXPECT_LE(q.tracks[target.track].notes.back().end(), q.end_tick());
    for (int t = 0; t < 3; ++t)
      for (int b = 0; b < 5; ++b)
        if (Cell{t, b} != target) EXPECT_EQ(notes_in_cell(q, {t, b}), notes_in_cell(p, {t, b}));
  }
}

TEST(TrackEditing, AddDeleteInverse) {
  std::mt19937_64 gen(21);
  const Piece p = testing::random_piece(gen, {2, 3, 480, 3, false});
  EXPECT_EQ(delete_track(add_track(p, {.name = "new"}), 2), p);
}

TEST(TrackEditing, DeleteReindexes) {
  std::mt19937_64 gen(22);
  const Piece p = testing::random_piece(gen, {2, 3, 480, 3, false});
  const Piece q = delete_track(p, 0);
  ASSERT_EQ(q.track_count(), 1);
  EXPECT_EQ(q.tracks[0], p.tracks[1]);
  try {
    delete_track(q, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LastTrackDeletion);
  }
  EXPECT_THROW(delete_track(p, 5), Error);
}

TEST(TrackEditing, AddedTracksShareTheBarGrid) {
  std::mt19937_64 gen(23);
  const Piece p = testing::random_piece(gen, {1, 7, 480, 3, false});
  const Piece q = add_track(add_track(add_track(p)));
  EXPECT_EQ(q.track_count(), 4);
  EXPECT_EQ(q.bars, p.bars);
  for (int t = 1; t < 4; ++t)
    for (int b = 0; b < q.bar_count(); ++b) EXPECT_TRUE(notes_in_cell(q, {t, b}).empty());
}

TEST(TrackEditing, PercussionForcesDrumChannel) {
  std::mt19937_64 gen(24);
  const Piece p = testing::random_piece(gen, {1, 2, 480, 3, false});
  const Piece q = edit_track_metadata(p, 0, {.is_percussion = true});
  EXPECT_EQ(q.tracks[0].channel, 9);
  for (const auto& n : q.tracks[0].notes) EXPECT_EQ(n.channel, 9);
  const Piece r = edit_track_metadata(q, 0, {.channel = 4, .program = 33});
  EXPECT_FALSE(r.tracks[0].is_percussion);
  EXPECT_EQ(r.tracks[0].program, 33);
  EXPECT_EQ(r.tracks[0].instrument_group(), 2);
  EXPECT_THROW(edit_track_metadata(p, 0, {.program = 128}), Error);
}

TEST(PieceToMidifile, EmptyPiece) {
  Piece p;
  p.bars = {Bar{0, 0, 1920, 4, 4}};
  p.tracks = {Track{"a", 0, 0, false, {}}, Track{"b", 1, 0, false, {}}};
  const RawMidiFile f = piece_to_midifile(p);
  EXPECT_EQ(f.format, 1);
  ASSERT_EQ(f.tracks.size(), 3u);
  EXPECT_TRUE(midi::pair_notes(f.tracks[0]).empty());
  EXPECT_EQ(segment_bars(f), p);
}

TEST(PieceToMidifile, PercussionOnChannelNine) {
  Piece p;
  p.bars = {Bar{0, 0, 1920, 4, 4}};
  p.tracks = {Track{"drums", 9, 0, true, {NoteEvent{0, 10, 36, 100, 9}}}};
  const RawMidiFile f = piece_to_midifile(p);
  for (const auto& e : f.tracks[1].events)
    if (e.is_channel()) EXPECT_EQ(e.channel(), 9);
}

TEST(PieceToMidifile, SegmentRoundTripProperty) {
  std::mt19937_64 gen(31);
  for (int i = 0; i < 200; ++i) {
    testing::PieceShape shape{1 + static_cast<int>(gen() % 5), 1 + static_cast<int>(gen() % 9), 96 * (1 + static_cast<int>(gen() % 10)),
                              static_cast<int>(gen() % 7), (gen() % 2) == 0};
    const Piece p = testing::random_piece(gen, shape);
    SegmentReport report;
    const Piece q = segment_bars(midi::parse_smf(midi::write_smf(piece_to_midifile(p))), &report);
    ASSERT_EQ(q, p) << "piece " << i;
    EXPECT_EQ(report.snapped_time_signatures, 0);
  }
}

TEST(PieceToMidifile, MixedMeterRoundTrip) {
  Piece p;
  p.ppq = 480;
  p.bars = {Bar{0, 0, 1920, 4, 4}, Bar{1, 1920, 3360, 3, 4}, Bar{2, 3360, 4320, 4, 8}, Bar{3, 4320, 4440, 1, 16}};
  p.tempo_map.time_signatures = {{0, 4, 4}, {1920, 3, 4}, {3360, 4, 8}, {4320, 1, 16}};
  p.tempo_map.tempos = {{0, 400000}, {2000, 600000}};
  p.tracks = {Track{"x", 2, 5, false, {NoteEvent{3400, 100, 64, 33, 2}}}};
  EXPECT_NO_THROW(check_piece(p));
  EXPECT_EQ(segment_bars(piece_to_midifile(p)), p);
}

}  // namespace
}  // namespace calliope

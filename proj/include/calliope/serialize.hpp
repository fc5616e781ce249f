#pragma once

// Canonical JSON documents for the service API and storage.

#include <string>
#include <vector>

#include "json.hpp"

#include "calliope/error.hpp"
#include "calliope/generate.hpp"
#include "calliope/params.hpp"
#include "calliope/piece.hpp"
#include "calliope/playback.hpp"
#include "calliope/ranking.hpp"

namespace calliope {

using Json = nlohmann::json;

// --- piece ------------------------------------------------------------------

inline void to_json(Json& j, const NoteEvent& n) {
  j = Json{{"onset", n.onset}, {"duration", n.duration}, {"pitch", n.pitch}, {"velocity", n.velocity},
           {"channel", n.channel}};
}
inline void from_json(const Json& j, NoteEvent& n) {
  n.onset = j.at("onset").get<Tick>();
  n.duration = j.at("duration").get<Tick>();
  n.pitch = j.at("pitch").get<std::uint8_t>();
  n.velocity = j.at("velocity").get<std::uint8_t>();
  n.channel = j.at("channel").get<std::uint8_t>();
}

inline void to_json(Json& j, const Bar& b) {
  j = Json{{"index", b.index}, {"start", b.start}, {"end", b.end}, {"numerator", b.numerator},
           {"denominator", b.denominator}};
}
inline void from_json(const Json& j, Bar& b) {
  b.index = j.at("index").get<int>();
  b.start = j.at("start").get<Tick>();
  b.end = j.at("end").get<Tick>();
  b.numerator = j.at("numerator").get<int>();
  b.denominator = j.at("denominator").get<int>();
}

inline void to_json(Json& j, const Track& t) {
  j = Json{{"name", t.name},
           {"channel", t.channel},
           {"program", t.program},
           {"program_name", gm::program_name(t.program)},
           {"is_percussion", t.is_percussion},
           {"instrument_group", t.instrument_group()},
           {"notes", t.notes}};
}
inline void from_json(const Json& j, Track& t) {
  t.name = j.at("name").get<std::string>();
  t.channel = j.at("channel").get<int>();
  t.program = j.at("program").get<int>();
  t.is_percussion = j.at("is_percussion").get<bool>();
  t.notes = j.at("notes").get<std::vector<NoteEvent>>();
}

inline void to_json(Json& j, const TempoMap& m) {
  j = Json{{"tempos", Json::array()}, {"time_signatures", Json::array()}};
  for (const auto& t : m.tempos) j["tempos"].push_back({{"tick", t.tick}, {"micros_per_quarter", t.micros_per_quarter}});
  for (const auto& s : m.time_signatures)
    j["time_signatures"].push_back({{"tick", s.tick}, {"numerator", s.numerator}, {"denominator", s.denominator}});
}
inline void from_json(const Json& j, TempoMap& m) {
  m.tempos.clear();
  m.time_signatures.clear();
  for (const auto& t : j.at("tempos"))
    m.tempos.push_back({t.at("tick").get<Tick>(), t.at("micros_per_quarter").get<std::uint32_t>()});
  for (const auto& s : j.at("time_signatures"))
    m.time_signatures.push_back({s.at("tick").get<Tick>(), s.at("numerator").get<int>(), s.at("denominator").get<int>()});
}

inline void to_json(Json& j, const Piece& p) {
  j = Json{{"ppq", p.ppq}, {"tempo_map", p.tempo_map}, {"bars", p.bars}, {"tracks", p.tracks}};
}
inline void from_json(const Json& j, Piece& p) {
  p.ppq = j.at("ppq").get<int>();
  p.tempo_map = j.at("tempo_map").get<TempoMap>();
  p.bars = j.at("bars").get<std::vector<Bar>>();
  p.tracks = j.at("tracks").get<std::vector<Track>>();
}

/// Parses and validates a stored piece document.
inline Piece piece_from_document(const Json& j) {
  Piece p;
  try {
    p = j.get<Piece>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvariantViolation, std::string("piece document: ") + e.what());
  }
  check_piece(p);
  return p;
}

inline void to_json(Json& j, const Cell& c) { j = Json{{"track", c.track}, {"bar", c.bar}}; }

// --- generation parameters ------------------------------------------------------

inline void to_json(Json& j, const GlobalParams& g) {
  j = Json{{"temperature", g.temperature},         {"polyphony_hard_limit", g.polyphony_hard_limit},
           {"percentage", g.percentage},           {"model_dim", g.model_dim},
           {"tracks_per_step", g.tracks_per_step}, {"bars_per_step", g.bars_per_step},
           {"max_steps", g.max_steps}};
  j["tempo"] = g.tempo ? Json(*g.tempo) : Json(nullptr);
}

inline void to_json(Json& j, const Instrument& i) {
  j = Json{{i.kind == Instrument::Kind::Program ? "program" : "group", i.value}};
}

inline void to_json(Json& j, const TrackParams& t) {
  j = Json{{"instrument", t.instrument},
           {"note_density", t.note_density},
           {"polyphony_min", t.polyphony_min},
           {"polyphony_max", t.polyphony_max},
           {"duration_range", {{"min", to_string(t.duration_range.min)}, {"max", to_string(t.duration_range.max)}}}};
}

inline void to_json(Json& j, const EffectiveConstraints& c) {
  j = Json{{"instrument", c.instrument},
           {"density_level", c.density_level},
           {"polyphony_min", c.polyphony_min},
           {"polyphony_max", c.polyphony_max},
           {"polyphony_hard_limit", c.polyphony_hard_limit},
           {"duration_range", {{"min", to_string(c.duration_range.min)}, {"max", to_string(c.duration_range.max)}}}};
}

inline void to_json(Json& j, const GenerationRequest& r) {
  j = Json{{"selection", Json::array()}, {"global", r.global}, {"per_track", Json::object()},
           {"batch_size", r.batch_size}, {"seed", r.seed}};
  for (const auto& c : r.selection) j["selection"].push_back(c);
  for (const auto& [idx, tp] : r.per_track) j["per_track"][std::to_string(idx)] = tp;
}

namespace serialize_detail {

class FieldReader {
 public:
  explicit FieldReader(std::vector<FieldError>& errs) : errs_(errs) {}

  template <typename T>
  void read(const Json& obj, const char* key, const std::string& path, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    const Json& v = obj.at(key);
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) return fail(path, "must be a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return fail(path, "must be an integer");
    }
    out = v.get<T>();
  }

  void fail(const std::string& path, const std::string& msg) { errs_.push_back({path, msg}); }

 private:
  std::vector<FieldError>& errs_;
};

inline void read_duration(FieldReader& r, const Json& obj, const char* key, const std::string& path, DurationClass& out) {
  if (!obj.contains(key)) return;
  const Json& v = obj.at(key);
  if (!v.is_string()) return r.fail(path, "must be one of Any, 1/32, 1/16, 1/8, 1/4, 1/2, Whole");
  auto d = duration_class_from_string(v.get<std::string>());
  if (!d) return r.fail(path, "must be one of Any, 1/32, 1/16, 1/8, 1/4, 1/2, Whole");
  out = *d;
}

}  // namespace serialize_detail

/// Parses a generation request document. Missing parameter fields take their
/// defaults; malformed ones are reported as field errors (ranges are checked
/// later by validate()).
inline GenerationRequest request_from_json(const Json& j) {
  using serialize_detail::FieldReader;
  std::vector<FieldError> errs;
  FieldReader r(errs);
  GenerationRequest req;
  if (!j.is_object()) throw ValidationError({{"request", "must be a JSON object"}});

  if (j.contains("selection")) {
    const Json& sel = j.at("selection");
    if (!sel.is_array()) {
      r.fail("selection", "must be an array of cells");
    } else {
      for (const auto& c : sel) {
        if (c.is_object() && c.contains("track") && c.contains("bar") && c["track"].is_number_integer() &&
            c["bar"].is_number_integer()) {
          req.selection.insert(Cell{c["track"].get<int>(), c["bar"].get<int>()});
        } else if (c.is_array() && c.size() == 2 && c[0].is_number_integer() && c[1].is_number_integer()) {
          req.selection.insert(Cell{c[0].get<int>(), c[1].get<int>()});
        } else {
          r.fail("selection", "cells must be {track, bar} objects");
          break;
        }
      }
    }
  }

  if (j.contains("global")) {
    const Json& g = j.at("global");
    if (!g.is_object()) {
      r.fail("global", "must be an object");
    } else {
      r.read(g, "temperature", "global.temperature", req.global.temperature);
      r.read(g, "polyphony_hard_limit", "global.polyphony_hard_limit", req.global.polyphony_hard_limit);
      r.read(g, "percentage", "global.percentage", req.global.percentage);
      r.read(g, "model_dim", "global.model_dim", req.global.model_dim);
      r.read(g, "tracks_per_step", "global.tracks_per_step", req.global.tracks_per_step);
      r.read(g, "bars_per_step", "global.bars_per_step", req.global.bars_per_step);
      r.read(g, "max_steps", "global.max_steps", req.global.max_steps);
      if (g.contains("tempo") && !g["tempo"].is_null()) {
        if (g["tempo"].is_number_integer())
          req.global.tempo = g["tempo"].get<int>();
        else
          r.fail("global.tempo", "must be a positive integer");
      }
    }
  }

  if (j.contains("per_track")) {
    const Json& pt = j.at("per_track");
    if (!pt.is_object()) {
      r.fail("per_track", "must be an object keyed by track index");
    } else {
      for (const auto& [key, val] : pt.items()) {
        const std::string path = "per_track." + key;
        int idx = -1;
        try {
          std::size_t used = 0;
          idx = std::stoi(key, &used);
          if (used != key.size()) idx = -1;
        } catch (...) {
        }
        if (idx < 0 || !val.is_object()) {
          r.fail(path, "keys must be track indices mapping to objects");
          continue;
        }
        TrackParams tp;
        if (val.contains("instrument")) {
          const Json& ins = val["instrument"];
          if (ins.is_object() && ins.contains("program") && ins["program"].is_number_integer()) {
            tp.instrument = {Instrument::Kind::Program, ins["program"].get<int>()};
          } else if (ins.is_object() && ins.contains("group") && ins["group"].is_number_integer()) {
            tp.instrument = {Instrument::Kind::Group, ins["group"].get<int>()};
          } else {
            r.fail(path + ".instrument", "must be {program: 0-127} or {group: 0-7}");
          }
        }
        r.read(val, "note_density", path + ".note_density", tp.note_density);
        r.read(val, "polyphony_min", path + ".polyphony_min", tp.polyphony_min);
        r.read(val, "polyphony_max", path + ".polyphony_max", tp.polyphony_max);
        if (val.contains("duration_range")) {
          const Json& d = val["duration_range"];
          if (d.is_object()) {
            serialize_detail::read_duration(r, d, "min", path + ".duration_range.min", tp.duration_range.min);
            serialize_detail::read_duration(r, d, "max", path + ".duration_range.max", tp.duration_range.max);
          } else {
            r.fail(path + ".duration_range", "must be {min, max}");
          }
        }
        req.per_track[idx] = tp;
      }
    }
  }

  r.read(j, "batch_size", "batch_size", req.batch_size);
  if (j.contains("seed")) {
    const Json& s = j["seed"];
    if (s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0))
      req.seed = s.get<std::uint64_t>();
    else
      r.fail("seed", "must be a non-negative 64-bit integer");
  }
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return req;
}

// --- outputs, ranking, playback ---------------------------------------------------

inline void to_json(Json& j, const ConstraintReport& r) {
  j = Json{{"clamped_durations", r.clamped_durations},
           {"dropped_for_polyphony", r.dropped_for_polyphony},
           {"dropped_unison_overlaps", r.dropped_unison_overlaps},
           {"density_target", r.density_target},
           {"note_count", r.note_count},
           {"sparse_onsets", r.sparse_onsets}};
}

inline Json step_trace_json(const GeneratedOutput& out) {
  Json trace = Json::array();
  for (const auto& s : out.step_trace) {
    Json step{{"step", s.step}, {"window", {s.window.first, s.window.last}}, {"targets", Json::array()},
              {"reports", s.reports}};
    for (const auto& c : s.targets) step["targets"].push_back(c);
    trace.push_back(std::move(step));
  }
  return trace;
}

inline void to_json(Json& j, const RankedEntry& e) {
  j = Json{{"output_id", e.id}, {"distance", e.distance}, {"rank", e.rank}};
}

inline void to_json(Json& j, const ScheduledEvent& e) {
  j = Json{{"at_ms", e.at_ms}, {"kind", to_string(e.kind)}, {"channel", e.channel}, {"pitch", e.pitch},
           {"velocity", e.velocity}};
}

inline Json validation_error_json(const ValidationError& e) {
  Json j{{"error", "ValidationError"}, {"message", e.what()}, {"fields", Json::array()}};
  for (const auto& f : e.fields()) j["fields"].push_back({{"field", f.field}, {"message", f.message}});
  return j;
}

}  // namespace calliope

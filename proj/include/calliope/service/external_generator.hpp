#pragma once

// Client for an out-of-process generator speaking line-delimited JSON over
// stdin/stdout.
//
//   child  -> {"type":"hello","protocol_version":1,"model":{"name":..,"version":..}}
//   parent -> {"type":"generate","protocol_version":1,"seed":..,"temperature":..,
//              "ppq":..,"window":{..},"targets":[..],"constraints":{..}}
//   child  -> {"cells":[{"track":t,"bar":b,"notes":[..]}]}  |  {"error":".."}
//
// Each process serves one step at a time; a pool provides parallelism. A step
// that exceeds the timeout kills the process and fails.

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "calliope/generator.hpp"
#include "calliope/serialize.hpp"
#include "calliope/service/subprocess.hpp"

namespace calliope::service {

inline constexpr int kProtocolVersion = 1;

struct ExternalGeneratorConfig {
  std::vector<std::string> command;
  std::size_t pool_size = 1;
  std::chrono::milliseconds step_timeout{120'000};
  std::chrono::milliseconds handshake_timeout{10'000};
};

struct ModelInfo {
  std::string name;
  std::string version;
};

/// The request document for one plan step.
inline Json step_request_json(const GenerationContext& ctx, std::uint64_t seed) {
  const Piece& piece = ctx.piece;
  Json window{{"first_bar", ctx.window.first}, {"last_bar", ctx.window.last}, {"bars", Json::array()},
              {"tracks", Json::array()}, {"cells", Json::array()}};
  std::set<int> bars;
  for (const auto& c : ctx.context) bars.insert(c.bar);
  for (const auto& c : ctx.targets) bars.insert(c.bar);
  for (int b : bars) window["bars"].push_back(piece.bars[b]);
  for (int t = 0; t < piece.track_count(); ++t) {
    const Track& tr = piece.tracks[t];
    window["tracks"].push_back({{"index", t},
                                {"name", tr.name},
                                {"channel", tr.channel},
                                {"program", tr.program},
                                {"is_percussion", tr.is_percussion},
                                {"instrument_group", tr.instrument_group()}});
  }
  for (const auto& c : ctx.context)
    window["cells"].push_back({{"track", c.track}, {"bar", c.bar}, {"notes", notes_in_cell(piece, c)}});

  Json targets = Json::array();
  for (const auto& c : ctx.targets) targets.push_back(c);
  Json constraints = Json::object();
  for (const auto& [t, c] : ctx.constraints) constraints[std::to_string(t)] = c;

  return Json{{"type", "generate"},       {"protocol_version", kProtocolVersion},
              {"seed", seed},             {"temperature", ctx.temperature},
              {"ppq", piece.ppq},         {"window", std::move(window)},
              {"targets", std::move(targets)}, {"constraints", std::move(constraints)}};
}

/// Parses a step response; `channel` defaults to the track's output channel.
inline CellNotes parse_step_response(const Json& doc, const Piece& piece) {
  if (!doc.is_object()) throw Error(ErrorCode::GeneratorFailure, "response is not an object");
  if (doc.contains("error"))
    throw Error(ErrorCode::GeneratorFailure, "generator reported: " + doc["error"].dump());
  if (!doc.contains("cells") || !doc["cells"].is_array())
    throw Error(ErrorCode::GeneratorFailure, "response lacks a cells array");
  CellNotes out;
  try {
    for (const auto& c : doc["cells"]) {
      const Cell cell{c.at("track").get<int>(), c.at("bar").get<int>()};
      if (!piece.in_bounds(cell)) throw Error(ErrorCode::GeneratorFailure, "response cell outside the grid");
      auto& notes = out[cell];
      for (const auto& n : c.at("notes")) {
        const int pitch = n.at("pitch").get<int>();
        const int velocity = n.at("velocity").get<int>();
        if (pitch < 0 || pitch > 127 || velocity < 1 || velocity > 127)
          throw Error(ErrorCode::GeneratorFailure, "note field out of range");
        const int channel = n.contains("channel") ? n["channel"].get<int>() : piece.tracks[cell.track].output_channel();
        notes.push_back(NoteEvent{n.at("onset").get<Tick>(), n.at("duration").get<Tick>(),
                                  static_cast<std::uint8_t>(pitch), static_cast<std::uint8_t>(velocity),
                                  static_cast<std::uint8_t>(channel & 0x0F)});
      }
      sort_notes(notes);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::GeneratorFailure, std::string("malformed response: ") + e.what());
  }
  return out;
}

class ExternalGenerator : public Generator {
 public:
  explicit ExternalGenerator(ExternalGeneratorConfig config) : config_(std::move(config)) {
    if (config_.command.empty()) throw Error(ErrorCode::InvalidArgument, "generator command is empty");
    if (config_.pool_size == 0) config_.pool_size = 1;
    idle_.reserve(config_.pool_size);
  }

  std::string name() const override {
    std::lock_guard lock(mutex_);
    return info_ ? info_->name + "/" + info_->version : "external";
  }

  /// Each pooled process is exclusive to one step; the pool itself may be
  /// shared by concurrent batch items.
  bool concurrent_safe() const override { return true; }

  /// Starts a process (if none is idle) and returns its handshake.
  ModelInfo handshake() {
    auto proc = checkout();
    ModelInfo info;
    {
      std::lock_guard lock(mutex_);
      info = *info_;
    }
    checkin(std::move(proc));
    return info;
  }

  CellNotes generate_cells(const GenerationContext& ctx, Rng& rng) override {
    const std::uint64_t seed = rng.next_u64();
    const std::string request = step_request_json(ctx, seed).dump();
    auto proc = checkout();
    std::optional<std::string> line;
    try {
      proc->write_line(request);
      line = proc->read_line(config_.step_timeout);
    } catch (...) {
      discard(std::move(proc));
      throw;
    }
    if (!line) {
      discard(std::move(proc));
      throw Error(ErrorCode::GeneratorFailure,
                  "step timed out after " + std::to_string(config_.step_timeout.count()) + " ms");
    }
    Json doc;
    try {
      doc = Json::parse(*line);
    } catch (const Json::exception&) {
      discard(std::move(proc));
      throw Error(ErrorCode::GeneratorFailure, "response is not JSON");
    }
    checkin(std::move(proc));
    return parse_step_response(doc, ctx.piece);
  }

 private:
  std::unique_ptr<ChildProcess> spawn() {
    auto proc = std::make_unique<ChildProcess>(config_.command);
    auto line = proc->read_line(config_.handshake_timeout);
    if (!line) throw Error(ErrorCode::GeneratorFailure, "no handshake from generator process");
    Json hello;
    try {
      hello = Json::parse(*line);
    } catch (const Json::exception&) {
      throw Error(ErrorCode::GeneratorFailure, "handshake is not JSON");
    }
    if (hello.value("type", "") != "hello" || hello.value("protocol_version", 0) != kProtocolVersion)
      throw Error(ErrorCode::GeneratorFailure, "unexpected handshake: " + *line);
    ModelInfo info;
    if (hello.contains("model") && hello["model"].is_object()) {
      info.name = hello["model"].value("name", "");
      info.version = hello["model"].value("version", "");
    }
    std::lock_guard lock(mutex_);
    info_ = info;
    return proc;
  }

  std::unique_ptr<ChildProcess> checkout() {
    {
      std::unique_lock lock(mutex_);
      available_.wait(lock, [&] { return !idle_.empty() || live_ < config_.pool_size; });
      if (!idle_.empty()) {
        auto proc = std::move(idle_.back());
        idle_.pop_back();
        return proc;
      }
      ++live_;
    }
    try {
      return spawn();
    } catch (...) {
      std::lock_guard lock(mutex_);
      --live_;
      available_.notify_one();
      throw;
    }
  }

  void checkin(std::unique_ptr<ChildProcess> proc) {
    std::lock_guard lock(mutex_);
    idle_.push_back(std::move(proc));
    available_.notify_one();
  }

  void discard(std::unique_ptr<ChildProcess> proc) {
    proc->kill();
    std::lock_guard lock(mutex_);
    --live_;
    available_.notify_one();
  }

  ExternalGeneratorConfig config_;
  mutable std::mutex mutex_;
  std::condition_variable available_;
  std::vector<std::unique_ptr<ChildProcess>> idle_;
  std::size_t live_ = 0;
  std::optional<ModelInfo> info_;
};

}  // namespace calliope::service

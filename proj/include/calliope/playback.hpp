#pragma once

// Playback: turn a piece into a millisecond schedule and deliver it in real
// time to a sink (the service's event channel, a recorder, or a MIDI device).

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string_view>
#include <thread>
#include <vector>

#include "calliope/error.hpp"
#include "calliope/midi.hpp"
#include "calliope/piece.hpp"

#ifdef CALLIOPE_WITH_MIDI_PORT
#include <fcntl.h>
#include <unistd.h>
#endif

namespace calliope {

enum class EventKind { ProgramChange = 0, NoteOff = 1, NoteOn = 2, End = 3 };

constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::ProgramChange: return "program_change";
    case EventKind::NoteOff: return "note_off";
    case EventKind::NoteOn: return "note_on";
    case EventKind::End: return "end";
  }
  return "end";
}

struct ScheduledEvent {
  double at_ms = 0;
  EventKind kind = EventKind::End;
  int channel = 0;
  int pitch = 0;  // program number for program_change
  int velocity = 0;

  bool operator==(const ScheduledEvent&) const = default;
};

/// Pure schedule of a piece: one program change per track at 0 ms, note
/// on/off pairs, and a final `end` at the end of the last bar. A tempo
/// override replaces the tempo map with a constant tempo.
inline std::vector<ScheduledEvent> schedule(const Piece& piece, std::optional<int> tempo_override = std::nullopt) {
  if (tempo_override && *tempo_override <= 0) throw Error(ErrorCode::InvalidArgument, "tempo must be positive");
  auto ms = [&](Tick tick) {
    if (tempo_override) return static_cast<double>(tick) * 60000.0 / (static_cast<double>(*tempo_override) * piece.ppq);
    return midi::tick_to_seconds(piece.tempo_map, tick, piece.ppq) * 1000.0;
  };

  std::vector<ScheduledEvent> events;
  for (const auto& t : piece.tracks)
    events.push_back({0.0, EventKind::ProgramChange, t.output_channel(), t.program, 0});
  for (const auto& t : piece.tracks) {
    for (const auto& n : t.notes) {
      events.push_back({ms(n.onset), EventKind::NoteOn, t.output_channel(), n.pitch, n.velocity});
      events.push_back({ms(n.end()), EventKind::NoteOff, t.output_channel(), n.pitch, 0});
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const ScheduledEvent& a, const ScheduledEvent& b) {
    return std::tie(a.at_ms, a.kind, a.channel, a.pitch) < std::tie(b.at_ms, b.kind, b.channel, b.pitch);
  });
  double end = ms(piece.end_tick());
  if (!events.empty()) end = std::max(end, events.back().at_ms);
  events.push_back({end, EventKind::End, 0, 0, 0});
  return events;
}

/// Raw MIDI bytes for an event; `end` has no wire form.
inline Bytes to_midi_bytes(const ScheduledEvent& e) {
  const auto ch = static_cast<std::uint8_t>(e.channel & 0x0F);
  switch (e.kind) {
    case EventKind::ProgramChange: return {static_cast<std::uint8_t>(0xC0 | ch), static_cast<std::uint8_t>(e.pitch & 0x7F)};
    case EventKind::NoteOn:
      return {static_cast<std::uint8_t>(0x90 | ch), static_cast<std::uint8_t>(e.pitch & 0x7F),
              static_cast<std::uint8_t>(e.velocity & 0x7F)};
    case EventKind::NoteOff:
      return {static_cast<std::uint8_t>(0x80 | ch), static_cast<std::uint8_t>(e.pitch & 0x7F), 0};
    case EventKind::End: break;
  }
  return {};
}

class EventSink {
 public:
  virtual ~EventSink() = default;
  /// Throws Error(SinkClosed) once the consumer has gone away.
  virtual void deliver(const ScheduledEvent& event) = 0;
};

/// Keeps every delivered event with its wall-clock arrival time.
class RecordingSink : public EventSink {
 public:
  using Clock = std::chrono::steady_clock;
  struct Entry {
    ScheduledEvent event;
    Clock::time_point at;
  };

  void deliver(const ScheduledEvent& event) override {
    std::lock_guard lock(mutex_);
    if (closed_) throw Error(ErrorCode::SinkClosed, "recording sink closed");
    entries_.push_back({event, Clock::now()});
    if (close_after_ && entries_.size() >= *close_after_) closed_ = true;
  }

  void close_after(std::size_t n) { close_after_ = n; }
  std::vector<Entry> entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
  std::optional<std::size_t> close_after_;
  bool closed_ = false;
};

#ifdef CALLIOPE_WITH_MIDI_PORT
/// Writes raw MIDI bytes to a character device (e.g. a virtual MIDI port such
/// as /dev/snd/midiC1D0 provided by snd-virmidi) for DAW integration.
class MidiDeviceSink : public EventSink {
 public:
  explicit MidiDeviceSink(const std::string& path) : fd_(::open(path.c_str(), O_WRONLY | O_CLOEXEC)) {
    if (fd_ < 0) throw Error(ErrorCode::SinkClosed, "cannot open MIDI device " + path);
  }
  ~MidiDeviceSink() override {
    if (fd_ >= 0) ::close(fd_);
  }
  MidiDeviceSink(const MidiDeviceSink&) = delete;
  MidiDeviceSink& operator=(const MidiDeviceSink&) = delete;

  void deliver(const ScheduledEvent& event) override {
    const Bytes bytes = to_midi_bytes(event);
    if (bytes.empty()) return;
    if (::write(fd_, bytes.data(), bytes.size()) != static_cast<ssize_t>(bytes.size()))
      throw Error(ErrorCode::SinkClosed, "MIDI device write failed");
  }

 private:
  int fd_;
};
#endif

struct StreamResult {
  std::size_t delivered = 0;
  bool stopped = false;
  bool sink_closed = false;
};

/// Delivers `events` in order, each at its scheduled offset from the call.
/// On stop or a closed sink, note-offs are sent for every sounding note
/// (best effort when the sink itself failed).
inline StreamResult stream(const std::vector<ScheduledEvent>& events, EventSink& sink, std::stop_token stop = {}) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  std::map<std::pair<int, int>, int> sounding;
  StreamResult result;
  std::mutex wait_mutex;
  std::condition_variable_any wake;

  auto release = [&](bool send_end, double at_ms) {
    for (auto& [key, count] : sounding) {
      for (; count > 0; --count) {
        try {
          sink.deliver({at_ms, EventKind::NoteOff, key.first, key.second, 0});
          ++result.delivered;
        } catch (const Error&) {
          return;
        }
      }
    }
    if (send_end) {
      try {
        sink.deliver({at_ms, EventKind::End, 0, 0, 0});
        ++result.delivered;
      } catch (const Error&) {
      }
    }
  };

  for (const auto& e : events) {
    const auto due = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(e.at_ms));
    {
      std::unique_lock lock(wait_mutex);
      wake.wait_until(lock, stop, due, [] { return false; });
    }
    if (stop.stop_requested()) {
      result.stopped = true;
      const double now_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      release(true, now_ms);
      return result;
    }
    try {
      sink.deliver(e);
      ++result.delivered;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::SinkClosed) throw;
      result.sink_closed = true;
      release(false, e.at_ms);
      return result;
    }
    if (e.kind == EventKind::NoteOn) {
      ++sounding[{e.channel, e.pitch}];
    } else if (e.kind == EventKind::NoteOff) {
      auto it = sounding.find({e.channel, e.pitch});
      if (it != sounding.end() && it->second > 0) --it->second;
    }
  }
  return result;
}

/// One playback at a time on a dedicated worker; starting again stops the
/// previous playback first.
class Player {
 public:
  ~Player() { stop(); }

  void start(std::vector<ScheduledEvent> events, std::shared_ptr<EventSink> sink) {
    stop();
    std::lock_guard lock(mutex_);
    done_ = std::make_shared<std::optional<StreamResult>>();
    worker_ = std::jthread([events = std::move(events), sink = std::move(sink), done = done_](std::stop_token st) {
      *done = stream(events, *sink, st);
    });
  }

  /// Stops the active playback (if any) and waits for its note-offs.
  std::optional<StreamResult> stop() {
    std::jthread worker;
    std::shared_ptr<std::optional<StreamResult>> done;
    {
      std::lock_guard lock(mutex_);
      worker = std::move(worker_);
      done = done_;
    }
    if (worker.joinable()) {
      worker.request_stop();
      worker.join();
    }
    return done ? *done : std::nullopt;
  }

  /// Waits for natural completion.
  std::optional<StreamResult> wait() {
    std::jthread worker;
    std::shared_ptr<std::optional<StreamResult>> done;
    {
      std::lock_guard lock(mutex_);
      worker = std::move(worker_);
      done = done_;
    }
    if (worker.joinable()) worker.join();
    return done ? *done : std::nullopt;
  }

 private:
  std::mutex mutex_;
  std::jthread worker_;
  std::shared_ptr<std::optional<StreamResult>> done_;
};

}  // namespace calliope

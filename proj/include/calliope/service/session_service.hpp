#pragma once

// Sessions seeded by a MIDI file, asynchronous batch generation with ranking,
// promotion of outputs to new sessions, export and live playback.

#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "calliope/generate.hpp"
#include "calliope/generator.hpp"
#include "calliope/midi.hpp"
#include "calliope/piece.hpp"
#include "calliope/playback.hpp"
#include "calliope/ranking.hpp"
#include "calliope/serialize.hpp"
#include "calliope/service/events.hpp"
#include "calliope/service/store.hpp"

namespace calliope::service {

struct ServiceOptions {
  unsigned job_workers = 2;
  unsigned item_threads = 0;
};

namespace service_detail {

inline std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

inline std::string index_suffix(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", k);
  return buf;
}

}  // namespace service_detail

/// Parses a track metadata document (all fields optional).
inline TrackMetadata track_metadata_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError({{"track", "must be an object"}});
  std::vector<FieldError> errs;
  TrackMetadata m;
  auto int_field = [&](const char* key, int hi, std::optional<int>& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 0 || j[key].get<long long>() > hi)
      errs.push_back({key, "must be an integer in [0, " + std::to_string(hi) + "]"});
    else
      out = j[key].get<int>();
  };
  if (j.contains("name")) {
    if (j["name"].is_string())
      m.name = j["name"].get<std::string>();
    else
      errs.push_back({"name", "must be a string"});
  }
  int_field("channel", 15, m.channel);
  int_field("program", 127, m.program);
  if (j.contains("is_percussion")) {
    if (j["is_percussion"].is_boolean())
      m.is_percussion = j["is_percussion"].get<bool>();
    else
      errs.push_back({"is_percussion", "must be a boolean"});
  }
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return m;
}

class SessionService {
 public:
  SessionService(std::shared_ptr<DocumentStore> store, std::shared_ptr<Generator> generator, ServiceOptions options = {})
      : store_(std::move(store)), generator_(std::move(generator)), options_(options), rng_(std::random_device{}()) {
    for (unsigned i = 0; i < std::max(1u, options_.job_workers); ++i)
      workers_.emplace_back([this](std::stop_token st) { work(st); });
  }

  ~SessionService() {
    for (auto& w : workers_) w.request_stop();
    queue_cv_.notify_all();
    workers_.clear();
    std::lock_guard lock(players_mutex_);
    players_.clear();
  }

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  EventHub& events() { return hub_; }
  const Generator& generator() const { return *generator_; }

  // --- sessions -----------------------------------------------------------------

  /// Parses the bytes, then persists blob and session. Nothing is stored when
  /// parsing fails.
  Json create_session(const Bytes& midi, const Json& parent_output = nullptr) {
    Piece piece;
    try {
      piece = segment_bars(midi::parse_smf(midi));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, e.what());
    }
    const std::string id = new_id();
    store_->put_blob("seeds", id, midi);
    Json doc{{"id", id},
             {"created_at", service_detail::timestamp_now()},
             {"seed_blob", id},
             {"parent_output", parent_output},
             {"piece", piece}};
    store_->put("sessions", id, doc);
    return summary(doc);
  }

  Json get_session(const std::string& id) const { return summary(load("sessions", id)); }

  Piece get_piece(const std::string& id) const { return piece_from_document(load("sessions", id).at("piece")); }

  Json edit_track(const std::string& id, int index, const TrackMetadata& meta) {
    return mutate(id, [&](const Piece& p) { return edit_track_metadata(p, index, meta); });
  }
  Json add_track(const std::string& id, const TrackMetadata& meta) {
    return mutate(id, [&](const Piece& p) { return calliope::add_track(p, meta); });
  }
  Json delete_track(const std::string& id, int index) {
    return mutate(id, [&](const Piece& p) { return calliope::delete_track(p, index); });
  }

  Bytes export_session(const std::string& id) const { return midi::write_smf(piece_to_midifile(get_piece(id))); }

  /// Session ids from `id` back to the original upload.
  std::vector<std::string> lineage(const std::string& id) const {
    std::vector<std::string> chain{id};
    Json doc = load("sessions", id);
    while (!doc["parent_output"].is_null()) {
      const Json out = load("outputs", doc["parent_output"].get<std::string>());
      const std::string parent = out.at("session_id").get<std::string>();
      chain.push_back(parent);
      doc = load("sessions", parent);
    }
    return chain;
  }

  // --- generation -------------------------------------------------------------------

  /// Validates against the session's current piece and enqueues the batch.
  Json request_generation(const std::string& session_id, const Json& body) {
    auto lock = lock_session(session_id);
    const Piece piece = get_piece(session_id);
    GenerationRequest request = request_from_json(body);
    validate(request, piece);

    const std::string id = new_id();
    Json doc{{"id", id},
             {"session_id", session_id},
             {"request", request},
             {"status", "pending"},
             {"outputs", Json::array()},
             {"generator", generator_->name()},
             {"created_at", service_detail::timestamp_now()},
             {"duration_ms", nullptr},
             {"error", nullptr}};
    save_batch(doc);
    {
      std::lock_guard q(queue_mutex_);
      queue_.push_back([this, id, session_id, request = std::move(request), piece] {
        run_batch(id, session_id, request, piece);
      });
    }
    queue_cv_.notify_one();
    return doc;
  }

  Json get_batch(const std::string& id) const {
    std::lock_guard lock(batch_mutex_);
    return load("batches", id);
  }

  /// Blocks until the batch leaves pending/running or the timeout passes.
  Json wait_batch(const std::string& id, std::chrono::milliseconds timeout) {
    auto sub = hub_.subscribe("batch/" + id);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      Json doc = get_batch(id);
      const auto status = doc["status"].get<std::string>();
      if (status == "done" || status == "failed") return doc;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return doc;
      Json ignored;
      sub->next(ignored, std::min(left, std::chrono::milliseconds(200)));
    }
  }

  Json ranking(const std::string& batch_id, std::optional<double> threshold = std::nullopt) const {
    const Json batch = get_batch(batch_id);
    if (batch["status"] != "done")
      throw Error(ErrorCode::InvalidArgument, "batch " + batch_id + " is " + batch["status"].get<std::string>());
    RankedList list;
    for (const auto& oid : batch["outputs"]) {
      const Json out = load("outputs", oid.get<std::string>());
      list.push_back({oid.get<std::string>(), out["distance"].get<double>(), out["rank"].get<int>()});
    }
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
    if (threshold) list = filter_by_threshold(list, *threshold);
    return Json{{"batch_id", batch_id},
                {"reference_session", batch["session_id"]},
                {"threshold", threshold ? Json(*threshold) : Json(nullptr)},
                {"ranking", list}};
  }

  Json get_output(const std::string& id) const { return load("outputs", id); }

  Piece output_piece(const std::string& id) const { return piece_from_document(load("outputs", id).at("piece")); }

  Bytes export_output(const std::string& id) const { return midi::write_smf(piece_to_midifile(output_piece(id))); }

  /// New session seeded with the output's exported MIDI.
  Json promote(const std::string& output_id) { return create_session(export_output(output_id), output_id); }

  // --- playback ---------------------------------------------------------------------

  /// Streams the session piece (or one of its outputs) to the session's
  /// playback topic, replacing any playback already running.
  Json play(const std::string& session_id, std::optional<std::string> output_id = std::nullopt,
            std::optional<int> tempo = std::nullopt) {
    if (tempo && (*tempo < bounds::kTempoMin || *tempo > bounds::kTempoMax))
      throw ValidationError({{"tempo", "must be an integer in [" + std::to_string(bounds::kTempoMin) + ", " +
                                           std::to_string(bounds::kTempoMax) + "]"}});
    const Piece piece = output_id ? output_piece(*output_id) : get_piece(session_id);
    auto events = schedule(piece, tempo);
    const Json reply{{"session_id", session_id},
                     {"output_id", output_id ? Json(*output_id) : Json(nullptr)},
                     {"events", events.size()},
                     {"duration_ms", events.back().at_ms}};
    auto sink = std::make_shared<HubSink>(hub_, "playback/" + session_id);
    std::lock_guard lock(players_mutex_);
    auto& player = players_[session_id];
    if (!player) player = std::make_unique<Player>();
    player->start(std::move(events), std::move(sink));
    return reply;
  }

  Json stop(const std::string& session_id) {
    load("sessions", session_id);
    Player* player = nullptr;
    {
      std::lock_guard lock(players_mutex_);
      auto it = players_.find(session_id);
      if (it != players_.end()) player = it->second.get();
    }
    std::optional<StreamResult> r;
    if (player) r = player->stop();
    return Json{{"session_id", session_id}, {"stopped", r && r->stopped}};
  }

 private:
  /// Forwards scheduled events to an event-hub topic.
  class HubSink : public EventSink {
   public:
    HubSink(EventHub& hub, std::string topic) : hub_(hub), topic_(std::move(topic)) {}
    void deliver(const ScheduledEvent& e) override {
      hub_.publish(topic_, Json(e));
    }

   private:
    EventHub& hub_;
    std::string topic_;
  };

  std::string new_id() {
    std::lock_guard lock(id_mutex_);
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
    return buf;
  }

  Json load(const std::string& collection, const std::string& id) const {
    std::optional<Json> doc;
    try {
      doc = store_->get(collection, id);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotFound) throw;
    }
    if (!doc) {
      std::string kind = collection;
      kind.pop_back();
      throw Error(ErrorCode::NotFound, kind + " " + id + " not found");
    }
    return *doc;
  }

  static Json summary(const Json& session) {
    const Piece piece = piece_from_document(session.at("piece"));
    Json s = session;
    s.erase("piece");
    s["track_count"] = piece.track_count();
    s["bar_count"] = piece.bar_count();
    s["ppq"] = piece.ppq;
    return s;
  }

  std::unique_lock<std::mutex> lock_session(const std::string& id) {
    std::shared_ptr<std::mutex> m;
    {
      std::lock_guard lock(session_locks_mutex_);
      auto& slot = session_locks_[id];
      if (!slot) slot = std::make_shared<std::mutex>();
      m = slot;
    }
    std::unique_lock lock(*m);
    load("sessions", id);
    // Mutexes live as long as the service; sessions are never deleted.
    return lock;
  }

  template <typename F>
  Json mutate(const std::string& id, F&& op) {
    auto lock = lock_session(id);
    Json doc = load("sessions", id);
    const Piece updated = op(piece_from_document(doc.at("piece")));
    check_piece(updated);
    doc["piece"] = updated;
    store_->put("sessions", id, doc);
    return summary(doc);
  }

  void save_batch(const Json& doc) {
    {
      std::lock_guard lock(batch_mutex_);
      store_->put("batches", doc["id"].get<std::string>(), doc);
    }
    hub_.publish("batch/" + doc["id"].get<std::string>(),
                 Json{{"batch_id", doc["id"]}, {"status", doc["status"]}, {"error", doc["error"]},
                      {"outputs", doc["outputs"].size()}});
  }

  void run_batch(const std::string& id, const std::string& session_id, const GenerationRequest& request,
                 const Piece& piece) {
    Json doc = get_batch(id);
    doc["status"] = "running";
    doc["started_at"] = service_detail::timestamp_now();
    save_batch(doc);
    const auto started = std::chrono::steady_clock::now();

    try {
      auto outputs = generate(request, piece, *generator_, {.threads = options_.item_threads});

      Piece reference;
      {
        auto lock = lock_session(session_id);
        reference = get_piece(session_id);
      }
      std::vector<std::pair<std::string, Piece>> candidates;
      for (const auto& o : outputs) candidates.push_back({id + "-" + service_detail::index_suffix(o.index), o.piece});
      std::map<std::string, RankedEntry> ranks;
      for (const auto& e : rank_outputs(reference, candidates)) ranks[e.id] = e;

      std::vector<Json> docs;
      for (std::size_t k = 0; k < outputs.size(); ++k) {
        const auto& o = outputs[k];
        const std::string oid = candidates[k].first;
        Json constraints = Json::object();
        for (const auto& [t, c] : o.constraints) constraints[std::to_string(t)] = c;
        Json unvisited = Json::array();
        for (const auto& c : o.unvisited) unvisited.push_back(c);
        docs.push_back(Json{{"id", oid},
                            {"batch_id", id},
                            {"session_id", session_id},
                            {"index", o.index},
                            {"seed", o.request_seed},
                            {"distance", ranks[oid].distance},
                            {"rank", ranks[oid].rank},
                            {"constraints", constraints},
                            {"step_trace", step_trace_json(o)},
                            {"unvisited", unvisited},
                            {"piece", o.piece}});
      }
      for (const auto& d : docs) store_->put("outputs", d["id"].get<std::string>(), d);
      for (const auto& d : docs) doc["outputs"].push_back(d["id"]);
      doc["status"] = "done";
    } catch (const GeneratorFailure& e) {
      doc["status"] = "failed";
      doc["error"] = Json{{"code", to_string(e.code())}, {"message", e.what()}, {"step", e.step()}};
    } catch (const Error& e) {
      doc["status"] = "failed";
      doc["error"] = Json{{"code", to_string(e.code())}, {"message", e.what()}, {"step", nullptr}};
    } catch (const std::exception& e) {
      doc["status"] = "failed";
      doc["error"] = Json{{"code", "InternalError"}, {"message", e.what()}, {"step", nullptr}};
    }
    if (doc["status"] == "failed") doc["outputs"] = Json::array();
    doc["finished_at"] = service_detail::timestamp_now();
    doc["duration_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    save_batch(doc);
  }

  void work(std::stop_token st) {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(queue_mutex_);
        if (!queue_cv_.wait(lock, st, [&] { return !queue_.empty(); })) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      job();
    }
  }

  std::shared_ptr<DocumentStore> store_;
  std::shared_ptr<Generator> generator_;
  ServiceOptions options_;
  EventHub hub_;

  std::mutex id_mutex_;
  std::mt19937_64 rng_;

  mutable std::mutex batch_mutex_;
  std::mutex session_locks_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> session_locks_;

  std::mutex players_mutex_;
  std::map<std::string, std::unique_ptr<Player>> players_;

  std::mutex queue_mutex_;
  std::condition_variable_any queue_cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::jthread> workers_;
};

}  // namespace calliope::service

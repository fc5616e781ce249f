#pragma once

// REST and server-sent-event routes over SessionService.

#include <chrono>
#include <memory>
#include <string>

#include "httplib.h"

#include "calliope/params.hpp"
#include "calliope/service/session_service.hpp"

namespace calliope::service {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::ValidationError: return 422;
    case ErrorCode::NotFound:
    case ErrorCode::IndexOutOfBounds: return 404;
    case ErrorCode::LastTrackDeletion: return 409;
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::MalformedHeader:
    case ErrorCode::TruncatedChunk:
    case ErrorCode::BadVarLen:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::MalformedEvent: return 400;
    default: return 500;
  }
}

/// Parameter bounds shared with clients.
inline Json bounds_document() {
  using namespace bounds;
  Json durations = Json::array();
  for (auto n : kDurationClassNames) durations.push_back(n);
  return Json{{"temperature", {kTemperatureMin, kTemperatureMax}},
              {"polyphony_hard_limit", {kPolyphonyLimitMin, kPolyphonyLimitMax}},
              {"percentage", {0, kPercentageMax}},
              {"model_dim", {kWindowMin, kWindowMax}},
              {"tracks_per_step", {kWindowMin, kWindowMax}},
              {"bars_per_step", {kWindowMin, kWindowMax}},
              {"max_steps", {0, kMaxStepsMax}},
              {"tempo", {kTempoMin, kTempoMax}},
              {"note_density", {0, kDensityMax}},
              {"polyphony_range", {0, kPolyphonyRangeMax}},
              {"batch_size", {1, kBatchSizeMax}},
              {"program", {0, gm::kProgramCount - 1}},
              {"group", {0, gm::kGroupCount - 1}},
              {"duration_classes", durations},
              {"defaults", GlobalParams{}}};
}

namespace http_detail {

inline void send_json(httplib::Response& res, const Json& doc, int status = 200) {
  res.status = status;
  res.set_content(doc.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) {
  Json body;
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
    body = validation_error_json(*v);
  } else {
    body = Json{{"error", to_string(e.code())}, {"message", e.what()}};
  }
  send_json(res, body, http_status(e.code()));
}

inline Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("body is not JSON: ") + e.what());
  }
}

inline int parse_index(const std::string& s) {
  try {
    return std::stoi(s);
  } catch (...) {
    throw Error(ErrorCode::NotFound, "bad index " + s);
  }
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_json(res, Json{{"error", "InternalError"}, {"message", e.what()}}, 500);
    }
  };
}

inline std::string sse(const std::string& event, const Json& data) {
  return "event: " + event + "\ndata: " + data.dump() + "\n\n";
}

inline bool write(httplib::DataSink& sink, const std::string& s) { return sink.write(s.data(), s.size()); }

}  // namespace http_detail

/// Registers all routes. `service` must outlive `server`.
inline void register_routes(httplib::Server& server, SessionService& service) {
  using namespace http_detail;
  using httplib::Request;
  using httplib::Response;
  constexpr const char* kId = "([0-9a-f]+)";
  constexpr const char* kOutputId = "([0-9a-f]+-[0-9]+)";
  auto path = [](std::string s, const char* a, const char* b = nullptr) {
    s.replace(s.find("{}"), 2, a);
    if (b) s.replace(s.find("{}"), 2, b);
    return s;
  };

  server.Get("/health", guarded([&](const Request&, Response& res) {
               send_json(res, Json{{"status", "ok"}, {"generator", service.generator().name()}});
             }));
  server.Get("/bounds", guarded([](const Request&, Response& res) { send_json(res, bounds_document()); }));

  server.Post("/sessions", guarded([&](const Request& req, Response& res) {
                std::string data = req.body;
                if (req.is_multipart_form_data()) {
                  if (!req.has_file("file")) throw Error(ErrorCode::InvalidArgument, "multipart field 'file' missing");
                  data = req.get_file_value("file").content;
                }
                const Bytes bytes(data.begin(), data.end());
                send_json(res, service.create_session(bytes), 201);
              }));
  server.Get(path("/sessions/{}", kId), guarded([&](const Request& req, Response& res) {
               send_json(res, service.get_session(req.matches[1]));
             }));
  server.Get(path("/sessions/{}/piece", kId), guarded([&](const Request& req, Response& res) {
               send_json(res, service.get_piece(req.matches[1]));
             }));
  server.Get(path("/sessions/{}/lineage", kId), guarded([&](const Request& req, Response& res) {
               send_json(res, Json{{"sessions", service.lineage(req.matches[1])}});
             }));
  server.Get(path("/sessions/{}/midi", kId), guarded([&](const Request& req, Response& res) {
               const Bytes b = service.export_session(req.matches[1]);
               res.set_content(std::string(b.begin(), b.end()), "audio/midi");
             }));
  server.Patch(path("/sessions/{}/tracks/([0-9]+)", kId), guarded([&](const Request& req, Response& res) {
                 send_json(res, service.edit_track(req.matches[1], parse_index(req.matches[2]),
                                                   track_metadata_from_json(parse_body(req))));
               }));
  server.Post(path("/sessions/{}/tracks", kId), guarded([&](const Request& req, Response& res) {
                send_json(res, service.add_track(req.matches[1], track_metadata_from_json(parse_body(req))), 201);
              }));
  server.Delete(path("/sessions/{}/tracks/([0-9]+)", kId), guarded([&](const Request& req, Response& res) {
                  send_json(res, service.delete_track(req.matches[1], parse_index(req.matches[2])));
                }));
  server.Post(path("/sessions/{}/generate", kId), guarded([&](const Request& req, Response& res) {
                send_json(res, service.request_generation(req.matches[1], parse_body(req)), 202);
              }));

  server.Get(path("/batches/{}", kId), guarded([&](const Request& req, Response& res) {
               send_json(res, service.get_batch(req.matches[1]));
             }));
  server.Get(path("/batches/{}/ranking", kId), guarded([&](const Request& req, Response& res) {
               std::optional<double> threshold;
               if (req.has_param("threshold")) {
                 try {
                   threshold = std::stod(req.get_param_value("threshold"));
                 } catch (...) {
                   throw ValidationError({{"threshold", "must be a number"}});
                 }
               }
               send_json(res, service.ranking(req.matches[1], threshold));
             }));
  server.Get(path("/batches/{}/events", kId), guarded([&](const Request& req, Response& res) {
               const std::string id = req.matches[1];
               service.get_batch(id);
               auto sub = service.events().subscribe("batch/" + id);
               bool first = true;
               res.set_header("Cache-Control", "no-cache");
               res.set_chunked_content_provider(
                   "text/event-stream", [&service, id, sub, first](std::size_t, httplib::DataSink& sink) mutable {
                     auto terminal = [](const Json& d) { return d["status"] == "done" || d["status"] == "failed"; };
                     if (first) {
                       first = false;
                       const Json b = service.get_batch(id);
                       const Json snap{{"batch_id", id}, {"status", b["status"]}, {"error", b["error"]},
                                       {"outputs", b["outputs"].size()}};
                       if (!write(sink, sse("status", snap))) return false;
                       if (terminal(snap)) sink.done();
                       return true;
                     }
                     Json msg;
                     switch (sub->next(msg, std::chrono::seconds(5))) {
                       case Subscription::Status::Message:
                         if (!write(sink, sse("status", msg))) return false;
                         if (terminal(msg)) sink.done();
                         return true;
                       case Subscription::Status::Timeout: return write(sink, ": keep-alive\n\n");
                       case Subscription::Status::Closed: sink.done(); return true;
                     }
                     return false;
                   });
             }));

  server.Get(path("/outputs/{}", kOutputId), guarded([&](const Request& req, Response& res) {
               send_json(res, service.get_output(req.matches[1]));
             }));
  server.Get(path("/outputs/{}/midi", kOutputId), guarded([&](const Request& req, Response& res) {
               const Bytes b = service.export_output(req.matches[1]);
               res.set_content(std::string(b.begin(), b.end()), "audio/midi");
             }));
  server.Post(path("/outputs/{}/promote", kOutputId), guarded([&](const Request& req, Response& res) {
                send_json(res, service.promote(req.matches[1]), 201);
              }));

  server.Post(path("/sessions/{}/playback", kId), guarded([&](const Request& req, Response& res) {
                const Json body = parse_body(req);
                std::optional<std::string> output;
                std::optional<int> tempo;
                if (body.contains("output_id") && !body["output_id"].is_null()) {
                  if (!body["output_id"].is_string()) throw ValidationError({{"output_id", "must be a string"}});
                  output = body["output_id"].get<std::string>();
                }
                if (body.contains("tempo") && !body["tempo"].is_null()) {
                  if (!body["tempo"].is_number_integer()) throw ValidationError({{"tempo", "must be an integer"}});
                  tempo = body["tempo"].get<int>();
                }
                send_json(res, service.play(req.matches[1], output, tempo), 202);
              }));
  server.Delete(path("/sessions/{}/playback", kId), guarded([&](const Request& req, Response& res) {
                  send_json(res, service.stop(req.matches[1]));
                }));
  server.Get(path("/sessions/{}/playback/events", kId), guarded([&](const Request& req, Response& res) {
               const std::string id = req.matches[1];
               service.get_session(id);
               auto sub = service.events().subscribe("playback/" + id);
               res.set_header("Cache-Control", "no-cache");
               res.set_chunked_content_provider("text/event-stream", [sub](std::size_t, httplib::DataSink& sink) {
                 Json msg;
                 switch (sub->next(msg, std::chrono::seconds(5))) {
                   case Subscription::Status::Message:
                     if (!write(sink, sse("playback", msg))) return false;
                     if (msg["kind"] == "end") sink.done();
                     return true;
                   case Subscription::Status::Timeout: return write(sink, ": keep-alive\n\n");
                   case Subscription::Status::Closed: sink.done(); return true;
                 }
                 return false;
               });
             }));
}

}  // namespace calliope::service

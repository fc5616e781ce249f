// calliope command-line front end: serve the API, or run the engine on files.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "httplib.h"

#include "calliope/generate.hpp"
#include "calliope/playback.hpp"
#include "calliope/ranking.hpp"
#include "calliope/serialize.hpp"
#include "calliope/service/config.hpp"
#include "calliope/service/external_generator.hpp"
#include "calliope/service/http.hpp"
#include "calliope/service/session_service.hpp"
#include "calliope/service/store.hpp"

namespace {

using namespace calliope;

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const Bytes& data) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::StorageError, "cannot write " + path.string());
}

Piece load_piece(const std::string& path, SegmentReport* seg = nullptr, ParseReport* parse = nullptr) {
  return segment_bars(midi::parse_smf(read_file(path), parse), seg);
}

std::shared_ptr<Generator> make_generator(const service::ServiceConfig& cfg) {
  if (cfg.generator_command.empty()) return std::make_shared<ContextMarkovGenerator>();
  return std::make_shared<service::ExternalGenerator>(
      service::ExternalGeneratorConfig{cfg.generator_command, cfg.pool_size, cfg.step_timeout});
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calliope: multi-track MIDI bar in-filling engine and session service"};
  app.require_subcommand(1);

  std::string config_path, host, generator_cmd, storage;
  int port = 0;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", config_path, "JSON config file");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--storage", storage, "Storage directory (default: in memory)");
  serve->add_option("--generator", generator_cmd, "External generator command line");

  std::string input;
  auto* inspect = app.add_subcommand("inspect", "Print a MIDI file's piece document");
  inspect->add_option("file", input)->required();
  bool with_notes = false;
  inspect->add_flag("--notes", with_notes, "Include notes");

  std::string request_path, out_dir = ".";
  auto* gen = app.add_subcommand("generate", "Run a generation request against a MIDI file");
  gen->add_option("file", input)->required();
  gen->add_option("--request", request_path, "Request JSON file")->required();
  gen->add_option("--out", out_dir, "Output directory");
  gen->add_option("--generator", generator_cmd, "External generator command line");

  std::vector<std::string> candidates;
  double threshold = -1;
  auto* rank = app.add_subcommand("rank", "Rank MIDI files against a reference");
  rank->add_option("reference", input)->required();
  rank->add_option("candidates", candidates)->required();
  rank->add_option("--threshold", threshold);

  int tempo = 0;
  auto* sched = app.add_subcommand("schedule", "Print the playback schedule as JSON lines");
  sched->add_option("file", input)->required();
  sched->add_option("--tempo", tempo);

  std::string device;
  auto* play = app.add_subcommand("play", "Stream the playback schedule in real time");
  play->add_option("file", input)->required();
  play->add_option("--tempo", tempo);
  play->add_option("--device", device, "Raw MIDI device to write to (builds with CALLIOPE_MIDI_PORT)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      auto cfg = service::load_config(config_path);
      if (!host.empty()) cfg.host = host;
      if (port) cfg.port = port;
      if (!storage.empty()) cfg.storage_root = storage;
      if (!generator_cmd.empty()) cfg.generator_command = service::config_detail::split_command(generator_cmd);
      std::shared_ptr<service::DocumentStore> store;
      if (cfg.storage_root.empty())
        store = std::make_shared<service::MemoryStore>();
      else
        store = std::make_shared<service::DirectoryStore>(cfg.storage_root);
      service::SessionService svc(store, make_generator(cfg), {cfg.job_workers, cfg.item_threads});
      httplib::Server server;
      service::register_routes(server, svc);
      g_server = &server;
      std::signal(SIGINT, [](int) { g_server->stop(); });
      std::signal(SIGTERM, [](int) { g_server->stop(); });
      std::cerr << "listening on " << cfg.host << ":" << cfg.port << " (generator " << svc.generator().name() << ")\n";
      if (!server.listen(cfg.host, cfg.port)) {
        std::cerr << "cannot listen on " << cfg.host << ":" << cfg.port << "\n";
        return 1;
      }
      return 0;
    }

    if (*inspect) {
      SegmentReport seg;
      ParseReport parse;
      const Piece p = load_piece(input, &seg, &parse);
      Json doc = p;
      if (!with_notes)
        for (auto& t : doc["tracks"]) {
          t["note_count"] = t["notes"].size();
          t.erase("notes");
        }
      doc["report"] = Json{{"skipped_chunks", parse.skipped_chunks},
                       {"missing_end_of_track", parse.missing_end_of_track},
                       {"trailing_track_bytes", parse.trailing_track_bytes},
                       {"orphan_note_offs", seg.pairing.orphan_note_offs},
                       {"unterminated_notes", seg.pairing.unterminated_notes},
                       {"zero_length_notes", seg.pairing.zero_length_notes},
                       {"snapped_time_signatures", seg.snapped_time_signatures}};
      std::cout << doc.dump(2) << "\n";
      return 0;
    }

    if (*gen) {
      const Piece p = load_piece(input);
      std::ifstream in(request_path);
      if (!in) throw Error(ErrorCode::NotFound, "cannot open " + request_path);
      const GenerationRequest req = request_from_json(Json::parse(in));
      service::ServiceConfig cfg;
      if (!generator_cmd.empty()) cfg.generator_command = service::config_detail::split_command(generator_cmd);
      auto generator = make_generator(cfg);
      const auto outputs = generate(req, p, *generator);
      std::filesystem::create_directories(out_dir);
      std::vector<std::pair<std::string, Piece>> named;
      for (const auto& o : outputs) {
        const std::string name = "output_" + std::to_string(o.index) + ".mid";
        write_file(std::filesystem::path(out_dir) / name, midi::write_smf(piece_to_midifile(o.piece)));
        named.push_back({name, o.piece});
      }
      std::cout << Json{{"generator", generator->name()}, {"ranking", rank_outputs(p, named)}}.dump(2) << "\n";
      return 0;
    }

    if (*rank) {
      const Piece ref = load_piece(input);
      std::vector<std::pair<std::string, Piece>> named;
      for (const auto& c : candidates) named.push_back({c, load_piece(c)});
      auto list = rank_outputs(ref, named);
      if (threshold >= 0) list = filter_by_threshold(list, threshold);
      std::cout << Json(list).dump(2) << "\n";
      return 0;
    }

    if (*sched || *play) {
      const Piece p = load_piece(input);
      const auto events = schedule(p, tempo > 0 ? std::optional<int>(tempo) : std::nullopt);
      if (*sched) {
        for (const auto& e : events) std::cout << Json(e).dump() << "\n";
        return 0;
      }
      if (!device.empty()) {
#ifdef CALLIOPE_WITH_MIDI_PORT
        MidiDeviceSink sink(device);
        stream(events, sink);
        return 0;
#else
        throw Error(ErrorCode::InvalidArgument, "built without CALLIOPE_MIDI_PORT");
#endif
      }
      class StdoutSink : public EventSink {
       public:
        void deliver(const ScheduledEvent& e) override { std::cout << Json(e).dump() << std::endl; }
      } sink;
      stream(events, sink);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << validation_error_json(e).dump(2) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

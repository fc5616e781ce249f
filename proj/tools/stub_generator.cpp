// Test double for the external generator protocol.
//
//   calliope-stub-generator [--mode simple|error|hang] [--crash-after N]
//                           [--bad-handshake] [--name NAME]
//
// simple: one quarter note per target cell at the bar start, pitch chosen
// from the request seed. error: replies {"error":...}. hang: never replies.
// --crash-after N exits after answering N requests.

#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"Stub generator for the calliope subprocess protocol"};
  std::string mode = "simple";
  int crash_after = -1;
  bool bad_handshake = false;
  std::string name = "stub";
  app.add_option("--mode", mode)->check(CLI::IsMember({"simple", "error", "hang"}));
  app.add_option("--crash-after", crash_after);
  app.add_flag("--bad-handshake", bad_handshake);
  app.add_option("--name", name);
  CLI11_PARSE(app, argc, argv);

  if (bad_handshake) {
    std::cout << "{\"type\":\"greetings\"}" << std::endl;
  } else {
    std::cout << json{{"type", "hello"}, {"protocol_version", 1}, {"model", {{"name", name}, {"version", "1.0"}}}}.dump()
              << std::endl;
  }

  std::string line;
  int answered = 0;
  while (std::getline(std::cin, line)) {
    if (crash_after >= 0 && answered >= crash_after) return 3;
    const json req = json::parse(line, nullptr, false);
    if (req.is_discarded()) {
      std::cout << json{{"error", "unparseable request"}}.dump() << std::endl;
      continue;
    }
    if (mode == "hang") {
      for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
    }
    if (mode == "error") {
      std::cout << json{{"error", "model refused"}}.dump() << std::endl;
      ++answered;
      continue;
    }
    std::map<int, long long> bar_start;
    for (const auto& b : req["window"]["bars"]) bar_start[b["index"].get<int>()] = b["start"].get<long long>();
    const int ppq = req["ppq"].get<int>();
    const auto seed = req["seed"].get<std::uint64_t>();
    json cells = json::array();
    for (const auto& t : req["targets"]) {
      const int bar = t["bar"].get<int>();
      const int pitch = 48 + static_cast<int>((seed + static_cast<std::uint64_t>(bar)) % 24);
      cells.push_back({{"track", t["track"]},
                       {"bar", bar},
                       {"notes", json::array({{{"onset", bar_start.at(bar)},
                                               {"duration", ppq},
                                               {"pitch", pitch},
                                               {"velocity", 96}}})}});
    }
    std::cout << json{{"cells", cells}}.dump() << std::endl;
    ++answered;
  }
  return 0;
}

#pragma once

// Service configuration: a JSON file overlaid by CALLIOPE_* environment
// variables.

#include <cctype>
#include <chrono>
#include <optional>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "calliope/error.hpp"

namespace calliope::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string storage_root;                    // empty: in-memory store
  std::vector<std::string> generator_command;  // empty: built-in generator
  std::size_t pool_size = 1;
  std::chrono::milliseconds step_timeout{120'000};
  unsigned job_workers = 2;   // batches running at once
  unsigned item_threads = 0;  // per batch; 0 = hardware concurrency
};

namespace config_detail {

/// Whitespace-separated words; double quotes group.
inline std::vector<std::string> split_command(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, have = false;
  for (char c : s) {
    if (c == '"') {
      quoted = !quoted;
      have = true;
    } else if (!quoted && std::isspace(static_cast<unsigned char>(c))) {
      if (have) out.push_back(cur);
      cur.clear();
      have = false;
    } else {
      cur += c;
      have = true;
    }
  }
  if (have) out.push_back(cur);
  return out;
}

inline int to_int(const std::string& name, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used == value.size()) return v;
  } catch (...) {
  }
  throw Error(ErrorCode::InvalidArgument, name + " must be an integer, got '" + value + "'");
}

}  // namespace config_detail

inline void apply_json(ServiceConfig& c, const nlohmann::json& j) {
  if (j.contains("host")) c.host = j["host"].get<std::string>();
  if (j.contains("port")) c.port = j["port"].get<int>();
  if (j.contains("storage_root")) c.storage_root = j["storage_root"].get<std::string>();
  if (j.contains("generator_command")) {
    const auto& g = j["generator_command"];
    c.generator_command = g.is_string() ? config_detail::split_command(g.get<std::string>())
                                        : g.get<std::vector<std::string>>();
  }
  if (j.contains("pool_size")) c.pool_size = j["pool_size"].get<std::size_t>();
  if (j.contains("step_timeout_ms")) c.step_timeout = std::chrono::milliseconds(j["step_timeout_ms"].get<long long>());
  if (j.contains("job_workers")) c.job_workers = j["job_workers"].get<unsigned>();
  if (j.contains("item_threads")) c.item_threads = j["item_threads"].get<unsigned>();
}

/// Environment overrides. `getenv` is injectable for tests.
template <typename GetEnv>
void apply_env(ServiceConfig& c, GetEnv getenv) {
  using config_detail::to_int;
  auto get = [&](const char* name) -> std::optional<std::string> {
    const char* v = getenv(name);
    if (!v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = get("CALLIOPE_LISTEN")) {
    const auto colon = v->rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "CALLIOPE_LISTEN must be host:port");
    c.host = v->substr(0, colon);
    c.port = to_int("CALLIOPE_LISTEN", v->substr(colon + 1));
  }
  if (auto v = get("CALLIOPE_STORAGE_ROOT")) c.storage_root = *v;
  if (auto v = get("CALLIOPE_GENERATOR")) c.generator_command = config_detail::split_command(*v);
  if (auto v = get("CALLIOPE_POOL_SIZE")) c.pool_size = static_cast<std::size_t>(to_int("CALLIOPE_POOL_SIZE", *v));
  if (auto v = get("CALLIOPE_STEP_TIMEOUT_MS"))
    c.step_timeout = std::chrono::milliseconds(to_int("CALLIOPE_STEP_TIMEOUT_MS", *v));
  if (auto v = get("CALLIOPE_JOB_WORKERS")) c.job_workers = static_cast<unsigned>(to_int("CALLIOPE_JOB_WORKERS", *v));
}

inline ServiceConfig load_config(const std::string& path = {}) {
  ServiceConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read config " + path);
    try {
      apply_json(c, nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "config " + path + ": " + e.what());
    }
  }
  apply_env(c, [](const char* n) { return std::getenv(n); });
  return c;
}

}  // namespace calliope::service

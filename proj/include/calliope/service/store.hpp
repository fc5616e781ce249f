#pragma once

// Document-store abstraction: JSON documents and binary blobs keyed by
// (collection, id). Two backends: in-memory and an on-disk directory.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "calliope/error.hpp"
#include "calliope/midi.hpp"

namespace calliope::service {

using Json = nlohmann::json;

class DocumentStore {
 public:
  virtual ~DocumentStore() = default;

  virtual void put(const std::string& collection, const std::string& id, const Json& doc) = 0;
  virtual std::optional<Json> get(const std::string& collection, const std::string& id) const = 0;
  virtual void put_blob(const std::string& collection, const std::string& id, const Bytes& data) = 0;
  virtual std::optional<Bytes> get_blob(const std::string& collection, const std::string& id) const = 0;
  virtual std::vector<std::string> list(const std::string& collection) const = 0;
};

class MemoryStore : public DocumentStore {
 public:
  void put(const std::string& collection, const std::string& id, const Json& doc) override {
    std::lock_guard lock(mutex_);
    docs_[collection][id] = doc.dump();
  }
  std::optional<Json> get(const std::string& collection, const std::string& id) const override {
    std::lock_guard lock(mutex_);
    auto c = docs_.find(collection);
    if (c == docs_.end()) return std::nullopt;
    auto d = c->second.find(id);
    if (d == c->second.end()) return std::nullopt;
    return Json::parse(d->second);
  }
  void put_blob(const std::string& collection, const std::string& id, const Bytes& data) override {
    std::lock_guard lock(mutex_);
    blobs_[collection][id] = data;
  }
  std::optional<Bytes> get_blob(const std::string& collection, const std::string& id) const override {
    std::lock_guard lock(mutex_);
    auto c = blobs_.find(collection);
    if (c == blobs_.end()) return std::nullopt;
    auto d = c->second.find(id);
    if (d == c->second.end()) return std::nullopt;
    return d->second;
  }
  std::vector<std::string> list(const std::string& collection) const override {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    auto c = docs_.find(collection);
    if (c != docs_.end())
      for (const auto& [id, _] : c->second) out.push_back(id);
    return out;
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::map<std::string, std::string>> docs_;
  std::map<std::string, std::map<std::string, Bytes>> blobs_;
};

/// <root>/<collection>/<id>.json and <id>.bin. Writes go to a temporary file
/// that is renamed into place.
class DirectoryStore : public DocumentStore {
 public:
  explicit DirectoryStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw Error(ErrorCode::StorageError, "cannot create " + root_.string() + ": " + ec.message());
  }

  void put(const std::string& collection, const std::string& id, const Json& doc) override {
    const std::string text = doc.dump(1);
    write_atomic(path_for(collection, id, ".json"), text.data(), text.size());
  }
  std::optional<Json> get(const std::string& collection, const std::string& id) const override {
    auto bytes = read(path_for(collection, id, ".json"));
    if (!bytes) return std::nullopt;
    try {
      return Json::parse(bytes->begin(), bytes->end());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::StorageError, collection + "/" + id + ": " + e.what());
    }
  }
  void put_blob(const std::string& collection, const std::string& id, const Bytes& data) override {
    write_atomic(path_for(collection, id, ".bin"), reinterpret_cast<const char*>(data.data()), data.size());
  }
  std::optional<Bytes> get_blob(const std::string& collection, const std::string& id) const override {
    auto bytes = read(path_for(collection, id, ".bin"));
    if (!bytes) return std::nullopt;
    return Bytes(bytes->begin(), bytes->end());
  }
  std::vector<std::string> list(const std::string& collection) const override {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(root_ / collection, ec))
      if (entry.path().extension() == ".json") out.push_back(entry.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::filesystem::path path_for(const std::string& collection, const std::string& id, const char* ext) const {
    auto ok = [](const std::string& s) {
      return !s.empty() && s.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789-_") == std::string::npos;
    };
    if (!ok(collection) || !ok(id)) throw Error(ErrorCode::NotFound, "invalid document key");
    return root_ / collection / (id + ext);
  }

  void write_atomic(const std::filesystem::path& target, const char* data, std::size_t size) {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
    thread_local std::mt19937_64 gen{std::random_device{}()};
    const auto tmp = target.parent_path() / (".tmp-" + std::to_string(gen()));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(data, static_cast<std::streamsize>(size));
      if (!out) throw Error(ErrorCode::StorageError, "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::StorageError, "rename failed: " + ec.message());
  }

  static std::optional<std::string> read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::filesystem::path root_;
};

}  // namespace calliope::service

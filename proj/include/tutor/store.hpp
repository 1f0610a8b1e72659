#pragma once

// One JSON file per session under a root directory. Writes go to a temporary
// file that is fsync'd and renamed over the record, so a reader never sees a
// partial file. Mutations of one session are serialized by a per-id mutex.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tutor/error.hpp"
#include "tutor/session.hpp"

namespace tutor {

inline bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
           c == '.';
  });
}

inline std::string random_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char hex[] = "0123456789abcdef";
  std::string id(24, '0');
  for (auto& c : id) c = hex[rng() & 0xF];
  return id;
}

/// Writes `contents` to `path` via write-new-then-rename.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  const auto tmp = path.string() + ".tmp-" + random_session_id();
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::Io, "cannot create " + tmp);
  std::size_t written = 0;
  while (written < contents.size()) {
    const auto n = ::write(fd, contents.data() + written, contents.size() - written);
    if (n <= 0) {
      ::close(fd);
      std::filesystem::remove(tmp);
      throw Error(ErrorCode::Io, "write failed for " + tmp);
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::Io, "rename to " + path.string() + " failed: " + ec.message());
  }
}

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
      const auto id = entry.path().stem().string();
      if (valid_session_id(id)) index_[id] = entry.path();
    }
  }

  const std::filesystem::path& root() const { return root_; }

  std::vector<std::string> ids() const {
    std::lock_guard lock(index_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : index_) out.push_back(id);
    return out;
  }

  bool contains(const std::string& id) const {
    std::lock_guard lock(index_mutex_);
    return index_.contains(id);
  }

  void persist(const Session& s) {
    if (!valid_session_id(s.id)) throw Error(ErrorCode::Io, "session id '" + s.id + "' is not filename-safe");
    const auto path = root_ / (s.id + ".json");
    write_file_atomic(path, session_to_json(s).dump(2) + "\n");
    std::lock_guard lock(index_mutex_);
    index_[s.id] = path;
  }

  Session restore(const std::string& id) const {
    std::filesystem::path path;
    {
      std::lock_guard lock(index_mutex_);
      auto it = index_.find(id);
      if (it == index_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'", id);
      path = it->second;
    }
    std::string raw;
    try {
      raw = read_file(path);
    } catch (const Error&) {
      throw Error(ErrorCode::NotFound, "session file for '" + id + "' is missing", id);
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::CorruptRecord, "session '" + id + "' is unreadable: " + e.what(), path.string());
    }
    Session s = session_from_json(j);
    if (s.id != id) throw Error(ErrorCode::CorruptRecord, "session file for '" + id + "' holds '" + s.id + "'", path.string());
    return s;
  }

  /// Stores a new session; fails if the id is taken.
  void create(const Session& s) {
    auto guard = lock(s.id);
    if (contains(s.id)) throw Error(ErrorCode::Io, "session '" + s.id + "' already exists", s.id);
    persist(s);
  }

  /// Runs `fn` on the stored session under its lock and persists the result
  /// when `fn` returns normally. A throwing `fn` leaves the record untouched.
  template <typename Fn>
  auto update(const std::string& id, Fn&& fn) {
    auto guard = lock(id);
    Session s = restore(id);
    if constexpr (std::is_void_v<std::invoke_result_t<Fn, Session&>>) {
      fn(s);
      persist(s);
    } else {
      auto result = fn(s);
      persist(s);
      return result;
    }
  }

  /// Reads a session under its lock, so readers never observe a half-applied update.
  Session read(const std::string& id) {
    auto guard = lock(id);
    return restore(id);
  }

 private:
  // Entries in locks_ are never erased, so the mutex outlives the returned lock.
  std::unique_lock<std::mutex> lock(const std::string& id) {
    std::mutex* m = nullptr;
    {
      std::lock_guard g(index_mutex_);
      auto& slot = locks_[id];
      if (!slot) slot = std::make_unique<std::mutex>();
      m = slot.get();
    }
    return std::unique_lock<std::mutex>(*m);
  }

  std::filesystem::path root_;
  mutable std::mutex index_mutex_;
  std::map<std::string, std::filesystem::path> index_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// Loads every readable session record in a directory, skipping corrupt files.
inline std::vector<Session> load_sessions(const std::filesystem::path& dir, std::vector<std::string>* skipped = nullptr) {
  std::vector<Session> out;
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::MissingFile, "no such directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      out.push_back(session_from_json(nlohmann::json::parse(read_file(f))));
    } catch (const std::exception& e) {
      if (skipped) skipped->push_back(f.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace tutor

#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

namespace xchan {

// Append-only key/value container backing the embedding and response
// caches.
//
// Data file: a sequence of records
//   u32 magic | u32 key_len | u64 payload_len | key | payload | sha256(key || payload)
// all integers little-endian. A later record for the same key supersedes an
// earlier one. The index sidecar (`<data>.idx`) holds one line per record,
// "<offset> <hex key>", and is rebuilt by scanning the data file whenever it
// does not account for every byte of it.
class RecordStore {
 public:
  enum class Status { hit, miss, corrupt };

  struct Lookup {
    Status status = Status::miss;
    std::string payload;
  };

  explicit RecordStore(std::filesystem::path data_path);

  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  // Safe to call concurrently with other reads; writes take an exclusive lock.
  Lookup get(const std::string& key) const;
  void put(const std::string& key, std::string_view payload);

  bool contains(const std::string& key) const;
  std::size_t size() const;
  const std::filesystem::path& data_path() const { return data_path_; }
  std::filesystem::path index_path() const;

 private:
  void load_or_rebuild_index();
  void rebuild_index();

  std::filesystem::path data_path_;
  std::unordered_map<std::string, std::uint64_t> offsets_;
  std::uint64_t data_size_ = 0;
  mutable std::shared_mutex mutex_;
};

}  // namespace xchan

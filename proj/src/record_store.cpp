#include "xchan/record_store.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "xchan/digest.hpp"
#include "xchan/errors.hpp"

namespace xchan {

namespace {

constexpr std::uint32_t kMagic = 0x31524358;  // "XCR1"
constexpr std::size_t kHeaderSize = 16;
constexpr std::size_t kDigestSize = 32;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

Sha256 record_digest(std::string_view key, std::string_view payload) {
  std::string joined;
  joined.reserve(key.size() + payload.size());
  joined.append(key);
  joined.append(payload);
  return sha256(joined);
}

struct RawRecord {
  std::string key;
  std::string payload;
  bool digest_ok = false;
  std::uint64_t total_size = 0;
};

// Reads the record at the stream's current position. Returns nullopt on a
// truncated or unframed record.
std::optional<RawRecord> read_record(std::istream& in) {
  std::array<unsigned char, kHeaderSize> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), kHeaderSize)) return std::nullopt;
  if (get_le(header.data(), 4) != kMagic) return std::nullopt;
  const auto key_len = get_le(header.data() + 4, 4);
  const auto payload_len = get_le(header.data() + 8, 8);
  if (key_len > (1u << 20) || payload_len > (1ull << 34)) return std::nullopt;

  RawRecord rec;
  rec.key.resize(key_len);
  rec.payload.resize(payload_len);
  Sha256 stored{};
  if (!in.read(rec.key.data(), static_cast<std::streamsize>(key_len))) return std::nullopt;
  if (!in.read(rec.payload.data(), static_cast<std::streamsize>(payload_len))) return std::nullopt;
  if (!in.read(reinterpret_cast<char*>(stored.data()), kDigestSize)) return std::nullopt;
  rec.digest_ok = record_digest(rec.key, rec.payload) == stored;
  rec.total_size = kHeaderSize + key_len + payload_len + kDigestSize;
  return rec;
}

std::string from_hex(std::string_view hex) {
  std::string out;
  out.reserve(hex.size() / 2);
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw Error("bad hex in index");
    out.push_back(static_cast<char>(hi * 16 + lo));
  }
  return out;
}

}  // namespace

RecordStore::RecordStore(std::filesystem::path data_path) : data_path_(std::move(data_path)) {
  if (data_path_.has_parent_path()) std::filesystem::create_directories(data_path_.parent_path());
  if (!std::filesystem::exists(data_path_)) {
    std::ofstream touch(data_path_, std::ios::binary);
    if (!touch) throw Error("cannot create store " + data_path_.string());
  }
  load_or_rebuild_index();
}

std::filesystem::path RecordStore::index_path() const {
  auto p = data_path_;
  p += ".idx";
  return p;
}

void RecordStore::load_or_rebuild_index() {
  data_size_ = std::filesystem::file_size(data_path_);
  offsets_.clear();

  std::ifstream idx(index_path());
  std::uint64_t covered = 0;
  bool ok = static_cast<bool>(idx);
  if (ok) {
    std::ifstream data(data_path_, std::ios::binary);
    std::string line;
    while (std::getline(idx, line)) {
      std::istringstream ls(line);
      std::uint64_t offset = 0;
      std::string hex_key;
      if (!(ls >> offset >> hex_key) || offset != covered) {
        ok = false;
        break;
      }
      // Only the framing is checked here; digests are verified on read.
      data.seekg(static_cast<std::streamoff>(offset));
      std::array<unsigned char, kHeaderSize> header{};
      if (!data.read(reinterpret_cast<char*>(header.data()), kHeaderSize) ||
          get_le(header.data(), 4) != kMagic) {
        ok = false;
        break;
      }
      covered = offset + kHeaderSize + get_le(header.data() + 4, 4) + get_le(header.data() + 8, 8) + kDigestSize;
      offsets_[from_hex(hex_key)] = offset;
    }
  }
  if (!ok || covered != data_size_) rebuild_index();
}

void RecordStore::rebuild_index() {
  offsets_.clear();
  std::ifstream data(data_path_, std::ios::binary);
  std::ofstream idx(index_path(), std::ios::binary | std::ios::trunc);
  std::uint64_t offset = 0;
  while (offset < data_size_) {
    data.seekg(static_cast<std::streamoff>(offset));
    auto rec = read_record(data);
    if (!rec) break;  // truncated tail: ignored, overwritten by the next put
    offsets_[rec->key] = offset;
    idx << offset << ' ' << to_hex(std::span(reinterpret_cast<const std::uint8_t*>(rec->key.data()), rec->key.size()))
        << '\n';
    offset += rec->total_size;
  }
  if (offset != data_size_) {
    std::filesystem::resize_file(data_path_, offset);
    data_size_ = offset;
  }
}

RecordStore::Lookup RecordStore::get(const std::string& key) const {
  std::uint64_t offset = 0;
  {
    std::shared_lock lock(mutex_);
    auto it = offsets_.find(key);
    if (it == offsets_.end()) return {};
    offset = it->second;
  }
  std::ifstream data(data_path_, std::ios::binary);
  data.seekg(static_cast<std::streamoff>(offset));
  auto rec = read_record(data);
  if (!rec || !rec->digest_ok || rec->key != key) return {Status::corrupt, {}};
  return {Status::hit, std::move(rec->payload)};
}

void RecordStore::put(const std::string& key, std::string_view payload) {
  std::string buf;
  buf.reserve(kHeaderSize + key.size() + payload.size() + kDigestSize);
  put_u32(buf, kMagic);
  put_u32(buf, static_cast<std::uint32_t>(key.size()));
  put_u64(buf, payload.size());
  buf.append(key);
  buf.append(payload);
  const auto digest = record_digest(key, payload);
  buf.append(reinterpret_cast<const char*>(digest.data()), digest.size());

  std::unique_lock lock(mutex_);
  {
    std::ofstream data(data_path_, std::ios::binary | std::ios::app);
    data.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!data) throw Error("write failed: " + data_path_.string());
  }
  {
    std::ofstream idx(index_path(), std::ios::binary | std::ios::app);
    idx << data_size_ << ' ' << to_hex(std::span(reinterpret_cast<const std::uint8_t*>(key.data()), key.size()))
        << '\n';
  }
  offsets_[key] = data_size_;
  data_size_ += buf.size();
}

bool RecordStore::contains(const std::string& key) const {
  std::shared_lock lock(mutex_);
  return offsets_.count(key) > 0;
}

std::size_t RecordStore::size() const {
  std::shared_lock lock(mutex_);
  return offsets_.size();
}

}  // namespace xchan

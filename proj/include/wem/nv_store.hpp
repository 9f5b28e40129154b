#pragma once

// Append-only record log standing in for the meter's EEPROM. Every change of
// the reading (or the editable config) is committed as one record; recovery
// picks the newest record whose CRC verifies, so a torn final write falls back
// to the previous reading.
//
// Record layout, little-endian:
//   u64 seq | u64 ncu_pulses | u64 ecu_pulses | u16 cfg_len | cfg bytes | u32 crc
// The CRC-32 covers every byte of the record before it.

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wem {

struct NvRecord {
  std::uint64_t seq = 0;
  std::uint64_t ncu_pulses = 0;
  std::uint64_t ecu_pulses = 0;
  std::string config_digest;

  bool operator==(const NvRecord&) const = default;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

namespace nv_detail {

inline constexpr std::size_t kHeaderSize = 8 + 8 + 8 + 2;
inline constexpr std::size_t kCrcSize = 4;
inline constexpr std::size_t kMaxDigest = 0xFFFF;

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}

inline std::vector<std::uint8_t> encode(const NvRecord& r) {
  if (r.config_digest.size() > kMaxDigest)
    throw std::invalid_argument("NvRecord: config digest too large");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + r.config_digest.size() + kCrcSize);
  put_le(out, r.seq, 8);
  put_le(out, r.ncu_pulses, 8);
  put_le(out, r.ecu_pulses, 8);
  put_le(out, r.config_digest.size(), 2);
  out.insert(out.end(), r.config_digest.begin(), r.config_digest.end());
  put_le(out, crc32_of(out), 4);
  return out;
}

struct ScanResult {
  std::optional<NvRecord> latest;
  std::size_t valid_bytes = 0;
  std::size_t records = 0;
};

// Walks the log from the start and stops at the first record that is
// incomplete, fails its CRC, or does not advance the sequence number.
inline ScanResult scan(std::span<const std::uint8_t> log) {
  ScanResult result;
  std::size_t at = 0;
  std::uint64_t last_seq = 0;
  while (log.size() - at >= kHeaderSize + kCrcSize) {
    const auto cfg_len = static_cast<std::size_t>(get_le(log, at + 24, 2));
    const std::size_t total = kHeaderSize + cfg_len + kCrcSize;
    if (log.size() - at < total) break;
    const auto body = log.subspan(at, total - kCrcSize);
    const auto stored_crc = static_cast<std::uint32_t>(get_le(log, at + total - kCrcSize, 4));
    if (crc32_of(body) != stored_crc) break;
    NvRecord r;
    r.seq = get_le(log, at, 8);
    if (r.seq <= last_seq) break;
    r.ncu_pulses = get_le(log, at + 8, 8);
    r.ecu_pulses = get_le(log, at + 16, 8);
    r.config_digest.assign(reinterpret_cast<const char*>(log.data() + at + kHeaderSize), cfg_len);
    last_seq = r.seq;
    result.latest = std::move(r);
    at += total;
    result.valid_bytes = at;
    ++result.records;
  }
  return result;
}

}  // namespace nv_detail

/// Newest committed record in a raw log image; the zero record when none verifies.
inline NvRecord recover(std::span<const std::uint8_t> log) {
  auto scanned = nv_detail::scan(log);
  return scanned.latest ? *scanned.latest : NvRecord{};
}

class NvStore {
 public:
  static constexpr std::size_t kDefaultMaxRecords = 4096;

  /// Memory-backed store, optionally seeded with an existing log image.
  explicit NvStore(std::vector<std::uint8_t> image = {},
                   std::size_t max_records = kDefaultMaxRecords)
      : log_(std::move(image)), max_records_(max_records) {
    if (max_records_ == 0) throw std::invalid_argument("NvStore: max_records must be > 0");
    open_log();
  }

  /// File-backed store. An existing file is loaded and its torn tail discarded.
  static NvStore open_file(const std::filesystem::path& path,
                           std::size_t max_records = kDefaultMaxRecords) {
    std::vector<std::uint8_t> image;
    if (std::filesystem::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      image.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    NvStore store(std::move(image), max_records);
    store.path_ = path;
    store.rewrite_file();
    return store;
  }

  NvStore(NvStore&&) = default;
  NvStore& operator=(NvStore&&) = default;

  /// Appends a record with the next sequence number and returns that number.
  std::uint64_t commit(std::uint64_t ncu_pulses, std::uint64_t ecu_pulses,
                       std::string config_digest) {
    NvRecord rec{latest_.seq + 1, ncu_pulses, ecu_pulses, std::move(config_digest)};
    const auto bytes = nv_detail::encode(rec);
    if (records_ + 1 > max_records_) {
      // Compaction: the log restarts with just the new record.
      log_ = bytes;
      records_ = 1;
      latest_ = std::move(rec);
      ++compactions_;
      rewrite_file();
      return latest_.seq;
    }
    log_.insert(log_.end(), bytes.begin(), bytes.end());
    ++records_;
    latest_ = std::move(rec);
    append_file(bytes);
    return latest_.seq;
  }

  NvRecord recover() const { return latest_; }

  std::span<const std::uint8_t> bytes() const { return log_; }
  std::size_t record_count() const { return records_; }
  std::size_t compactions() const { return compactions_; }
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  void open_log() {
    auto scanned = nv_detail::scan(log_);
    log_.resize(scanned.valid_bytes);
    records_ = scanned.records;
    latest_ = scanned.latest ? *scanned.latest : NvRecord{};
  }

  void append_file(const std::vector<std::uint8_t>& bytes) {
    if (!path_) return;
    if (!out_) {
      out_ = std::make_unique<std::ofstream>(*path_, std::ios::binary | std::ios::app);
      if (!*out_) throw std::runtime_error("NvStore: cannot open " + path_->string());
    }
    out_->write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    out_->flush();
    if (!*out_) throw std::runtime_error("NvStore: write failed on " + path_->string());
  }

  // Replaces the file atomically with the in-memory image.
  void rewrite_file() {
    if (!path_) return;
    out_.reset();
    auto tmp = *path_;
    tmp += ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error("NvStore: cannot write " + tmp.string());
      f.write(reinterpret_cast<const char*>(log_.data()), static_cast<std::streamsize>(log_.size()));
      if (!f) throw std::runtime_error("NvStore: write failed on " + tmp.string());
    }
    std::filesystem::rename(tmp, *path_);
  }

  std::vector<std::uint8_t> log_;
  std::size_t max_records_;
  std::size_t records_ = 0;
  std::size_t compactions_ = 0;
  NvRecord latest_;
  std::optional<std::filesystem::path> path_;
  std::unique_ptr<std::ofstream> out_;
};

}  // namespace wem

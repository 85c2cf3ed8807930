#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edin/types.hpp"

namespace edin::io {

// CRC-64/XZ (reflected ECMA-182 polynomial), used as the trailing checksum
// of binary artifacts.
std::uint64_t crc64(const void* data, std::size_t len,
                    std::uint64_t crc = 0);
std::uint64_t crc64_file(const std::string& path, std::size_t skip_tail = 0);

// Little-endian byte sink/source over an in-memory buffer. Binary formats
// are assembled in memory so the checksum can cover the exact bytes.
class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void bytes(const void* p, std::size_t n);
  void str(const std::string& s);  // u32 length prefix + raw bytes
  void vec(const VecF& v);

  const std::string& buffer() const { return buf_; }
  void write_file_with_crc(const std::string& path) const;

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}
  static Reader from_file_checked(const std::string& path);  // verifies CRC

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string str();
  VecF vec(Eigen::Index dim);
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const;
  std::string buf_;
  std::size_t pos_ = 0;
};

// Embedding file: magic "EDEM", u32 version=1, u32 dim, u64 count, then
// count records of [u32 key_len][key bytes][dim x f32]. Keys are written
// in the order given; loading preserves nothing beyond the key->vector map.
struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<std::pair<std::string, VecF>> records;
};

void write_embedding_file(const std::string& path, const EmbeddingFile& file);
EmbeddingFile read_embedding_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace edin::io

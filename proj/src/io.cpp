#include "edin/io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "edin/error.hpp"

namespace edin::io {

namespace {

std::array<std::uint64_t, 256> make_crc_table() {
  // Reflected form of the ECMA-182 polynomial.
  constexpr std::uint64_t poly = 0xC96C5795D7870F42ULL;
  std::array<std::uint64_t, 256> table{};
  for (std::uint64_t i = 0; i < 256; ++i) {
    std::uint64_t c = i;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1) ? (poly ^ (c >> 1)) : (c >> 1);
    }
    table[i] = c;
  }
  return table;
}

const std::array<std::uint64_t, 256>& crc_table() {
  static const auto table = make_crc_table();
  return table;
}

}  // namespace

std::uint64_t crc64(const void* data, std::size_t len, std::uint64_t crc) {
  const auto* p = static_cast<const unsigned char*>(data);
  const auto& table = crc_table();
  crc = ~crc;
  for (std::size_t i = 0; i < len; ++i) {
    crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
  }
  return ~crc;
}

std::uint64_t crc64_file(const std::string& path, std::size_t skip_tail) {
  const std::string bytes = read_text_file(path);
  const std::size_t n = bytes.size() > skip_tail ? bytes.size() - skip_tail : 0;
  return crc64(bytes.data(), n);
}

void Writer::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void Writer::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void Writer::f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  u32(bits);
}

void Writer::bytes(const void* p, std::size_t n) {
  buf_.append(static_cast<const char*>(p), n);
}

void Writer::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void Writer::vec(const VecF& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) f32(v[i]);
}

void Writer::write_file_with_crc(const std::string& path) const {
  Writer tail;
  tail.u64(crc64(buf_.data(), buf_.size()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Err::MissingFile, "cannot open for writing: " + path);
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  out.write(tail.buffer().data(),
            static_cast<std::streamsize>(tail.buffer().size()));
  if (!out) raise(Err::Internal, "short write: " + path);
}

Reader Reader::from_file_checked(const std::string& path) {
  std::string bytes = read_text_file(path);
  if (bytes.size() < 8) raise(Err::CorruptIndex, "file too short: " + path);
  const std::string body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  const std::uint64_t stored = tail.u64();
  const std::uint64_t actual = crc64(body.data(), body.size());
  if (stored != actual) {
    raise(Err::CorruptIndex, "checksum mismatch in " + path);
  }
  return Reader(body);
}

void Reader::need(std::size_t n) const {
  if (pos_ + n > buf_.size()) {
    raise(Err::CorruptIndex, "unexpected end of binary data");
  }
}

std::uint8_t Reader::u8() {
  need(1);
  return static_cast<std::uint8_t>(buf_[pos_++]);
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++]))
         << (8 * i);
  }
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++]))
         << (8 * i);
  }
  return v;
}

float Reader::f32() {
  const std::uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::string Reader::str() {
  const std::uint32_t n = u32();
  need(n);
  std::string s = buf_.substr(pos_, n);
  pos_ += n;
  return s;
}

VecF Reader::vec(Eigen::Index dim) {
  VecF v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = f32();
  return v;
}

void write_embedding_file(const std::string& path, const EmbeddingFile& file) {
  Writer w;
  w.bytes("EDEM", 4);
  w.u32(1);
  w.u32(file.dim);
  w.u64(file.records.size());
  for (const auto& [key, vec] : file.records) {
    if (vec.size() != static_cast<Eigen::Index>(file.dim)) {
      raise(Err::DimensionMismatch,
            "embedding record '" + key + "' has dim " +
                std::to_string(vec.size()) + ", file dim " +
                std::to_string(file.dim));
    }
    w.str(key);
    w.vec(vec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Err::MissingFile, "cannot open for writing: " + path);
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) raise(Err::Internal, "short write: " + path);
}

EmbeddingFile read_embedding_file(const std::string& path) {
  Reader r(read_text_file(path));
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, "EDEM", 4) != 0) {
    raise(Err::MalformedRecord, "bad magic in embedding file " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != 1) {
    raise(Err::MalformedRecord, "unsupported embedding file version " +
                                    std::to_string(version));
  }
  EmbeddingFile file;
  file.dim = r.u32();
  const std::uint64_t count = r.u64();
  file.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string key = r.str();
    VecF v = r.vec(static_cast<Eigen::Index>(file.dim));
    file.records.emplace_back(std::move(key), std::move(v));
  }
  return file;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Err::MissingFile, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Err::MissingFile, "cannot open for writing: " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) raise(Err::Internal, "short write: " + path);
}

}  // namespace edin::io

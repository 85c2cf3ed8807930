#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "edin/error.hpp"
#include "edin/io.hpp"

using namespace edin;
namespace fs = std::filesystem;

namespace {

std::string temp_file(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("crc64 matches the known check value") {
  const char* msg = "123456789";
  CHECK(io::crc64(msg, 9) == 0x995DC9BBDF1939FAULL);
}

TEST_CASE("writer and reader round-trip scalars and strings") {
  io::Writer w;
  w.u8(7);
  w.u32(0xDEADBEEF);
  w.u64(0x0123456789ABCDEFULL);
  w.f32(3.5f);
  w.str("hello");

  io::Reader r(w.buffer());
  CHECK(r.u8() == 7);
  CHECK(r.u32() == 0xDEADBEEF);
  CHECK(r.u64() == 0x0123456789ABCDEFULL);
  CHECK(r.f32() == 3.5f);
  CHECK(r.str() == "hello");
  CHECK(r.at_end());
}

TEST_CASE("checked files detect corruption") {
  const std::string path = temp_file("edin_io_checked.bin");
  io::Writer w;
  w.str("payload");
  w.u64(42);
  w.write_file_with_crc(path);

  CHECK_NOTHROW(io::Reader::from_file_checked(path));

  // Flip one byte in the body.
  std::string bytes = io::read_text_file(path);
  bytes[2] ^= 0x01;
  io::write_text_file(path, bytes);
  CHECK_THROWS_AS(io::Reader::from_file_checked(path), Error);

  // Truncation is also corruption.
  io::write_text_file(path, bytes.substr(0, 4));
  try {
    io::Reader::from_file_checked(path);
    FAIL("expected corruption error");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::CorruptIndex);
  }
  fs::remove(path);
}

TEST_CASE("embedding file round-trips records in order") {
  const std::string path = temp_file("edin_io_embed.edem");
  io::EmbeddingFile file;
  file.dim = 3;
  VecF a(3), b(3);
  a << 1.0f, -2.0f, 0.5f;
  b << 0.0f, 4.25f, -1.0f;
  file.records.emplace_back("alpha", a);
  file.records.emplace_back("beta", b);
  io::write_embedding_file(path, file);

  const io::EmbeddingFile loaded = io::read_embedding_file(path);
  REQUIRE(loaded.dim == 3);
  REQUIRE(loaded.records.size() == 2);
  CHECK(loaded.records[0].first == "alpha");
  CHECK(loaded.records[0].second == a);
  CHECK(loaded.records[1].first == "beta");
  CHECK(loaded.records[1].second == b);
  fs::remove(path);
}

TEST_CASE("embedding file rejects inconsistent dims") {
  io::EmbeddingFile file;
  file.dim = 2;
  file.records.emplace_back("x", VecF::Zero(3));
  CHECK_THROWS_AS(io::write_embedding_file(temp_file("edin_io_bad.edem"), file),
                  Error);
}

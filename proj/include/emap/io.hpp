#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "emap/common.hpp"

namespace emap {

// All on-disk artifacts are little-endian with a 4-byte magic and a u32
// version. Layouts are documented in README.md.

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

class BinaryWriter {
public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path.string()) {
    if (!out_) throw data_error("cannot open for writing: " + path_);
  }

  void magic(const char tag[4], std::uint32_t version) {
    out_.write(tag, 4);
    u32(version);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    if (s.size() > UINT16_MAX) throw data_error("string field too long: " + path_);
    u16(static_cast<std::uint16_t>(s.size()));
    raw(s.data(), s.size());
  }
  void f32_block(std::span<const float> v) { raw(v.data(), v.size() * 4); }
  void u32_block(std::span<const std::uint32_t> v) { raw(v.data(), v.size() * 4); }
  void u64_block(std::span<const std::uint64_t> v) { raw(v.data(), v.size() * 8); }

  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw data_error("write failed: " + path_);
  }

  std::uint64_t tell() { return static_cast<std::uint64_t>(out_.tellp()); }

private:
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
public:
  explicit BinaryReader(const std::filesystem::path& path)
      : in_(path, std::ios::binary), path_(path.string()) {
    if (!in_) throw data_error("cannot open for reading: " + path_);
  }

  // Checks magic and that the stored version is supported (== expected).
  // Distinguishes a wrong file from a wrong version.
  void expect_magic(const char tag[4], std::uint32_t expected_version) {
    char buf[4];
    raw(buf, 4);
    if (std::memcmp(buf, tag, 4) != 0)
      throw data_error("bad magic in " + path_ + " (expected " +
                       std::string(tag, 4) + ")");
    const std::uint32_t v = u32();
    if (v != expected_version)
      throw data_error("unsupported version " + std::to_string(v) + " in " +
                       path_);
  }

  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint16_t u16() { std::uint16_t v; raw(&v, 2); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  float f32() { float v; raw(&v, 4); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  std::string str() {
    const std::uint16_t n = u16();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void f32_block(std::span<float> v) { raw(v.data(), v.size() * 4); }
  void u32_block(std::span<std::uint32_t> v) { raw(v.data(), v.size() * 4); }
  void u64_block(std::span<std::uint64_t> v) { raw(v.data(), v.size() * 8); }

  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw data_error("truncated file: " + path_);
  }

  std::uint64_t bytes_consumed() { return static_cast<std::uint64_t>(in_.tellg()); }

private:
  std::ifstream in_;
  std::string path_;
};

// FNV-1a, used for corpus content fingerprints.
class Fnv1a {
public:
  void update(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= b[i];
      hash_ *= 0x100000001b3ull;
    }
  }
  void update_u32(std::uint32_t v) { update(&v, 4); }
  void update_u64(std::uint64_t v) { update(&v, 8); }
  std::uint64_t digest() const { return hash_; }

private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

}  // namespace emap

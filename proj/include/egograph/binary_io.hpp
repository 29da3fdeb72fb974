#pragma once

// Little-endian primitives shared by the .flo, GMD1 and SPC1 codecs.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "egograph/errors.hpp"

namespace egograph::io {

class ByteWriter {
public:
  void put_bytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void put_i32(std::int32_t v) { put_u32(static_cast<std::uint32_t>(v)); }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }

  const std::vector<char>& bytes() const { return buf_; }

  /// Writes the buffer to `path`, replacing any existing file.
  void save(const std::filesystem::path& path) const;

private:
  std::vector<char> buf_;
};

class ByteReader {
public:
  explicit ByteReader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

  static ByteReader load(const std::filesystem::path& path);

  std::size_t remaining() const { return buf_.size() - pos_; }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string out(buf_.data() + pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t get_i32() { return static_cast<std::int32_t>(get_u32()); }
  float get_f32() { return std::bit_cast<float>(get_u32()); }
  double get_f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

private:
  void need(std::size_t n) const {
    if (remaining() < n)
      throw LengthError("unexpected end of data: need " + std::to_string(n) + " bytes, " +
                        std::to_string(remaining()) + " left");
  }

  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

/// Reads a whole file; throws IoError when it cannot be opened.
std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace egograph::io

#include "egograph/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace egograph::io {

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void ByteWriter::save(const std::filesystem::path& path) const {
  write_file(path, std::string_view(buf_.data(), buf_.size()));
}

ByteReader ByteReader::load(const std::filesystem::path& path) { return ByteReader(read_file(path)); }

}  // namespace egograph::io

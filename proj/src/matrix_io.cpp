#include "egograph/matrix_io.hpp"

#include <charconv>
#include <limits>
#include <string>

#include "egograph/binary_io.hpp"

namespace egograph::io {

namespace {
constexpr std::string_view kMagic = "GMD1";
}

std::vector<char> encode_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() || m.cols() > std::numeric_limits<std::uint32_t>::max())
    throw ShapeError("matrix too large for GMD1");
  ByteWriter out;
  out.put_bytes(kMagic);
  out.put_u32(static_cast<std::uint32_t>(m.rows()));
  out.put_u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.put_f64(m(r, c));
  return out.bytes();
}

Eigen::MatrixXd decode_matrix(std::vector<char> bytes) {
  ByteReader in(std::move(bytes));
  if (in.remaining() < 4 || in.get_bytes(4) != kMagic) throw FormatError("not a GMD1 matrix (bad magic)");
  const std::uint32_t rows = in.get_u32();
  const std::uint32_t cols = in.get_u32();
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  if (in.remaining() != count * 8)
    throw LengthError("GMD1 payload is " + std::to_string(in.remaining()) + " bytes, expected " +
                      std::to_string(count * 8));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = in.get_f64();
  return m;
}

void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  const auto bytes = encode_matrix(m);
  write_file(path, std::string_view(bytes.data(), bytes.size()));
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  try {
    return decode_matrix(read_file(path));
  } catch (const LengthError& e) {
    throw LengthError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::string out;
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(',');
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m(r, c));
      out.append(buf, ptr);
    }
    out.push_back('\n');
  }
  write_file(path, out);
}

}  // namespace egograph::io

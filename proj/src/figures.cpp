#include "egograph/figures.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "egograph/binary_io.hpp"
#include "egograph/errors.hpp"

namespace egograph::pipeline {

namespace {

constexpr Rgb kWhite = {255, 255, 255};
constexpr Rgb kGray = {128, 128, 128};
constexpr int kGap = 2;

void fill(Image& img, int x, int y0, int y1, const Rgb& c) {
  for (int y = y0; y < y1; ++y)
    std::copy(c.begin(), c.end(), img.rgb.begin() + 3 * (static_cast<std::ptrdiff_t>(y) * img.width + x));
}

Image blank(int w, int h) {
  Image img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3, 255)};
  return img;
}

}  // namespace

Rgb Image::pixel(int x, int y) const {
  const auto o = 3 * (static_cast<std::size_t>(y) * width + x);
  return {rgb[o], rgb[o + 1], rgb[o + 2]};
}

const std::vector<Rgb>& default_palette() {
  static const std::vector<Rgb> palette = {
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44},   {214, 39, 40},  {148, 103, 189}, {140, 86, 75},  {227, 119, 194},
      {127, 127, 127}, {188, 189, 34}, {23, 190, 207}, {0, 0, 128},    {128, 0, 0},     {0, 128, 128}, {255, 215, 0},
  };
  return palette;
}

Rgb parse_color(const std::string& text) {
  std::string hex = text;
  if (!hex.empty() && hex.front() == '#') hex.erase(0, 1);
  if (hex.size() != 6 || hex.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
    throw ParseError("bad colour '" + text + "', expected #rrggbb");
  Rgb c{};
  for (int i = 0; i < 3; ++i) c[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  return c;
}

std::vector<char> encode_ppm(const Image& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<char> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

Image decode_ppm(const std::vector<char>& bytes) {
  std::string head(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(bytes.size(), 64)));
  std::istringstream in(head);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  if (!(in >> magic >> w >> h >> maxval) || magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
    throw FormatError("not an 8-bit P6 image");
  const auto offset = static_cast<std::size_t>(in.tellg()) + 1;
  Image img{w, h, {}};
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < offset + n) throw LengthError("P6 pixel data truncated");
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.begin() + static_cast<std::ptrdiff_t>(offset + n));
  return img;
}

Image render_segment_plot(std::span<const int> predicted, const std::vector<Rgb>& palette, int height,
                          std::span<const int> truth) {
  if (predicted.empty()) throw EmptyOutputError("segment plot needs at least one segment");
  if (height < 1) throw ParameterError("segment plot height must be >= 1");
  if (!truth.empty() && truth.size() != predicted.size()) throw ShapeError("truth strip length differs from predictions");
  const int classes = 1 + std::max(*std::max_element(predicted.begin(), predicted.end()),
                                   truth.empty() ? 0 : *std::max_element(truth.begin(), truth.end()));
  if (static_cast<int>(palette.size()) < classes)
    throw ParameterError("palette has " + std::to_string(palette.size()) + " colours for " + std::to_string(classes) +
                         " classes");

  const int w = static_cast<int>(predicted.size());
  Image img = blank(w, truth.empty() ? height : 2 * height + kGap);
  for (int x = 0; x < w; ++x) {
    const int p = predicted[static_cast<std::size_t>(x)];
    if (p < 0) throw ParameterError("negative predicted class");
    fill(img, x, 0, height, palette[static_cast<std::size_t>(p)]);
    if (!truth.empty()) {
      const int t = truth[static_cast<std::size_t>(x)];
      fill(img, x, height + kGap, img.height, t < 0 ? kGray : palette[static_cast<std::size_t>(t)]);
    }
  }
  return img;
}

void emit_segment_plot(std::span<const int> predicted, const std::filesystem::path& path, const std::vector<Rgb>& palette,
                       int height, std::span<const int> truth) {
  const auto bytes = encode_ppm(render_segment_plot(predicted, palette, height, truth));
  io::write_file(path, std::string_view(bytes.data(), bytes.size()));
}

std::string confusion_csv(const EvaluationReport& report) {
  std::string out;
  for (int r = 0; r < report.classes(); ++r) {
    if (r > 0) out += '\n';
    for (int c = 0; c < report.classes(); ++c) {
      if (c > 0) out += ',';
      out += std::to_string(report.confusion(r, c));
    }
  }
  return out;
}

Image render_confusion(const EvaluationReport& report, int cell) {
  if (cell < 1) throw ParameterError("cell size must be >= 1");
  const int k = report.classes();
  Image img = blank(k * cell, k * cell);
  for (int r = 0; r < k; ++r) {
    const double row_total = report.confusion.row(r).sum();
    for (int c = 0; c < k; ++c) {
      const double p = row_total > 0 ? report.confusion(r, c) / row_total : 0.0;
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - p)));
      for (int x = c * cell; x < (c + 1) * cell; ++x) fill(img, x, r * cell, (r + 1) * cell, {g, g, g});
    }
  }
  return img;
}

void emit_confusion_matrix(const EvaluationReport& report, const std::filesystem::path& csv_path,
                           const std::filesystem::path& image_path, int cell) {
  io::write_file(csv_path, confusion_csv(report));
  const auto bytes = encode_ppm(render_confusion(report, cell));
  io::write_file(image_path, std::string_view(bytes.data(), bytes.size()));
}

}  // namespace egograph::pipeline

#include "egograph/flow_field.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "egograph/binary_io.hpp"
#include "egograph/errors.hpp"

namespace egograph::flow {

namespace {

constexpr float kFloMagic = 202021.25f;

void check_dims(int w, int h, const char* what) {
  if (w < 2 || h < 2)
    throw ParameterError(std::string(what) + ": dimensions must be at least 2x2, got " +
                         std::to_string(w) + "x" + std::to_string(h));
}

// Minimal PNM header tokenizer: whitespace-separated tokens, '#' comments.
class HeaderCursor {
public:
  explicit HeaderCursor(const std::vector<char>& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      out.push_back(bytes_[pos_++]);
    if (out.empty()) throw ParseError("PGM header ended early");
    return out;
  }

  int number() {
    const std::string t = token();
    int value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || value <= 0)
      throw ParseError("bad PGM header field '" + t + "'");
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw ParseError("PGM header not terminated by whitespace");
    return pos_ + 1;
  }

private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

struct Gradients {
  std::vector<double> ix, iy, it;
};

Gradients image_gradients(const Frame& a, const Frame& b) {
  const int w = a.width, h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  Gradients g{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  constexpr double scale = 255.0;
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double dxa = 0.5 * (a.at(xp, y) - a.at(xm, y));
      const double dxb = 0.5 * (b.at(xp, y) - b.at(xm, y));
      const double dya = 0.5 * (a.at(x, yp) - a.at(x, ym));
      const double dyb = 0.5 * (b.at(x, yp) - b.at(x, ym));
      g.ix[i] = scale * 0.5 * (dxa + dxb);
      g.iy[i] = scale * 0.5 * (dya + dyb);
      g.it[i] = scale * (b.intensities[i] - a.intensities[i]);
    }
  }
  return g;
}

// 4-neighbour mean with replicate-edge padding.
void neighbour_mean(const std::vector<double>& src, int w, int h, std::vector<double>& dst) {
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      dst[static_cast<std::size_t>(y) * w + x] =
          0.25 * (src[static_cast<std::size_t>(y) * w + xm] + src[static_cast<std::size_t>(y) * w + xp] +
                  src[static_cast<std::size_t>(ym) * w + x] + src[static_cast<std::size_t>(yp) * w + x]);
    }
  }
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("bad number '" + std::string(s) + "' in pattern");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Frame::Frame(int w, int h, std::vector<double> values) : width(w), height(h), intensities(std::move(values)) {
  check_dims(w, h, "Frame");
  if (intensities.size() != static_cast<std::size_t>(w) * h)
    throw ShapeError("Frame: intensity count does not match dimensions");
  for (double v : intensities)
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("Frame: intensity outside [0,1]");
}

Frame::Frame(int w, int h, double fill) : Frame(w, h, std::vector<double>(static_cast<std::size_t>(w) * h, fill)) {}

void FlowParams::validate() const {
  if (!(smoothness > 0.0)) throw ParameterError("flow smoothness must be positive");
  if (iterations < 1) throw ParameterError("flow iterations must be >= 1");
  if (!(convergence_tol > 0.0)) throw ParameterError("flow convergence tolerance must be positive");
}

Frame read_frame(const std::filesystem::path& path) {
  const std::vector<char> bytes = io::read_file(path);
  HeaderCursor cursor(bytes);
  if (cursor.token() != "P5") throw ParseError(path.string() + ": not a binary PGM (expected P5)");
  const int w = cursor.number();
  const int h = cursor.number();
  const int maxval = cursor.number();
  if (maxval > 65535) throw ParseError(path.string() + ": maxval out of range");
  const std::size_t start = cursor.raster_start();
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  const std::size_t count = static_cast<std::size_t>(w) * h;
  if (bytes.size() - start < count * sample_bytes)
    throw LengthError(path.string() + ": pixel data truncated");

  std::vector<double> values(count);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  for (std::size_t i = 0; i < count; ++i) {
    // 16-bit PGM samples are big-endian.
    const unsigned s = sample_bytes == 1 ? raw[i] : (unsigned{raw[2 * i]} << 8) | raw[2 * i + 1];
    values[i] = std::min(1.0, static_cast<double>(s) / maxval);
  }
  return Frame(w, h, std::move(values));
}

void write_frame(const Frame& frame, const std::filesystem::path& path, int maxval) {
  if (maxval != 255 && maxval != 65535) throw ParameterError("write_frame: maxval must be 255 or 65535");
  std::string out = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n" +
                    std::to_string(maxval) + "\n";
  for (double v : frame.intensities) {
    const auto s = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (maxval == 255) {
      out.push_back(static_cast<char>(s));
    } else {
      out.push_back(static_cast<char>(s >> 8));
      out.push_back(static_cast<char>(s & 0xFF));
    }
  }
  io::write_file(path, out);
}

Frame resize_frame(const Frame& frame, int target_w, int target_h) {
  check_dims(target_w, target_h, "resize_frame");
  if (frame.width == target_w && frame.height == target_h) return frame;

  const double sx = static_cast<double>(frame.width) / target_w;
  const double sy = static_cast<double>(frame.height) / target_h;
  std::vector<double> out(static_cast<std::size_t>(target_w) * target_h);
  for (int y = 0; y < target_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, frame.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, frame.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, frame.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, frame.width - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * frame.at(x0, y0) + wx * frame.at(x1, y0);
      const double bottom = (1.0 - wx) * frame.at(x0, y1) + wx * frame.at(x1, y1);
      out[static_cast<std::size_t>(y) * target_w + x] = std::clamp((1.0 - wy) * top + wy * bottom, 0.0, 1.0);
    }
  }
  return Frame(target_w, target_h, std::move(out));
}

FlowField compute_flow(const Frame& prev, const Frame& next, const FlowParams& params) {
  params.validate();
  if (prev.width != next.width || prev.height != next.height)
    throw ShapeError("compute_flow: frames differ in size (" + std::to_string(prev.width) + "x" +
                     std::to_string(prev.height) + " vs " + std::to_string(next.width) + "x" +
                     std::to_string(next.height) + ")");
  const int w = prev.width, h = prev.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const Gradients g = image_gradients(prev, next);
  const double alpha2 = params.smoothness * params.smoothness;

  std::vector<double> u(n, 0.0), v(n, 0.0), ubar(n), vbar(n);
  for (int iter = 0; iter < params.iterations; ++iter) {
    neighbour_mean(u, w, h, ubar);
    neighbour_mean(v, w, h, vbar);
    double max_change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double residual = (g.ix[i] * ubar[i] + g.iy[i] * vbar[i] + g.it[i]) /
                              (alpha2 + g.ix[i] * g.ix[i] + g.iy[i] * g.iy[i]);
      const double un = ubar[i] - g.ix[i] * residual;
      const double vn = vbar[i] - g.iy[i] * residual;
      max_change = std::max({max_change, std::abs(un - u[i]), std::abs(vn - v[i])});
      u[i] = un;
      v[i] = vn;
    }
    if (max_change < params.convergence_tol) break;
  }

  FlowField field(w, h);
  for (std::size_t i = 0; i < n; ++i)
    field.vectors[i] = {static_cast<float>(u[i]), static_cast<float>(v[i])};
  return field;
}

std::vector<char> encode_flo(const FlowField& field) {
  if (field.vectors.size() != static_cast<std::size_t>(field.width) * field.height)
    throw ShapeError("write_flo: vector count does not match dimensions");
  io::ByteWriter out;
  out.put_f32(kFloMagic);
  out.put_i32(field.width);
  out.put_i32(field.height);
  for (const FlowVector& fv : field.vectors) {
    out.put_f32(fv.u);
    out.put_f32(fv.v);
  }
  return out.bytes();
}

FlowField decode_flo(std::vector<char> bytes) {
  io::ByteReader in(std::move(bytes));
  if (in.get_f32() != kFloMagic) throw FormatError("not a .flo file (bad magic)");
  const std::int32_t w = in.get_i32();
  const std::int32_t h = in.get_i32();
  if (w < 1 || h < 1) throw FormatError(".flo file has invalid dimensions");
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (in.remaining() != count * 8)
    throw LengthError(".flo payload is " + std::to_string(in.remaining()) + " bytes, expected " +
                      std::to_string(count * 8));
  FlowField field(w, h);
  for (FlowVector& fv : field.vectors) {
    fv.u = in.get_f32();
    fv.v = in.get_f32();
  }
  return field;
}

void write_flo(const FlowField& field, const std::filesystem::path& path) {
  const auto bytes = encode_flo(field);
  io::write_file(path, std::string_view(bytes.data(), bytes.size()));
}

FlowField read_flo(const std::filesystem::path& path) {
  try {
    return decode_flo(io::read_file(path));
  } catch (const LengthError& e) {
    throw LengthError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void add_noise(FlowField& field, double sigma, std::uint64_t seed) {
  // Ziggurat sampler: the synthetic datasets draw billions of components.
  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> gauss(0.0, sigma);
  for (FlowVector& fv : field.vectors) {
    fv.u = static_cast<float>(fv.u + gauss(rng));
    fv.v = static_cast<float>(fv.v + gauss(rng));
  }
}

FlowField synth_flow(const SynthPattern& pattern, int width, int height) {
  check_dims(width, height, "synth_flow");
  FlowField field(width, height);
  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  auto fill = [&](auto&& fn) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const auto [u, v] = fn(x - cx, y - cy);
        field.at(x, y) = {static_cast<float>(u), static_cast<float>(v)};
      }
  };
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, synth::Translate>) {
          fill([&](double, double) { return std::pair{p.u, p.v}; });
        } else if constexpr (std::is_same_v<P, synth::Rotate>) {
          fill([&](double dx, double dy) { return std::pair{-p.omega * dy, p.omega * dx}; });
        } else if constexpr (std::is_same_v<P, synth::Zoom>) {
          fill([&](double dx, double dy) { return std::pair{p.scale * dx, p.scale * dy}; });
        } else {
          add_noise(field, p.sigma, p.seed);
        }
      },
      pattern);
  return field;
}

SynthPattern parse_pattern(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw ParseError("pattern needs 'name:args', got '" + std::string(spec) + "'");
  const std::string_view name = spec.substr(0, colon);
  const auto args = split(spec.substr(colon + 1), ',');
  auto want = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi)
      throw ParseError("pattern '" + std::string(name) + "' takes " + std::to_string(lo) +
                       (lo == hi ? "" : "-" + std::to_string(hi)) + " arguments");
  };
  if (name == "translate") {
    want(2, 2);
    return synth::Translate{parse_double(args[0]), parse_double(args[1])};
  }
  if (name == "rotate") {
    want(1, 1);
    return synth::Rotate{parse_double(args[0])};
  }
  if (name == "zoom") {
    want(1, 1);
    return synth::Zoom{parse_double(args[0])};
  }
  if (name == "noise") {
    want(1, 2);
    synth::Noise n{parse_double(args[0]), 0};
    if (args.size() == 2) {
      auto [ptr, ec] = std::from_chars(args[1].data(), args[1].data() + args[1].size(), n.seed);
      if (ec != std::errc() || ptr != args[1].data() + args[1].size())
        throw ParseError("bad noise seed '" + std::string(args[1]) + "'");
    }
    return n;
  }
  throw ParseError("unknown flow pattern '" + std::string(name) + "'");
}

std::string to_string(const SynthPattern& pattern) {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, synth::Translate>) os << "translate:" << p.u << "," << p.v;
        else if constexpr (std::is_same_v<P, synth::Rotate>) os << "rotate:" << p.omega;
        else if constexpr (std::is_same_v<P, synth::Zoom>) os << "zoom:" << p.scale;
        else os << "noise:" << p.sigma << "," << p.seed;
      },
      pattern);
  return os.str();
}

}  // namespace egograph::flow

#pragma once

// Dense optical flow: grayscale frame ingestion, bilinear resizing,
// Horn-Schunck estimation, Middlebury .flo I/O and synthetic flow fields.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace egograph::flow {

/// Canonical resolution every frame is resized to before flow estimation.
inline constexpr int kCanonicalWidth = 1024;
inline constexpr int kCanonicalHeight = 576;

/// Grayscale image with intensities in [0,1], row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> intensities;

  Frame() = default;
  Frame(int w, int h, std::vector<double> values);
  Frame(int w, int h, double fill);

  double at(int x, int y) const { return intensities[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return intensities[static_cast<std::size_t>(y) * width + x]; }
};

struct FlowVector {
  float u = 0.0f;  // horizontal, px/frame
  float v = 0.0f;  // vertical, px/frame

  friend bool operator==(const FlowVector&, const FlowVector&) = default;
};

/// Per-pixel displacement field between two consecutive frames, row-major.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<FlowVector> vectors;

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h), vectors(static_cast<std::size_t>(w) * h) {}

  const FlowVector& at(int x, int y) const { return vectors[static_cast<std::size_t>(y) * width + x]; }
  FlowVector& at(int x, int y) { return vectors[static_cast<std::size_t>(y) * width + x]; }
};

struct FlowParams {
  double smoothness = 10.0;  // alpha
  int iterations = 100;
  double convergence_tol = 1e-4;

  void validate() const;
};

/// Reads a binary (P5) PGM with 8- or 16-bit samples.
Frame read_frame(const std::filesystem::path& path);

/// Writes `frame` as an 8-bit (maxval 255) or 16-bit (maxval 65535) P5 PGM.
void write_frame(const Frame& frame, const std::filesystem::path& path, int maxval = 255);

/// Bilinear resampling with pixel-centre alignment; returns `frame` unchanged
/// when the size already matches.
Frame resize_frame(const Frame& frame, int target_w, int target_h);

/// Horn-Schunck flow from `prev` to `next`.
///
/// Gradients are computed on the 0-255 intensity scale with replicate-edge
/// padding and averaged over both frames; the smoothness weight enters the
/// Jacobi update as alpha^2. Iteration stops after `params.iterations` sweeps
/// or once the largest per-pixel update falls below `params.convergence_tol`.
FlowField compute_flow(const Frame& prev, const Frame& next, const FlowParams& params = {});

void write_flo(const FlowField& field, const std::filesystem::path& path);
FlowField read_flo(const std::filesystem::path& path);

/// In-memory .flo codec, used by the file variants.
std::vector<char> encode_flo(const FlowField& field);
FlowField decode_flo(std::vector<char> bytes);

namespace synth {
struct Translate {
  double u = 0.0, v = 0.0;
};
/// Rigid rotation about the image centre, omega in rad/frame.
struct Rotate {
  double omega = 0.0;
};
/// Radial expansion about the image centre.
struct Zoom {
  double scale = 0.0;
};
/// I.i.d. N(0, sigma^2) components.
struct Noise {
  double sigma = 1.0;
  std::uint64_t seed = 0;
};
}  // namespace synth

using SynthPattern = std::variant<synth::Translate, synth::Rotate, synth::Zoom, synth::Noise>;

FlowField synth_flow(const SynthPattern& pattern, int width, int height);

/// Adds i.i.d. N(0, sigma^2) noise to both components of every vector in place.
void add_noise(FlowField& field, double sigma, std::uint64_t seed);

/// Parses "translate:U,V", "rotate:W", "zoom:S" or "noise:SIGMA[,SEED]".
SynthPattern parse_pattern(std::string_view spec);
std::string to_string(const SynthPattern& pattern);

}  // namespace egograph::flow

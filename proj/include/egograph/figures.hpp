#pragma once

// Binary PPM (P6) figures: per-segment class strips and confusion heat maps.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "egograph/evaluation.hpp"

namespace egograph::pipeline {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Rgb pixel(int x, int y) const;
};

/// The 14 default class colours.
const std::vector<Rgb>& default_palette();
/// "#rrggbb" or "rrggbb".
Rgb parse_color(const std::string& text);

std::vector<char> encode_ppm(const Image& image);
Image decode_ppm(const std::vector<char>& bytes);

/// One `height`-pixel column per segment in segment order. With `truth`
/// a second strip of the same height sits below, separated by a 2-pixel
/// white gap. Negative truth entries are drawn gray.
Image render_segment_plot(std::span<const int> predicted, const std::vector<Rgb>& palette, int height = 20,
                          std::span<const int> truth = {});
void emit_segment_plot(std::span<const int> predicted, const std::filesystem::path& path,
                       const std::vector<Rgb>& palette = default_palette(), int height = 20,
                       std::span<const int> truth = {});

/// "3,1\n2,4": rows = truth, no header, no trailing newline.
std::string confusion_csv(const EvaluationReport& report);
/// cell x cell squares, gray level 255 * (1 - row-normalized count); all-zero rows stay white.
Image render_confusion(const EvaluationReport& report, int cell = 32);
void emit_confusion_matrix(const EvaluationReport& report, const std::filesystem::path& csv_path,
                           const std::filesystem::path& image_path, int cell = 32);

}  // namespace egograph::pipeline

#pragma once

// Global motion descriptor: octant histograms of flow direction over
// dx x dy x dt cuboids, one column per video segment.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "egograph/flow_field.hpp"

namespace egograph::descriptor {

inline constexpr int kBins = 8;

struct DescriptorConfig {
  int dx = 64;
  int dy = 64;
  int dt = 60;
  double fps = 30.0;
  double zero_threshold = 1e-6;

  /// Segment duration in seconds.
  double segment_seconds() const { return dt / fps; }
  int cells_x(int width) const { return width / dx; }
  int cells_y(int height) const { return height / dy; }
  std::size_t rows(int width, int height) const {
    return static_cast<std::size_t>(cells_x(width)) * cells_y(height) * kBins;
  }

  /// Throws ParameterError unless dx | width, dy | height, dt >= 1 and
  /// zero_threshold >= 0.
  void validate(int width, int height) const;
};

/// Rows are (cell_x, cell_y, bin) with cell_x outermost and bin innermost;
/// columns are segments. Entries are exact counts.
using DescriptorMatrix = Eigen::MatrixXd;

/// Octant of the direction of (u, v): floor(theta / (pi/4)) with theta the
/// atan2 angle mapped into [0, 2pi). Vectors shorter than `zero_threshold`
/// have no direction and yield nullopt. Angles exactly on an octant boundary
/// fall into the upper octant.
std::optional<int> bin_of(double u, double v, double zero_threshold = 1e-6);

/// Streams the dt fields of one segment into a histogram without holding
/// them all in memory.
class SegmentAccumulator {
public:
  SegmentAccumulator(int width, int height, const DescriptorConfig& cfg);

  void add(const flow::FlowField& field);
  int fields_added() const { return added_; }
  std::vector<double> histogram() const;

private:
  int width_, height_;
  DescriptorConfig cfg_;
  int cells_y_;
  int added_ = 0;
  std::vector<std::uint64_t> counts_;
};

std::vector<double> segment_histogram(std::span<const flow::FlowField> fields, const DescriptorConfig& cfg);

DescriptorMatrix build_descriptor_matrix(std::span<const flow::FlowField> fields, const DescriptorConfig& cfg);

/// Pull-based variant: `source(i)` produces field i for i in [0, n_fields).
/// Only one field is alive at a time.
using FieldSource = std::function<flow::FlowField(std::size_t)>;
DescriptorMatrix build_descriptor_matrix(std::size_t n_fields, const FieldSource& source,
                                         const DescriptorConfig& cfg);

}  // namespace egograph::descriptor

#include "egograph/motion_descriptor.hpp"

#include <cmath>
#include <string>

#include "egograph/errors.hpp"

namespace egograph::descriptor {

namespace {

// floor(theta / (pi/4)) for a non-zero vector, decided by exact comparisons
// rather than a rounded atan2 so octant boundaries are classified exactly.
inline int octant(double u, double v) {
  if (u == 0.0 && v == 0.0) return 0;
  if (v > 0.0 || (v == 0.0 && u > 0.0)) {
    if (u > 0.0) return v < u ? 0 : 1;
    return v > -u ? 2 : 3;
  }
  if (u < 0.0) return v > u ? 4 : 5;
  return u < -v ? 6 : 7;
}

}  // namespace

void DescriptorConfig::validate(int width, int height) const {
  if (dx < 1 || dy < 1) throw ParameterError("descriptor cell size must be positive");
  if (width % dx != 0)
    throw ParameterError("dx=" + std::to_string(dx) + " does not divide frame width " + std::to_string(width));
  if (height % dy != 0)
    throw ParameterError("dy=" + std::to_string(dy) + " does not divide frame height " + std::to_string(height));
  if (dt < 1) throw ParameterError("dt must be >= 1");
  if (!(zero_threshold >= 0.0)) throw ParameterError("zero_threshold must be >= 0");
  if (!(fps > 0.0)) throw ParameterError("fps must be positive");
}

std::optional<int> bin_of(double u, double v, double zero_threshold) {
  if (!std::isfinite(u) || !std::isfinite(v)) return std::nullopt;
  if (u * u + v * v < zero_threshold * zero_threshold) return std::nullopt;
  return octant(u, v);
}

SegmentAccumulator::SegmentAccumulator(int width, int height, const DescriptorConfig& cfg)
    : width_(width), height_(height), cfg_(cfg) {
  cfg_.validate(width, height);
  cells_y_ = cfg_.cells_y(height);
  counts_.assign(cfg_.rows(width, height), 0);
}

void SegmentAccumulator::add(const flow::FlowField& field) {
  if (field.width != width_ || field.height != height_)
    throw ShapeError("flow field is " + std::to_string(field.width) + "x" + std::to_string(field.height) +
                     ", segment expects " + std::to_string(width_) + "x" + std::to_string(height_));
  const double thr2 = cfg_.zero_threshold * cfg_.zero_threshold;
  for (int y = 0; y < height_; ++y) {
    const int cy = y / cfg_.dy;
    const flow::FlowVector* row = field.vectors.data() + static_cast<std::size_t>(y) * width_;
    for (int x = 0; x < width_; ++x) {
      const double u = row[x].u, v = row[x].v;
      if (!(u * u + v * v >= thr2)) continue;  // also drops NaN
      const int cx = x / cfg_.dx;
      ++counts_[(static_cast<std::size_t>(cx) * cells_y_ + cy) * kBins + octant(u, v)];
    }
  }
  ++added_;
}

std::vector<double> SegmentAccumulator::histogram() const { return {counts_.begin(), counts_.end()}; }

std::vector<double> segment_histogram(std::span<const flow::FlowField> fields, const DescriptorConfig& cfg) {
  if (fields.empty()) throw EmptyOutputError("segment_histogram: no flow fields");
  SegmentAccumulator acc(fields.front().width, fields.front().height, cfg);
  for (const auto& f : fields) acc.add(f);
  return acc.histogram();
}

DescriptorMatrix build_descriptor_matrix(std::span<const flow::FlowField> fields, const DescriptorConfig& cfg) {
  return build_descriptor_matrix(fields.size(), [&](std::size_t i) { return fields[i]; }, cfg);
}

DescriptorMatrix build_descriptor_matrix(std::size_t n_fields, const FieldSource& source,
                                         const DescriptorConfig& cfg) {
  if (cfg.dt < 1) throw ParameterError("dt must be >= 1");
  if (n_fields < static_cast<std::size_t>(cfg.dt))
    throw EmptyOutputError("only " + std::to_string(n_fields) + " flow fields for dt=" + std::to_string(cfg.dt) +
                           ": no complete segment");
  const std::size_t segments = n_fields / cfg.dt;
  DescriptorMatrix X;
  for (std::size_t s = 0; s < segments; ++s) {
    std::optional<SegmentAccumulator> acc;
    for (int k = 0; k < cfg.dt; ++k) {
      const flow::FlowField field = source(s * cfg.dt + k);
      if (!acc) {
        acc.emplace(field.width, field.height, cfg);
        if (s == 0) X = DescriptorMatrix::Zero(static_cast<Eigen::Index>(cfg.rows(field.width, field.height)),
                                               static_cast<Eigen::Index>(segments));
        else if (static_cast<std::size_t>(X.rows()) != cfg.rows(field.width, field.height))
          throw ShapeError("flow field " + std::to_string(s * cfg.dt) + " changes frame size mid-sequence");
      }
      acc->add(field);
    }
    const auto hist = acc->histogram();
    X.col(static_cast<Eigen::Index>(s)) = Eigen::Map<const Eigen::VectorXd>(hist.data(), X.rows());
  }
  return X;
}

}  // namespace egograph::descriptor

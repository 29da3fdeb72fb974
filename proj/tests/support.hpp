#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Core>

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("egograph-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = 0.0,
                                      double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (auto& x : m.reshaped()) x = d(rng);
  return m;
}

/// dim x n Gaussian mixture; node i belongs to component i % clusters.
/// Centres are N(0, spread^2), points add unit noise.
inline Eigen::MatrixXd gaussian_mixture(int n, int dim, int clusters, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd centres(dim, clusters);
  for (auto& x : centres.reshaped()) x = spread * g(rng);
  Eigen::MatrixXd f(dim, n);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) f(d, i) = centres(d, i % clusters) + g(rng);
  return f;
}

}  // namespace testing_support

#pragma once

// "GMD1" dense matrix files: magic, u32 rows, u32 cols, then column-major
// little-endian doubles. Used for descriptors, NMF factors and features.

#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace egograph::io {

std::vector<char> encode_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd decode_matrix(std::vector<char> bytes);

void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

/// One matrix row per line, comma separated, shortest round-trip formatting.
void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path);

}  // namespace egograph::io

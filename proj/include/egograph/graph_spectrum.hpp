#pragma once

// Similarity graph over segment features and the leading eigenpairs of its
// symmetric normalized Laplacian L_s = I - D^{-1/2} W D^{-1/2}.
//
// Edge weights are w_ij = exp(-||h_i - h_j||^2 / tau_ij) with either a global
// tau_ij = tau or self-tuning tau_ij = tau_i * tau_j, tau_i being the distance
// from node i to its K-th nearest neighbour. Self-loops (w_ii = 1) are part
// of every node strength.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace egograph::graph {

/// dim x n matrix; column i is the feature vector of node i.
using FeatureSet = Eigen::MatrixXd;

/// Where local-scaling neighbours are searched for in the Nystrom path.
enum class KnnReference {
  Sampled,  // only the landmark set A (linear cost in n)
  Full,     // every node (quadratic time, linear memory)
};

struct ScaleParams {
  enum class Mode { Global, Local };
  Mode mode = Mode::Local;
  double tau = 1.0;
  int knn = 10;
  KnnReference reference = KnnReference::Sampled;

  static ScaleParams global(double tau) { return {Mode::Global, tau, 0, KnnReference::Sampled}; }
  static ScaleParams local(int k, KnnReference ref = KnnReference::Sampled) { return {Mode::Local, 1.0, k, ref}; }
};

/// Leading eigenpairs of L_s, eigenvalues ascending.
struct Spectrum {
  Eigen::MatrixXd vectors;      // n x n_eig
  Eigen::VectorXd eigenvalues;  // n_eig
  int n_sample = 0;
  std::vector<Eigen::Index> sample_indices;

  Eigen::Index nodes() const { return vectors.rows(); }
  Eigen::Index size() const { return eigenvalues.size(); }
};

struct NystromOptions {
  int n_sample = 1000;
  int n_eig = 500;
  ScaleParams scales = {};
  std::uint64_t seed = 0;
  /// Use d_A = W_AA 1 for landmark strengths instead of W_AA 1 + W_AB 1.
  bool landmark_only_da = false;
};

/// Lower floor for local scales when a node has duplicates.
inline constexpr double kMinScale = 1e-12;
/// Eigenvalues of W_AA below this are treated as zero when forming
/// W_AA^{-1}, W_AA^{-1/2}.
inline constexpr double kEigenFloor = 1e-10;
/// dense_spectrum refuses graphs with more nodes than this.
inline constexpr Eigen::Index kDenseLimit = 5000;

double weight(const Eigen::Ref<const Eigen::VectorXd>& hi, const Eigen::Ref<const Eigen::VectorXd>& hj, double tau_ij);

/// tau_i for every node: distance to the K-th nearest neighbour among
/// `reference` (the node itself excluded), floored at kMinScale.
Eigen::VectorXd local_scales(const FeatureSet& features, int k, std::span<const Eigen::Index> reference);

/// Per-node scales for `params` with every node as reference (global mode
/// returns sqrt(tau) so that tau_i * tau_j = tau).
Eigen::VectorXd node_scales(const FeatureSet& features, const ScaleParams& params);

/// Full n x n weight matrix; test oracle and small-graph helper.
Eigen::MatrixXd dense_weights(const FeatureSet& features, const ScaleParams& params);

/// Full symmetric Laplacian built from dense_weights.
Eigen::MatrixXd dense_laplacian(const FeatureSet& features, const ScaleParams& params);

/// Exact eigenpairs of the dense Laplacian (local scaling uses full KNN).
Spectrum dense_spectrum(const FeatureSet& features, const ScaleParams& params, int n_eig);

/// Nystrom approximation from a uniform landmark sample. Never forms an
/// n x n matrix; memory is O(n * max(n_sample, n_eig)).
Spectrum nystrom_spectrum(const FeatureSet& features, const NystromOptions& options);

/// "SPC1" files: magic, u32 n, u32 n_eig, eigenvalues, then the eigenvector
/// matrix column-major, all little-endian doubles. Sampling metadata is not
/// persisted.
std::vector<char> encode_spectrum(const Spectrum& spectrum);
Spectrum decode_spectrum(std::vector<char> bytes);
void write_spectrum(const Spectrum& spectrum, const std::filesystem::path& path);
Spectrum read_spectrum(const std::filesystem::path& path);

}  // namespace egograph::graph

#pragma once

// Semi-supervised multiclass labeling with the graph MBO scheme: diffusion
// with fidelity forcing, solved semi-implicitly in a truncated Laplacian
// eigenbasis, alternated with thresholding onto the simplex corners.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egograph/graph_spectrum.hpp"

namespace egograph::mbo {

inline constexpr int kNoLabel = -1;

/// Fidelity (labelled) nodes. labels[i] is the class of node i when it is a
/// fidelity node and kNoLabel otherwise.
struct LabelData {
  int classes = 0;
  std::vector<int> labels;

  LabelData() = default;
  LabelData(int c, std::vector<int> fidelity_labels);

  Eigen::Index nodes() const { return static_cast<Eigen::Index>(labels.size()); }
  bool is_fidelity(Eigen::Index i) const { return labels[static_cast<std::size_t>(i)] != kNoLabel; }
  std::size_t fidelity_count() const;
  /// n x c matrix f with one-hot rows on fidelity nodes, zero elsewhere.
  Eigen::MatrixXd one_hot() const;
  /// Restriction to nodes [begin, begin + count).
  LabelData slice(Eigen::Index begin, Eigen::Index count) const;
};

struct MboParams {
  double eta = 300.0;
  double dt = 0.1;  // outer MBO step
  int n_step = 10;  // inner semi-implicit steps per diffusion
  int max_iter = 300;
  std::uint64_t seed = 0;

  double inner_dt() const { return dt / (2.0 * n_step); }
  void validate() const;
};

/// n x c label matrix. Thresholded rows are standard basis vectors.
using Assignment = Eigen::MatrixXd;

struct MboResult {
  Assignment assignment;
  int iterations = 0;
  bool converged = false;
  /// Labels that changed in each outer iteration.
  std::vector<int> changed_per_iteration;

  std::vector<int> labels() const;
};

/// Per class, picks max(1, round(fraction * count)) members uniformly
/// without replacement. Classes are drawn in index order from one stream.
LabelData sample_fidelity(std::span<const int> truth, int classes, double fraction, std::uint64_t seed);

/// Fidelity rows take their label, every other row a uniformly random corner.
Assignment initialize(const LabelData& labels, Eigen::Index n, std::uint64_t seed);

/// N_step semi-implicit steps of du/dt = -L_s u - eta M (u - f) in the
/// eigenbasis; returns the pre-threshold state.
Eigen::MatrixXd diffuse(const Eigen::MatrixXd& u, const graph::Spectrum& spectrum, const LabelData& labels,
                        const MboParams& params);

/// Row-wise argmax onto e_l; ties go to the lowest class index.
Assignment threshold(const Eigen::MatrixXd& u);

/// Alternates diffuse/threshold from initialize() until no label changes or
/// max_iter is reached. A run that hits max_iter returns its last iterate
/// with converged == false.
MboResult mbo_classify(const graph::Spectrum& spectrum, const LabelData& labels, const MboParams& params);

/// 1/2 trace(u^T L_s u) + eta/2 ||M(u - f)||^2 with the Dirichlet term taken
/// spectrally as 1/2 sum_j lambda_j ||(Phi^T u)_j||^2.
double energy(const Eigen::MatrixXd& u, const graph::Spectrum& spectrum, const LabelData& labels, double eta);

struct BatchedResult {
  Assignment assignment;
  std::vector<MboResult> batches;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;  // [begin, size)
  std::vector<std::string> warnings;

  std::vector<int> labels() const;
};

/// Contiguous batches of at most `batch_size` nodes; sizes [n/b] * b then
/// the remainder.
std::vector<std::pair<Eigen::Index, Eigen::Index>> batch_ranges(Eigen::Index n, Eigen::Index batch_size);

/// Spectrum options for batch `batch` of `size` nodes: n_sample and n_eig
/// clamped to the batch, seed offset by the batch index.
graph::NystromOptions batch_spectrum_options(const graph::NystromOptions& base, std::size_t batch, Eigen::Index size);
MboParams batch_mbo_params(const MboParams& base, std::size_t batch);

/// One warning per (batch, class) pair with no fidelity node.
std::vector<std::string> batch_warnings(const LabelData& labels,
                                        const std::vector<std::pair<Eigen::Index, Eigen::Index>>& ranges);

/// mbo_classify for one batch; a batch without any fidelity node is allowed
/// (its labels then carry no supervision).
MboResult classify_batch(const graph::Spectrum& spectrum, const LabelData& batch_labels, const MboParams& params);

/// Spectrum + MBO on each contiguous batch independently, concatenated in
/// node order. n_sample and n_eig are clamped to a short final batch.
/// Batch b uses seeds offset by b; a single batch reproduces the unbatched run.
BatchedResult classify_batched(const graph::FeatureSet& features, const LabelData& labels, Eigen::Index batch_size,
                               const graph::NystromOptions& spectrum_options, const MboParams& params);

}  // namespace egograph::mbo

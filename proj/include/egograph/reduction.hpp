#pragma once

// Dimension reduction of descriptor matrices: NMF, fixed-basis projection
// by non-negative least squares, and temporal moving-average smoothing.

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace egograph::reduction {

struct NmfOptions {
  int rank = 50;
  int max_iters = 500;
  /// Stop once |f_prev - f| / f_prev drops below this.
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct NmfFactors {
  Eigen::MatrixXd basis;         // V, m x rank
  Eigen::MatrixXd coefficients;  // H, rank x n; columns are segment features
  double final_objective = 0.0;  // ||X - VH||_F^2
  /// Objective of the initial guess followed by one entry per iteration.
  std::vector<double> objective_history;
  int iterations = 0;
};

/// Denominator guard in the multiplicative updates.
inline constexpr double kNmfEpsilon = 1e-12;

/// Seeded uniform (0,1] starting factors: V is filled column-major first,
/// then H, from one mt19937_64 stream.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> nmf_initial_factors(Eigen::Index m, Eigen::Index n, int rank,
                                                                std::uint64_t seed);

/// Lee-Seung multiplicative updates for min ||X - VH||_F^2 s.t. V, H >= 0.
/// Each iteration updates H, then V. Deterministic for a fixed seed.
NmfFactors nmf(const Eigen::MatrixXd& X, const NmfOptions& options = {});

/// Lawson-Hanson active-set solution of min_{h >= 0} ||b - A h||_2.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

/// Largest violation of the NNLS optimality conditions at `x`: negativity of
/// x, non-zero gradient on the support, positive gradient off it.
double nnls_kkt_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x);

/// Column-wise NNLS projection of new data onto a fixed basis V.
Eigen::MatrixXd project_nnls(const Eigen::MatrixXd& X_new, const Eigen::MatrixXd& V);

/// Centred moving average along each row. `window` must be odd; the window
/// shrinks at both ends to the entries that exist.
Eigen::MatrixXd smooth(const Eigen::MatrixXd& H, int window);

}  // namespace egograph::reduction

#include "egograph/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "egograph/errors.hpp"

namespace egograph::reduction {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::pair<MatrixXd, MatrixXd> nmf_initial_factors(Index m, Index n, int rank, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] { return 1.0 - unit(rng); };  // (0,1]
  MatrixXd V(m, rank), H(rank, n);
  for (Index c = 0; c < V.cols(); ++c)
    for (Index r = 0; r < V.rows(); ++r) V(r, c) = draw();
  for (Index c = 0; c < H.cols(); ++c)
    for (Index r = 0; r < H.rows(); ++r) H(r, c) = draw();
  return {std::move(V), std::move(H)};
}

NmfFactors nmf(const MatrixXd& X, const NmfOptions& options) {
  if (options.rank < 1 || options.rank > std::min(X.rows(), X.cols()))
    throw ParameterError("NMF rank " + std::to_string(options.rank) + " outside [1, min(m,n)=" +
                         std::to_string(std::min(X.rows(), X.cols())) + "]");
  if (options.max_iters < 0) throw ParameterError("NMF max_iters must be >= 0");
  if ((X.array() < 0.0).any()) throw DomainError("NMF input has a negative entry");
  if (!X.allFinite()) throw DomainError("NMF input has a non-finite entry");

  auto [V, H] = nmf_initial_factors(X.rows(), X.cols(), options.rank, options.seed);
  NmfFactors out;
  double objective = (X - V * H).squaredNorm();
  out.objective_history.push_back(objective);
  // Below this the fit is exact to rounding and further updates only add noise.
  const double exact_fit = 1e-26 * X.squaredNorm();

  for (int iter = 0; iter < options.max_iters && objective > exact_fit; ++iter) {
    H.array() *= (V.transpose() * X).array() / (((V.transpose() * V) * H).array() + kNmfEpsilon);
    V.array() *= (X * H.transpose()).array() / ((V * (H * H.transpose())).array() + kNmfEpsilon);
    const double next = (X - V * H).squaredNorm();
    out.objective_history.push_back(next);
    ++out.iterations;
    const double change = std::abs(objective - next) / std::max(objective, std::numeric_limits<double>::min());
    objective = next;
    if (change < options.tol) break;
  }
  out.basis = std::move(V);
  out.coefficients = std::move(H);
  out.final_objective = objective;
  return out;
}

VectorXd nnls(const MatrixXd& A, const VectorXd& b) {
  if (A.rows() != b.size())
    throw ShapeError("nnls: A has " + std::to_string(A.rows()) + " rows but b has " + std::to_string(b.size()));
  const Index n = A.cols();
  VectorXd x = VectorXd::Zero(n);
  if (n == 0) return x;
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(A.rows(), n));

  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  VectorXd w = A.transpose() * (b - A * x);
  const int max_outer = static_cast<int>(3 * n) + 10;

  auto solve_passive = [&](VectorXd& z) {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    MatrixXd Ap(A.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Index>(k)) = A.col(idx[k]);
    const VectorXd zp = Ap.completeOrthogonalDecomposition().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Index>(k));
  };

  for (int outer = 0; outer < max_outer; ++outer) {
    Index best = -1;
    double best_w = tol;
    for (Index j = 0; j < n; ++j)
      if (!passive[j] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[best] = true;

    VectorXd z;
    for (int inner = 0; inner < max_outer; ++inner) {
      solve_passive(z);
      bool feasible = true;
      for (Index j = 0; j < n; ++j)
        if (passive[j] && z(j) <= 0.0) feasible = false;
      if (feasible) break;
      double alpha = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < n; ++j)
        if (passive[j] && z(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - z(j)));
      x += alpha * (z - x);
      for (Index j = 0; j < n; ++j)
        if (passive[j] && x(j) <= tol) {
          passive[j] = false;
          x(j) = 0.0;
        }
    }
    x = z;
    w = A.transpose() * (b - A * x);
  }
  return x;
}

double nnls_kkt_residual(const MatrixXd& A, const VectorXd& b, const VectorXd& x) {
  const VectorXd grad = A.transpose() * (b - A * x);  // negative gradient of 1/2||b-Ax||^2
  double r = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    r = std::max(r, std::max(0.0, -x(j)));
    r = std::max(r, x(j) > 0.0 ? std::abs(grad(j)) : std::max(0.0, grad(j)));
  }
  return r;
}

MatrixXd project_nnls(const MatrixXd& X_new, const MatrixXd& V) {
  if (X_new.rows() != V.rows())
    throw ShapeError("project_nnls: data has " + std::to_string(X_new.rows()) + " rows, basis has " +
                     std::to_string(V.rows()));
  MatrixXd H(V.cols(), X_new.cols());
  for (Index c = 0; c < X_new.cols(); ++c) H.col(c) = nnls(V, X_new.col(c));
  return H;
}

MatrixXd smooth(const MatrixXd& H, int window) {
  if (window < 1 || window % 2 == 0) throw ParameterError("smoothing window must be a positive odd integer");
  const Index n = H.cols();
  if (n < 1) throw ShapeError("smooth: matrix has no columns");
  const Index half = window / 2;
  MatrixXd out(H.rows(), n);
  for (Index j = 0; j < n; ++j) {
    const Index lo = std::max<Index>(0, j - half);
    const Index hi = std::min<Index>(n - 1, j + half);
    // Offsets from the centre entry keep constant rows exactly constant.
    const auto block = H.middleCols(lo, hi - lo + 1);
    out.col(j) = H.col(j) + (block.colwise() - H.col(j)).rowwise().sum() / static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace egograph::reduction

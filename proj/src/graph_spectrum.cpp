#include "egograph/graph_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "egograph/binary_io.hpp"
#include "egograph/errors.hpp"

namespace egograph::graph {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::string_view kSpectrumMagic = "SPC1";

void check_features(const FeatureSet& features) {
  if (features.cols() < 2) throw ShapeError("graph needs at least 2 nodes, got " + std::to_string(features.cols()));
  if (!features.allFinite()) throw DomainError("feature set has non-finite entries");
}

double squared_distance(const FeatureSet& f, Index i, Index j) { return (f.col(i) - f.col(j)).squaredNorm(); }

// Kernel bandwidth lookup shared by the dense and Nystrom paths.
class Bandwidth {
public:
  Bandwidth(const ScaleParams& params, VectorXd scales) : params_(params), scales_(std::move(scales)) {}

  double operator()(Index i, Index j) const {
    return params_.mode == ScaleParams::Mode::Global ? params_.tau : scales_(i) * scales_(j);
  }

private:
  ScaleParams params_;
  VectorXd scales_;
};

void check_scale_params(const ScaleParams& params) {
  if (params.mode == ScaleParams::Mode::Global) {
    if (!(params.tau > 0.0)) throw ParameterError("global tau must be positive");
  } else if (params.knn < 1) {
    throw ParameterError("local scaling needs K >= 1");
  }
}

std::vector<Index> all_nodes(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  return idx;
}

struct SymmetricPowers {
  MatrixXd inv_sqrt;
  MatrixXd sqrt;
  Index rank = 0;
};

SymmetricPowers symmetric_powers(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw ConditioningError("eigendecomposition of W_AA failed");
  const VectorXd& g = eig.eigenvalues();
  VectorXd inv_sqrt(g.size()), sqrt(g.size());
  Index rank = 0;
  for (Index k = 0; k < g.size(); ++k) {
    const bool kept = g(k) > kEigenFloor;
    rank += kept;
    inv_sqrt(k) = kept ? 1.0 / std::sqrt(g(k)) : 0.0;
    sqrt(k) = std::sqrt(std::max(g(k), 0.0));
  }
  const MatrixXd& q = eig.eigenvectors();
  return {q * inv_sqrt.asDiagonal() * q.transpose(), q * sqrt.asDiagonal() * q.transpose(), rank};
}

MatrixXd pseudo_inverse(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw ConditioningError("eigendecomposition of W_AA failed");
  VectorXd inv = eig.eigenvalues().unaryExpr([](double g) { return g > kEigenFloor ? 1.0 / g : 0.0; });
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double weight(const Eigen::Ref<const VectorXd>& hi, const Eigen::Ref<const VectorXd>& hj, double tau_ij) {
  if (!(tau_ij > 0.0)) throw ParameterError("tau_ij must be positive");
  return std::exp(-(hi - hj).squaredNorm() / tau_ij);
}

VectorXd local_scales(const FeatureSet& features, int k, std::span<const Index> reference) {
  check_features(features);
  if (k < 1 || static_cast<std::size_t>(k) >= reference.size())
    throw ParameterError("local scaling K=" + std::to_string(k) + " must lie in [1, " +
                         std::to_string(reference.size()) + ") for a reference set of that size");
  const Index n = features.cols();
  VectorXd tau(n);
  std::vector<double> d2;
  d2.reserve(reference.size());
  for (Index i = 0; i < n; ++i) {
    d2.clear();
    for (Index r : reference)
      if (r != i) d2.push_back(squared_distance(features, i, r));
    std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
    tau(i) = std::max(std::sqrt(d2[static_cast<std::size_t>(k - 1)]), kMinScale);
  }
  return tau;
}

VectorXd node_scales(const FeatureSet& features, const ScaleParams& params) {
  check_scale_params(params);
  if (params.mode == ScaleParams::Mode::Global) return VectorXd::Constant(features.cols(), std::sqrt(params.tau));
  const auto all = all_nodes(features.cols());
  return local_scales(features, params.knn, all);
}

MatrixXd dense_weights(const FeatureSet& features, const ScaleParams& params) {
  check_features(features);
  const Index n = features.cols();
  if (n > kDenseLimit)
    throw SizeError("dense graph limited to " + std::to_string(kDenseLimit) + " nodes, got " + std::to_string(n));
  const Bandwidth tau(params, node_scales(features, params));
  MatrixXd W(n, n);
  for (Index i = 0; i < n; ++i) {
    W(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) W(i, j) = W(j, i) = std::exp(-squared_distance(features, i, j) / tau(i, j));
  }
  return W;
}

MatrixXd dense_laplacian(const FeatureSet& features, const ScaleParams& params) {
  const MatrixXd W = dense_weights(features, params);
  const VectorXd inv_sqrt_d = W.rowwise().sum().cwiseSqrt().cwiseInverse();
  MatrixXd L = -(inv_sqrt_d.asDiagonal() * W * inv_sqrt_d.asDiagonal());
  L.diagonal().array() += 1.0;
  return L;
}

Spectrum dense_spectrum(const FeatureSet& features, const ScaleParams& params, int n_eig) {
  check_features(features);
  if (n_eig < 1 || n_eig > features.cols())
    throw ParameterError("n_eig=" + std::to_string(n_eig) + " outside [1, n]");
  const MatrixXd L = dense_laplacian(features, params);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(L);
  if (eig.info() != Eigen::Success) throw ConditioningError("dense eigendecomposition failed");
  Spectrum out;
  out.eigenvalues = eig.eigenvalues().head(n_eig);
  out.vectors = eig.eigenvectors().leftCols(n_eig);
  out.n_sample = static_cast<int>(features.cols());
  out.sample_indices = all_nodes(features.cols());
  return out;
}

Spectrum nystrom_spectrum(const FeatureSet& features, const NystromOptions& options) {
  check_features(features);
  check_scale_params(options.scales);
  const Index n = features.cols();
  const Index s = options.n_sample;
  if (options.n_eig < 1 || options.n_eig > s || s > n)
    throw ParameterError("need 1 <= n_eig <= n_sample <= n, got n_eig=" + std::to_string(options.n_eig) +
                         ", n_sample=" + std::to_string(s) + ", n=" + std::to_string(n));

  // Uniform landmark sample A (partial Fisher-Yates), complement B.
  std::vector<Index> order = all_nodes(n);
  std::mt19937_64 rng(options.seed);
  for (Index i = 0; i < s; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<Index> a(order.begin(), order.begin() + s), b(order.begin() + s, order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const Index m = n - s;

  VectorXd scales;
  if (options.scales.mode == ScaleParams::Mode::Local) {
    if (options.scales.reference == KnnReference::Sampled) {
      scales = local_scales(features, options.scales.knn, a);
    } else {
      const auto all = all_nodes(n);
      scales = local_scales(features, options.scales.knn, all);
    }
  }
  const Bandwidth tau(options.scales, std::move(scales));

  MatrixXd w_aa(s, s), w_ab(s, m);
  for (Index i = 0; i < s; ++i) {
    w_aa(i, i) = 1.0;
    for (Index j = i + 1; j < s; ++j)
      w_aa(i, j) = w_aa(j, i) = std::exp(-squared_distance(features, a[i], a[j]) / tau(a[i], a[j]));
  }
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < s; ++i)
      w_ab(i, j) = std::exp(-squared_distance(features, a[i], b[j]) / tau(a[i], b[j]));

  // Node strengths; B strengths use W_BB ~ W_BA W_AA^{-1} W_AB.
  const VectorXd ab_row_sums = w_ab.rowwise().sum();
  VectorXd d_a = w_aa.rowwise().sum();
  if (!options.landmark_only_da) d_a += ab_row_sums;
  VectorXd d_b = w_ab.colwise().sum().transpose();
  if (m > 0) d_b += w_ab.transpose() * (pseudo_inverse(w_aa) * ab_row_sums);
  if (!(d_a.array() > 0.0).all() || !(d_b.array() > 0.0).all() || !d_a.allFinite() || !d_b.allFinite())
    throw ApproximationError("Nystrom strength estimate is not positive; increase n_sample");

  const VectorXd inv_sqrt_da = d_a.cwiseSqrt().cwiseInverse();
  const VectorXd inv_sqrt_db = d_b.cwiseSqrt().cwiseInverse();
  const MatrixXd a_hat = inv_sqrt_da.asDiagonal() * w_aa * inv_sqrt_da.asDiagonal();
  const MatrixXd b_hat = inv_sqrt_da.asDiagonal() * w_ab * inv_sqrt_db.asDiagonal();
  w_ab.resize(0, 0);

  const SymmetricPowers powers = symmetric_powers(a_hat);
  if (powers.rank < options.n_eig)
    throw ConditioningError("W_AA has numerical rank " + std::to_string(powers.rank) + " < n_eig=" +
                            std::to_string(options.n_eig));
  const MatrixXd r = powers.inv_sqrt * b_hat;  // s x m
  MatrixXd system = a_hat;
  if (m > 0) system.noalias() += r * r.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(system);
  if (eig.info() != Eigen::Success) throw ConditioningError("Nystrom eigendecomposition failed");

  // Largest xi first, i.e. smallest Laplacian eigenvalues first.
  const Index k = options.n_eig;
  VectorXd xi(k);
  MatrixXd psi(s, k);
  for (Index j = 0; j < k; ++j) {
    xi(j) = eig.eigenvalues()(s - 1 - j);
    psi.col(j) = eig.eigenvectors().col(s - 1 - j);
  }
  if (xi(k - 1) <= kEigenFloor)
    throw ConditioningError("Nystrom eigenvalue " + std::to_string(xi(k - 1)) + " is not positive; reduce n_eig");
  const MatrixXd scaled_psi = psi * xi.cwiseSqrt().cwiseInverse().asDiagonal();

  Spectrum out;
  out.vectors.resize(n, k);
  const MatrixXd phi_a = powers.sqrt * scaled_psi;
  for (Index i = 0; i < s; ++i) out.vectors.row(a[i]) = phi_a.row(i);
  if (m > 0) {
    const MatrixXd phi_b = r.transpose() * scaled_psi;
    for (Index j = 0; j < m; ++j) out.vectors.row(b[j]) = phi_b.row(j);
  }
  out.eigenvalues = VectorXd::Ones(k) - xi;
  out.n_sample = static_cast<int>(s);
  out.sample_indices = std::move(a);
  return out;
}

std::vector<char> encode_spectrum(const Spectrum& spectrum) {
  if (spectrum.vectors.cols() != spectrum.eigenvalues.size())
    throw ShapeError("spectrum has mismatched eigenvector/eigenvalue counts");
  io::ByteWriter out;
  out.put_bytes(kSpectrumMagic);
  out.put_u32(static_cast<std::uint32_t>(spectrum.vectors.rows()));
  out.put_u32(static_cast<std::uint32_t>(spectrum.vectors.cols()));
  for (Index j = 0; j < spectrum.eigenvalues.size(); ++j) out.put_f64(spectrum.eigenvalues(j));
  for (Index c = 0; c < spectrum.vectors.cols(); ++c)
    for (Index r = 0; r < spectrum.vectors.rows(); ++r) out.put_f64(spectrum.vectors(r, c));
  return out.bytes();
}

Spectrum decode_spectrum(std::vector<char> bytes) {
  io::ByteReader in(std::move(bytes));
  if (in.remaining() < 4 || in.get_bytes(4) != kSpectrumMagic) throw FormatError("not an SPC1 spectrum (bad magic)");
  const std::uint32_t n = in.get_u32();
  const std::uint32_t k = in.get_u32();
  const std::size_t expected = (static_cast<std::size_t>(k) + static_cast<std::size_t>(n) * k) * 8;
  if (in.remaining() != expected)
    throw LengthError("SPC1 payload is " + std::to_string(in.remaining()) + " bytes, expected " +
                      std::to_string(expected));
  Spectrum out;
  out.eigenvalues.resize(k);
  for (Index j = 0; j < k; ++j) out.eigenvalues(j) = in.get_f64();
  out.vectors.resize(n, k);
  for (Index c = 0; c < out.vectors.cols(); ++c)
    for (Index r = 0; r < out.vectors.rows(); ++r) out.vectors(r, c) = in.get_f64();
  return out;
}

void write_spectrum(const Spectrum& spectrum, const std::filesystem::path& path) {
  const auto bytes = encode_spectrum(spectrum);
  io::write_file(path, std::string_view(bytes.data(), bytes.size()));
}

Spectrum read_spectrum(const std::filesystem::path& path) {
  try {
    return decode_spectrum(io::read_file(path));
  } catch (const LengthError& e) {
    throw LengthError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace egograph::graph

#include "egograph/mbo_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "egograph/errors.hpp"

namespace egograph::mbo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<int> row_argmax(const MatrixXd& u) {
  std::vector<int> out(static_cast<std::size_t>(u.rows()));
  for (Index i = 0; i < u.rows(); ++i) {
    Index best = 0;
    for (Index l = 1; l < u.cols(); ++l)
      if (u(i, l) > u(i, best)) best = l;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

MboResult run_mbo(const graph::Spectrum& spectrum, const LabelData& labels, const MboParams& params) {
  params.validate();
  const Index n = spectrum.nodes();
  if (labels.nodes() != n)
    throw ShapeError("label data covers " + std::to_string(labels.nodes()) + " nodes, spectrum " + std::to_string(n));

  MboResult result;
  Assignment u = initialize(labels, n, params.seed);
  std::vector<int> current = row_argmax(u);
  for (int k = 0; k < params.max_iter; ++k) {
    u = threshold(diffuse(u, spectrum, labels, params));
    std::vector<int> next = row_argmax(u);
    int changed = 0;
    for (std::size_t i = 0; i < next.size(); ++i) changed += next[i] != current[i];
    current = std::move(next);
    result.changed_per_iteration.push_back(changed);
    ++result.iterations;
    if (changed == 0) {
      result.converged = true;
      break;
    }
  }
  result.assignment = std::move(u);
  return result;
}

}  // namespace

LabelData::LabelData(int c, std::vector<int> fidelity_labels) : classes(c), labels(std::move(fidelity_labels)) {
  if (classes < 1) throw ParameterError("need at least one class");
  for (int l : labels)
    if (l != kNoLabel && (l < 0 || l >= classes))
      throw ParameterError("fidelity label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
}

std::size_t LabelData::fidelity_count() const {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != kNoLabel; }));
}

MatrixXd LabelData::one_hot() const {
  MatrixXd f = MatrixXd::Zero(nodes(), classes);
  for (Index i = 0; i < nodes(); ++i)
    if (is_fidelity(i)) f(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  return f;
}

LabelData LabelData::slice(Index begin, Index count) const {
  return LabelData(classes, std::vector<int>(labels.begin() + begin, labels.begin() + begin + count));
}

void MboParams::validate() const {
  if (!(eta >= 0.0)) throw ParameterError("eta must be >= 0");
  if (!(dt > 0.0)) throw ParameterError("MBO dt must be positive");
  if (n_step < 1) throw ParameterError("n_step must be >= 1");
  if (max_iter < 1) throw ParameterError("max_iter must be >= 1");
}

std::vector<int> MboResult::labels() const { return row_argmax(assignment); }
std::vector<int> BatchedResult::labels() const { return row_argmax(assignment); }

LabelData sample_fidelity(std::span<const int> truth, int classes, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("fidelity fraction must lie in (0, 1]");
  if (classes < 1) throw ParameterError("need at least one class");
  std::vector<std::vector<int>> members(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    if (t == kNoLabel) continue;
    if (t < 0 || t >= classes) throw ParameterError("truth label " + std::to_string(t) + " outside class range");
    members[static_cast<std::size_t>(t)].push_back(static_cast<int>(i));
  }
  std::vector<int> labels(truth.size(), kNoLabel);
  std::mt19937_64 rng(seed);
  for (int k = 0; k < classes; ++k) {
    auto& pool = members[static_cast<std::size_t>(k)];
    if (pool.empty()) throw SamplingError("class " + std::to_string(k) + " has no members to sample fidelity from");
    const auto count = static_cast<std::ptrdiff_t>(pool.size());
    const auto take = std::clamp<std::ptrdiff_t>(std::llround(fraction * static_cast<double>(count)), 1, count);
    for (std::ptrdiff_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::ptrdiff_t> pick(i, count - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      labels[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])] = k;
    }
  }
  return LabelData(classes, std::move(labels));
}

Assignment initialize(const LabelData& labels, Index n, std::uint64_t seed) {
  if (labels.nodes() != n) throw ShapeError("label data does not cover all nodes");
  Assignment u = Assignment::Zero(n, labels.classes);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> corner(0, labels.classes - 1);
  for (Index i = 0; i < n; ++i) u(i, labels.is_fidelity(i) ? labels.labels[static_cast<std::size_t>(i)] : corner(rng)) = 1.0;
  return u;
}

MatrixXd diffuse(const MatrixXd& u, const graph::Spectrum& spectrum, const LabelData& labels, const MboParams& params) {
  params.validate();
  const Index n = spectrum.nodes();
  if (u.rows() != n || labels.nodes() != n || u.cols() != labels.classes)
    throw ShapeError("diffuse: u is " + std::to_string(u.rows()) + "x" + std::to_string(u.cols()) + ", spectrum has " +
                     std::to_string(n) + " nodes, labels " + std::to_string(labels.nodes()) + "x" +
                     std::to_string(labels.classes));
  const MatrixXd& phi = spectrum.vectors;
  const double step = params.inner_dt();
  const VectorXd inv_denominator = (1.0 + step * spectrum.eigenvalues.array()).inverse().matrix();

  // Forcing only touches fidelity rows.
  std::vector<Index> fid;
  for (Index i = 0; i < n; ++i)
    if (labels.is_fidelity(i)) fid.push_back(i);
  MatrixXd phi_f(static_cast<Index>(fid.size()), phi.cols());
  MatrixXd f_f = MatrixXd::Zero(static_cast<Index>(fid.size()), labels.classes);
  for (std::size_t r = 0; r < fid.size(); ++r) {
    phi_f.row(static_cast<Index>(r)) = phi.row(fid[r]);
    f_f(static_cast<Index>(r), labels.labels[static_cast<std::size_t>(fid[r])]) = 1.0;
  }
  MatrixXd u_f(static_cast<Index>(fid.size()), labels.classes);
  for (std::size_t r = 0; r < fid.size(); ++r) u_f.row(static_cast<Index>(r)) = u.row(fid[r]);

  MatrixXd a = phi.transpose() * u;
  for (int s = 0; s < params.n_step; ++s) {
    a -= (step * params.eta) * (phi_f.transpose() * (u_f - f_f));
    a = inv_denominator.asDiagonal() * a;
    u_f = phi_f * a;
  }
  return phi * a;
}

Assignment threshold(const MatrixXd& u) {
  if (!u.allFinite()) throw DomainError("threshold: non-finite entries");
  Assignment out = Assignment::Zero(u.rows(), u.cols());
  const auto best = row_argmax(u);
  for (Index i = 0; i < u.rows(); ++i) out(i, best[static_cast<std::size_t>(i)]) = 1.0;
  return out;
}

MboResult mbo_classify(const graph::Spectrum& spectrum, const LabelData& labels, const MboParams& params) {
  if (labels.fidelity_count() == 0) throw ParameterError("MBO needs at least one fidelity node");
  return run_mbo(spectrum, labels, params);
}

double energy(const MatrixXd& u, const graph::Spectrum& spectrum, const LabelData& labels, double eta) {
  if (u.rows() != spectrum.nodes() || labels.nodes() != u.rows() || u.cols() != labels.classes)
    throw ShapeError("energy: shape mismatch");
  const MatrixXd a = spectrum.vectors.transpose() * u;
  const double dirichlet = 0.5 * (spectrum.eigenvalues.asDiagonal() * a.cwiseAbs2()).sum();
  MatrixXd residual = u - labels.one_hot();
  for (Index i = 0; i < u.rows(); ++i)
    if (!labels.is_fidelity(i)) residual.row(i).setZero();
  return dirichlet + 0.5 * eta * residual.squaredNorm();
}

std::vector<std::pair<Index, Index>> batch_ranges(Index n, Index batch_size) {
  if (batch_size < 2) throw ParameterError("batch size must be >= 2");
  std::vector<std::pair<Index, Index>> out;
  for (Index begin = 0; begin < n; begin += batch_size) out.emplace_back(begin, std::min(batch_size, n - begin));
  return out;
}

graph::NystromOptions batch_spectrum_options(const graph::NystromOptions& base, std::size_t batch, Index size) {
  graph::NystromOptions opts = base;
  opts.n_sample = static_cast<int>(std::min<Index>(opts.n_sample, size));
  opts.n_eig = std::min(opts.n_eig, opts.n_sample);
  opts.seed = base.seed + batch;
  return opts;
}

MboParams batch_mbo_params(const MboParams& base, std::size_t batch) {
  MboParams p = base;
  p.seed = base.seed + batch;
  return p;
}

std::vector<std::string> batch_warnings(const LabelData& labels, const std::vector<std::pair<Index, Index>>& ranges) {
  std::vector<std::string> out;
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    const auto [begin, size] = ranges[b];
    std::vector<bool> seen(static_cast<std::size_t>(labels.classes), false);
    for (Index i = begin; i < begin + size; ++i)
      if (labels.is_fidelity(i)) seen[static_cast<std::size_t>(labels.labels[static_cast<std::size_t>(i)])] = true;
    for (int k = 0; k < labels.classes; ++k)
      if (!seen[static_cast<std::size_t>(k)])
        out.push_back("batch " + std::to_string(b) + " (nodes " + std::to_string(begin) + ".." +
                      std::to_string(begin + size - 1) + ") has no fidelity nodes for class " + std::to_string(k));
  }
  return out;
}

MboResult classify_batch(const graph::Spectrum& spectrum, const LabelData& batch_labels, const MboParams& params) {
  return run_mbo(spectrum, batch_labels, params);
}

BatchedResult classify_batched(const graph::FeatureSet& features, const LabelData& labels, Index batch_size,
                               const graph::NystromOptions& spectrum_options, const MboParams& params) {
  const Index n = features.cols();
  if (labels.nodes() != n) throw ShapeError("label data does not cover all feature columns");
  BatchedResult out;
  out.ranges = batch_ranges(n, batch_size);
  out.warnings = batch_warnings(labels, out.ranges);
  out.assignment = Assignment::Zero(n, labels.classes);
  for (std::size_t b = 0; b < out.ranges.size(); ++b) {
    const auto [begin, size] = out.ranges[b];
    const graph::Spectrum spectrum =
        graph::nystrom_spectrum(features.middleCols(begin, size), batch_spectrum_options(spectrum_options, b, size));
    MboResult r = run_mbo(spectrum, labels.slice(begin, size), batch_mbo_params(params, b));
    out.assignment.middleRows(begin, size) = r.assignment;
    out.batches.push_back(std::move(r));
  }
  return out;
}

}  // namespace egograph::mbo

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <map>

#include "egograph/errors.hpp"
#include "egograph/graph_spectrum.hpp"
#include "egograph/mbo_classifier.hpp"
#include "support.hpp"

using namespace egograph;
using namespace egograph::mbo;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing_support::uniform_matrix;

namespace {

// Complete eigenbasis of the dense Laplacian of a small random graph.
struct SmallGraph {
  MatrixXd L;
  graph::Spectrum spectrum;
};

SmallGraph small_graph(int n, std::uint64_t seed) {
  const MatrixXd f = uniform_matrix(2, n, seed);
  SmallGraph g;
  g.L = graph::dense_laplacian(f, graph::ScaleParams::global(0.2));
  g.spectrum = graph::dense_spectrum(f, graph::ScaleParams::global(0.2), n);
  return g;
}

// Dense solve of (I + dt L) u1 = u0 - dt * eta * M (u0 - f).
MatrixXd dense_step(const MatrixXd& L, const MatrixXd& u0, const LabelData& labels, double dt, double eta) {
  MatrixXd forcing = u0 - labels.one_hot();
  for (Eigen::Index i = 0; i < u0.rows(); ++i)
    if (!labels.is_fidelity(i)) forcing.row(i).setZero();
  const MatrixXd A = MatrixXd::Identity(L.rows(), L.cols()) + dt * L;
  return A.partialPivLu().solve(u0 - dt * eta * forcing);
}

// Two Gaussian blobs in the plane, 10 sigma apart; node i is in blob i / (n/2).
MatrixXd two_blobs(int n, std::uint64_t seed) {
  MatrixXd f = testing_support::gaussian_mixture(n, 2, 1, 0.0, seed);
  for (int i = n / 2; i < n; ++i) f(0, i) += 10.0;
  return f;
}

std::vector<int> blob_truth(int n) {
  std::vector<int> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = i < n / 2 ? 0 : 1;
  return t;
}

double agreement(const std::vector<int>& a, const std::vector<int>& b) {
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace

TEST(LabelData, Validation) {
  EXPECT_THROW(LabelData(0, {}), ParameterError);
  EXPECT_THROW(LabelData(2, {0, 2}), ParameterError);
  const LabelData l(3, {kNoLabel, 2, 0, kNoLabel});
  EXPECT_EQ(l.fidelity_count(), 2u);
  const MatrixXd f = l.one_hot();
  EXPECT_EQ(f.row(0).sum(), 0.0);
  EXPECT_EQ(f(1, 2), 1.0);
  EXPECT_EQ(f(2, 0), 1.0);
  EXPECT_EQ(l.slice(1, 2).labels, (std::vector<int>{2, 0}));
}

TEST(SampleFidelity, RoundingAndFullSupervision) {
  std::vector<int> truth(10, 0);
  truth.insert(truth.end(), 25, 1);
  const auto l = sample_fidelity(truth, 2, 0.1, 3);
  int c0 = 0, c1 = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!l.is_fidelity(static_cast<Eigen::Index>(i))) continue;
    EXPECT_EQ(l.labels[i], truth[i]);
    (truth[i] == 0 ? c0 : c1)++;
  }
  EXPECT_EQ(c0, 1);
  EXPECT_EQ(c1, 3);  // round(2.5) away from zero
  const auto all = sample_fidelity(truth, 2, 1.0, 3);
  EXPECT_EQ(all.fidelity_count(), truth.size());
  // Tiny classes keep one member.
  EXPECT_EQ(sample_fidelity(std::vector<int>{0, 1, 1}, 2, 0.01, 1).fidelity_count(), 2u);
}

TEST(SampleFidelity, DeterministicAndSeedSensitive) {
  std::vector<int> truth;
  for (int i = 0; i < 300; ++i) truth.push_back(i % 3);
  EXPECT_EQ(sample_fidelity(truth, 3, 0.1, 5).labels, sample_fidelity(truth, 3, 0.1, 5).labels);
  EXPECT_NE(sample_fidelity(truth, 3, 0.1, 5).labels, sample_fidelity(truth, 3, 0.1, 6).labels);
}

TEST(SampleFidelity, Errors) {
  EXPECT_THROW(sample_fidelity(std::vector<int>{0, 0}, 2, 0.5, 1), SamplingError);
  EXPECT_THROW(sample_fidelity(std::vector<int>{0, 1}, 2, 0.0, 1), ParameterError);
  EXPECT_THROW(sample_fidelity(std::vector<int>{0, 1}, 2, 1.5, 1), ParameterError);
}

TEST(Initialize, SpecExamples) {
  const LabelData all(3, {0, 2, 1, 1});
  EXPECT_EQ(initialize(all, 4, 9), all.one_hot());
  const LabelData none(1, std::vector<int>(6, kNoLabel));
  EXPECT_EQ(initialize(none, 6, 4), MatrixXd::Ones(6, 1));
  const LabelData some(3, std::vector<int>(100, kNoLabel));
  const MatrixXd u = initialize(some, 100, 12);
  EXPECT_EQ(u, initialize(some, 100, 12));
  EXPECT_EQ(u.rowwise().sum(), VectorXd::Ones(100));
  EXPECT_THROW(initialize(some, 99, 1), ShapeError);
}

TEST(Threshold, SpecExamples) {
  MatrixXd u(3, 3);
  u << 0.2, 0.7, 0.1, 0.5, 0.5, 0.0, 0, 0, 1;
  const MatrixXd t = threshold(u);
  EXPECT_EQ(t.row(0), (Eigen::RowVector3d(0, 1, 0)));
  EXPECT_EQ(t.row(1), (Eigen::RowVector3d(1, 0, 0)));
  EXPECT_EQ(t.row(2), u.row(2));
  EXPECT_EQ(threshold(t), t);
  u(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(threshold(u), DomainError);
}

TEST(Diffuse, NoDynamicsIsProjection) {
  const auto g = small_graph(6, 1);
  graph::Spectrum s = g.spectrum;
  s.eigenvalues.setZero();
  const LabelData labels(2, std::vector<int>(6, kNoLabel));
  const MatrixXd u = initialize(labels, 6, 3);
  MboParams p;
  p.eta = 0;
  EXPECT_LE((diffuse(u, s, labels, p) - u).cwiseAbs().maxCoeff(), 1e-12);  // complete basis
  s.vectors = s.vectors.leftCols(3).eval();
  s.eigenvalues = VectorXd::Zero(3);
  const MatrixXd proj = s.vectors * s.vectors.transpose() * u;
  EXPECT_LE((diffuse(u, s, labels, p) - proj).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Diffuse, SingleStepMatchesDenseSolve) {
  const auto g = small_graph(5, 2);
  const LabelData labels(2, {0, kNoLabel, 1, kNoLabel, 0});
  const MatrixXd u = initialize(labels, 5, 8);
  MboParams p;
  p.n_step = 1;
  p.dt = 0.3;
  p.eta = 4.0;
  const MatrixXd ours = diffuse(u, g.spectrum, labels, p);
  EXPECT_LE((ours - dense_step(g.L, u, labels, p.inner_dt(), p.eta)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Diffuse, MultiStepMatchesRepeatedDenseSolve) {
  const auto g = small_graph(7, 3);
  const LabelData labels(3, {0, kNoLabel, 1, 2, kNoLabel, kNoLabel, 0});
  const MatrixXd u = initialize(labels, 7, 2);
  MboParams p;
  MatrixXd ref = u;
  for (int s = 0; s < p.n_step; ++s) ref = dense_step(g.L, ref, labels, p.inner_dt(), p.eta);
  EXPECT_LE((diffuse(u, g.spectrum, labels, p) - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Diffuse, StiffForcingReachesFidelity) {
  // delta_t * eta = 1: every inner step lands on f before the implicit smoothing.
  const auto g = small_graph(6, 4);
  const LabelData labels(2, {0, 1, 1, 0, 1, 0});
  const MatrixXd u = initialize(LabelData(2, std::vector<int>(6, kNoLabel)), 6, 5);
  MboParams p;
  p.eta = 1e6;
  p.dt = 2.0 * p.n_step / p.eta;
  const MatrixXd out = diffuse(u, g.spectrum, labels, p);
  EXPECT_LE((out - labels.one_hot()).cwiseAbs().maxCoeff(), 1e-3);
  MatrixXd ref = u;
  for (int s = 0; s < p.n_step; ++s) ref = dense_step(g.L, ref, labels, p.inner_dt(), p.eta);
  EXPECT_LE((out - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Diffuse, ClassPermutationCommutes) {
  const auto g = small_graph(8, 6);
  const LabelData labels(3, {0, kNoLabel, 2, kNoLabel, 1, kNoLabel, kNoLabel, 2});
  const int perm[3] = {2, 0, 1};
  std::vector<int> permuted = labels.labels;
  for (int& l : permuted)
    if (l != kNoLabel) l = perm[l];
  const MatrixXd u = initialize(labels, 8, 3);
  MatrixXd up = MatrixXd::Zero(8, 3);
  for (int c = 0; c < 3; ++c) up.col(perm[c]) = u.col(c);
  MboParams p;
  const MatrixXd a = diffuse(u, g.spectrum, labels, p);
  const MatrixXd b = diffuse(up, g.spectrum, LabelData(3, permuted), p);
  for (int c = 0; c < 3; ++c) EXPECT_LE((a.col(c) - b.col(perm[c])).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Diffuse, ShapeErrors) {
  const auto g = small_graph(5, 7);
  const LabelData labels(2, std::vector<int>(5, kNoLabel));
  EXPECT_THROW(diffuse(MatrixXd::Zero(4, 2), g.spectrum, labels, {}), ShapeError);
  EXPECT_THROW(diffuse(MatrixXd::Zero(5, 3), g.spectrum, labels, {}), ShapeError);
  MboParams bad;
  bad.n_step = 0;
  EXPECT_THROW(diffuse(MatrixXd::Zero(5, 2), g.spectrum, labels, bad), ParameterError);
}

TEST(MboClassify, TwoSeparatedBlobs) {
  const int n = 400;
  const MatrixXd f = two_blobs(n, 17);
  const auto truth = blob_truth(n);
  const auto labels = sample_fidelity(truth, 2, 0.1, 2);
  graph::NystromOptions o;
  o.n_sample = 100;
  o.n_eig = 5;  // more retained modes keep random-start speckles alive at dt = 0.1
  o.scales = graph::ScaleParams::local(10);
  o.seed = 6;
  const auto r = mbo_classify(graph::nystrom_spectrum(f, o), labels, {});
  EXPECT_TRUE(r.converged);
  EXPECT_GE(agreement(r.labels(), truth), 0.99);
  // Thresholded rows are one-hot.
  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_EQ(r.assignment.row(i).sum(), 1.0);
    EXPECT_EQ(r.assignment.row(i).maxCoeff(), 1.0);
  }
}

TEST(MboClassify, FullSupervision) {
  const int n = 200;
  const MatrixXd f = two_blobs(n, 18);
  const auto truth = blob_truth(n);
  graph::NystromOptions o;
  o.n_sample = 60;
  o.n_eig = 20;
  o.scales = graph::ScaleParams::local(10);
  MboParams p;
  p.eta = 400;
  const auto r = mbo_classify(graph::nystrom_spectrum(f, o), sample_fidelity(truth, 2, 1.0, 1), p);
  EXPECT_GE(agreement(r.labels(), truth), 0.99);
}

TEST(MboClassify, SingleClassConvergesImmediately) {
  const auto g = small_graph(6, 9);
  const auto r = mbo_classify(g.spectrum, LabelData(1, {0, kNoLabel, kNoLabel, kNoLabel, kNoLabel, kNoLabel}), {});
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.assignment, MatrixXd::Ones(6, 1));
}

TEST(MboClassify, ConvergedStateIsFixedPointAndDeterministic) {
  const int n = 200;
  const MatrixXd f = two_blobs(n, 19);
  const auto labels = sample_fidelity(blob_truth(n), 2, 0.1, 4);
  graph::NystromOptions o;
  o.n_sample = 50;
  o.n_eig = 15;
  o.scales = graph::ScaleParams::local(8);
  const auto s = graph::nystrom_spectrum(f, o);
  MboParams p;
  p.seed = 21;
  const auto a = mbo_classify(s, labels, p), b = mbo_classify(s, labels, p);
  ASSERT_TRUE(a.converged);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.changed_per_iteration, b.changed_per_iteration);
  EXPECT_EQ(a.changed_per_iteration.back(), 0);
  EXPECT_EQ(threshold(diffuse(a.assignment, s, labels, p)), a.assignment);
}

TEST(MboClassify, MaxIterReturnsUnconvergedResult) {
  const int n = 100;
  const auto labels = sample_fidelity(blob_truth(n), 2, 0.1, 4);
  graph::NystromOptions o;
  o.n_sample = 40;
  o.n_eig = 10;
  o.scales = graph::ScaleParams::local(5);
  MboParams p;
  p.max_iter = 1;
  const auto r = mbo_classify(graph::nystrom_spectrum(two_blobs(n, 20), o), labels, p);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.converged, r.changed_per_iteration[0] == 0);
}

TEST(MboClassify, NeedsFidelity) {
  const auto g = small_graph(4, 10);
  EXPECT_THROW(mbo_classify(g.spectrum, LabelData(2, std::vector<int>(4, kNoLabel)), {}), ParameterError);
  EXPECT_THROW(mbo_classify(g.spectrum, LabelData(2, std::vector<int>(5, 0)), {}), ShapeError);
}

TEST(Energy, SpecExamples) {
  const auto g = small_graph(6, 11);
  const LabelData labels(2, {0, kNoLabel, 1, kNoLabel, 1, kNoLabel});
  graph::Spectrum flat = g.spectrum;
  flat.eigenvalues.setZero();
  MatrixXd u = labels.one_hot();
  for (Eigen::Index i = 0; i < 6; ++i)
    if (!labels.is_fidelity(i)) u(i, 1) = 1.0;
  EXPECT_NEAR(energy(u, flat, labels, 300.0), 0.0, 1e-12);

  // Dirichlet term equals 1/2 trace(u^T L u) on a complete basis.
  const MatrixXd e1 = MatrixXd::Zero(6, 2).rowwise() + Eigen::RowVector2d(1, 0);
  const double dense = 0.5 * (e1.transpose() * g.L * e1).trace();
  EXPECT_NEAR(energy(e1, g.spectrum, labels, 0.0), dense, 1e-10);

  // Fidelity part is linear in eta.
  const double base = energy(e1, g.spectrum, labels, 0.0);
  const double f1 = energy(e1, g.spectrum, labels, 5.0) - base;
  const double f2 = energy(e1, g.spectrum, labels, 10.0) - base;
  EXPECT_NEAR(f2, 2 * f1, 1e-12);
  EXPECT_NEAR(f1, 0.5 * 5.0 * 4.0, 1e-12);  // two wrong rows, squared distance 2 each
}

TEST(Batching, RangesAndParams) {
  const auto r = batch_ranges(1000, 300);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[3], (std::pair<Eigen::Index, Eigen::Index>{900, 100}));
  for (int b = 0; b < 3; ++b) EXPECT_EQ(r[static_cast<std::size_t>(b)].second, 300);
  EXPECT_EQ(batch_ranges(10, 50).size(), 1u);
  EXPECT_THROW(batch_ranges(10, 1), ParameterError);
  graph::NystromOptions o;
  o.n_sample = 200;
  o.n_eig = 150;
  o.seed = 10;
  const auto c = batch_spectrum_options(o, 3, 100);
  EXPECT_EQ(c.n_sample, 100);
  EXPECT_EQ(c.n_eig, 100);
  EXPECT_EQ(c.seed, 13u);
}

TEST(Batching, WarningsForMissingClasses) {
  const LabelData labels(2, {0, kNoLabel, 1, kNoLabel, kNoLabel, 0});
  const auto w = batch_warnings(labels, batch_ranges(6, 3));
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("class 1"), std::string::npos);
  EXPECT_NE(w[0].find("batch 1"), std::string::npos);
}

TEST(Batching, SingleBatchReproducesUnbatchedRun) {
  const int n = 200;
  const MatrixXd f = two_blobs(n, 23);
  const auto labels = sample_fidelity(blob_truth(n), 2, 0.1, 8);
  graph::NystromOptions o;
  o.n_sample = 50;
  o.n_eig = 15;
  o.scales = graph::ScaleParams::local(8);
  o.seed = 3;
  MboParams p;
  p.seed = 4;
  const auto batched = classify_batched(f, labels, 500, o, p);
  const auto single = mbo_classify(graph::nystrom_spectrum(f, o), labels, p);
  EXPECT_EQ(batched.assignment, single.assignment);
}

TEST(Batching, DuplicatedBlobsPerBatch) {
  const int n = 200;
  const MatrixXd one = two_blobs(n, 24);
  MatrixXd f(2, 3 * n);
  std::vector<int> truth;
  for (int b = 0; b < 3; ++b) {
    f.middleCols(b * n, n) = one;
    const auto t = blob_truth(n);
    truth.insert(truth.end(), t.begin(), t.end());
  }
  const auto labels = sample_fidelity(truth, 2, 0.1, 9);
  graph::NystromOptions o;
  o.n_sample = 60;
  o.n_eig = 5;
  o.scales = graph::ScaleParams::local(10);
  const auto r = classify_batched(f, labels, n, o, {});
  ASSERT_EQ(r.batches.size(), 3u);
  const auto l = r.labels();
  for (int b = 0; b < 3; ++b) {
    const std::vector<int> got(l.begin() + b * n, l.begin() + (b + 1) * n);
    EXPECT_GE(agreement(got, blob_truth(n)), 0.99) << "batch " << b;
  }
}

// egograph: command-line front end for the motion-classification pipeline.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egograph/binary_io.hpp"
#include "egograph/evaluation.hpp"
#include "egograph/figures.hpp"
#include "egograph/flow_field.hpp"
#include "egograph/graph_spectrum.hpp"
#include "egograph/labels_io.hpp"
#include "egograph/matrix_io.hpp"
#include "egograph/mbo_classifier.hpp"
#include "egograph/motion_descriptor.hpp"
#include "egograph/pipeline.hpp"
#include "egograph/reduction.hpp"

namespace fs = std::filesystem;
using namespace egograph;

namespace {

// Thrown from subcommand bodies so main() can prefix the stage name.
struct Tagged {
  std::string stage;
  std::string message;
};

template <class F>
void as_stage(const std::string& stage, F&& body) {
  try {
    body();
  } catch (const pipeline::StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw Tagged{stage, e.what()};
  }
}

std::string pad(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(6 - std::min<std::size_t>(6, s.size()), '0') + s;
}

struct FlowArgs {
  std::string frames_dir, out_dir, synthetic;
  double alpha = 10.0;
  int iters = 100;
  double tol = 1e-4;
  int fields = 1, width = flow::kCanonicalWidth, height = flow::kCanonicalHeight;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

void run_flow(const FlowArgs& a) {
  fs::create_directories(a.out_dir);
  if (!a.synthetic.empty()) {
    const auto pattern = flow::parse_pattern(a.synthetic);
    const auto base = flow::synth_flow(pattern, a.width, a.height);
    for (int i = 0; i < a.fields; ++i) {
      auto f = base;
      if (a.noise > 0) flow::add_noise(f, a.noise, a.seed + static_cast<std::uint64_t>(i));
      flow::write_flo(f, fs::path(a.out_dir) / (pad(static_cast<std::size_t>(i)) + ".flo"));
    }
    return;
  }
  if (a.frames_dir.empty()) throw ParameterError("either --frames-dir or --synthetic is required");
  if (!fs::is_directory(a.frames_dir)) throw IoError("frames directory " + a.frames_dir + " does not exist");
  const auto frames = pipeline::list_files(a.frames_dir, ".pgm");
  if (frames.size() < 2) throw ParameterError("need at least two .pgm frames in " + a.frames_dir);
  flow::FlowParams p{a.alpha, a.iters, a.tol};
  p.validate();
  auto load = [&](const fs::path& f) { return flow::resize_frame(flow::read_frame(f), a.width, a.height); };
  flow::Frame prev = load(frames[0]);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    flow::Frame next = load(frames[i]);
    flow::write_flo(flow::compute_flow(prev, next, p), fs::path(a.out_dir) / (pad(i - 1) + ".flo"));
    prev = std::move(next);
  }
}

struct DescriptorArgs {
  std::string flo_dir, out, csv;
  descriptor::DescriptorConfig cfg;
};

void run_descriptor(const DescriptorArgs& a) {
  if (!fs::is_directory(a.flo_dir)) throw IoError("flow directory " + a.flo_dir + " does not exist");
  const auto files = pipeline::list_files(a.flo_dir, ".flo");
  const auto X = descriptor::build_descriptor_matrix(
      files.size(), [&](std::size_t i) { return flow::read_flo(files[i]); }, a.cfg);
  io::write_matrix(X, a.out);
  if (!a.csv.empty()) io::write_matrix_csv(X, a.csv);
  std::cerr << "descriptor: " << X.rows() << " x " << X.cols() << "\n";
}

struct ReduceArgs {
  std::string in, out, basis_out, basis_in, coefficients_out;
  reduction::NmfOptions nmf;
  int window = 1;
};

void run_reduce(const ReduceArgs& a) {
  const Eigen::MatrixXd X = io::read_matrix(a.in);
  Eigen::MatrixXd V, H;
  if (!a.basis_in.empty()) {
    V = io::read_matrix(a.basis_in);
    H = reduction::project_nnls(X, V);
  } else {
    auto f = reduction::nmf(X, a.nmf);
    std::cerr << "nmf: " << f.iterations << " iterations, objective " << f.final_objective << "\n";
    V = std::move(f.basis);
    H = std::move(f.coefficients);
  }
  if (!a.basis_out.empty()) io::write_matrix(V, a.basis_out);
  if (!a.coefficients_out.empty()) io::write_matrix(H, a.coefficients_out);
  io::write_matrix(reduction::smooth(H, a.window), a.out);
}

struct SpectrumArgs {
  std::string in, out;
  graph::NystromOptions opts;
  int knn = 10;
  std::optional<double> tau;
  bool knn_full = false;

  graph::NystromOptions resolved() const {
    graph::NystromOptions o = opts;
    o.scales = tau ? graph::ScaleParams::global(*tau)
                   : graph::ScaleParams::local(knn, knn_full ? graph::KnnReference::Full : graph::KnnReference::Sampled);
    return o;
  }
};

void run_spectrum(const SpectrumArgs& a) {
  const auto F = io::read_matrix(a.in);
  const auto s = graph::nystrom_spectrum(F, a.resolved());
  graph::write_spectrum(s, a.out);
  std::cerr << "spectrum: " << s.nodes() << " nodes, " << s.size() << " eigenpairs, lambda in [" << s.eigenvalues.minCoeff()
            << ", " << s.eigenvalues.maxCoeff() << "]\n";
}

struct ClassifyArgs {
  std::string spectrum, features, truth, fidelity_file, out, diagnostics;
  int classes = 0;
  double fidelity_fraction = 0.1;
  std::uint64_t fidelity_seed = 0;
  std::optional<Eigen::Index> batch_size;
  mbo::MboParams mbo;
  SpectrumArgs spec;
};

void run_classify(const ClassifyArgs& a) {
  if (a.spectrum.empty() == a.features.empty()) throw ParameterError("give exactly one of --spectrum or --features");
  if (!a.spectrum.empty() && a.batch_size) throw ParameterError("--batch-size needs --features");
  Eigen::Index n = 0;
  std::optional<graph::Spectrum> spectrum;
  Eigen::MatrixXd features;
  if (!a.spectrum.empty()) {
    spectrum = graph::read_spectrum(a.spectrum);
    n = spectrum->nodes();
  } else {
    features = io::read_matrix(a.features);
    n = features.cols();
  }
  mbo::LabelData labels;
  if (!a.fidelity_file.empty()) {
    labels = pipeline::read_fidelity(a.fidelity_file, n, a.classes);
  } else {
    if (a.truth.empty()) throw ParameterError("fidelity sampling needs --truth (or pass --fidelity-file)");
    const auto t = pipeline::read_labels(a.truth);
    if (static_cast<Eigen::Index>(t.size()) != n) throw ShapeError("truth has " + std::to_string(t.size()) + " rows for " + std::to_string(n) + " nodes");
    labels = mbo::sample_fidelity(t, a.classes, a.fidelity_fraction, a.fidelity_seed);
  }
  std::vector<mbo::MboResult> runs;
  std::vector<int> predicted;
  if (spectrum) {
    runs.push_back(mbo::mbo_classify(*spectrum, labels, a.mbo));
    predicted = runs.back().labels();
  } else {
    auto r = mbo::classify_batched(features, labels, a.batch_size.value_or(n), a.spec.resolved(), a.mbo);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    predicted = r.labels();
    runs = std::move(r.batches);
  }
  for (std::size_t b = 0; b < runs.size(); ++b)
    std::cerr << "batch " << b << ": " << runs[b].iterations << " iterations"
              << (runs[b].converged ? "" : " (not converged)") << "\n";
  pipeline::write_labels(predicted, a.out);
  if (!a.diagnostics.empty()) pipeline::write_diagnostics(runs, a.diagnostics);
}

struct EvaluateArgs {
  std::string pred, truth, report, confusion_csv, confusion_image, fidelity_file;
  int classes = 0;
  std::vector<int> eval_classes;
  bool held_out = false;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto p = pipeline::read_labels(a.pred);
  auto t = pipeline::read_labels(a.truth);
  int classes = a.classes;
  if (classes == 0)
    for (int v : p) classes = std::max(classes, v + 1);
  for (int v : t) classes = std::max(classes, v + 1);
  if (a.held_out) {
    if (a.fidelity_file.empty()) throw ParameterError("--held-out needs --fidelity-file");
    const auto fid = pipeline::read_fidelity(a.fidelity_file, static_cast<Eigen::Index>(t.size()), classes);
    for (Eigen::Index i = 0; i < fid.nodes(); ++i)
      if (fid.is_fidelity(i)) t[static_cast<std::size_t>(i)] = mbo::kNoLabel;
  }
  const auto r = pipeline::evaluate(p, t, classes, a.eval_classes);
  const std::string json = pipeline::to_json(r).dump(2) + "\n";
  if (a.report.empty()) std::cout << json;
  else io::write_file(a.report, json);
  if (!a.confusion_csv.empty() || !a.confusion_image.empty()) {
    if (a.confusion_csv.empty() || a.confusion_image.empty())
      throw ParameterError("--confusion-csv and --confusion-image go together");
    pipeline::emit_confusion_matrix(r, a.confusion_csv, a.confusion_image);
  }
}

struct PlotArgs {
  std::string pred, truth, out;
  int height = 20;
  std::vector<std::string> palette;
};

void run_plot(const PlotArgs& a) {
  const auto p = pipeline::read_labels(a.pred);
  std::vector<int> t;
  if (!a.truth.empty()) t = pipeline::read_labels(a.truth);
  std::vector<pipeline::Rgb> palette = pipeline::default_palette();
  if (!a.palette.empty()) {
    palette.clear();
    for (const auto& c : a.palette) palette.push_back(pipeline::parse_color(c));
  }
  pipeline::emit_segment_plot(p, a.out, palette, a.height, t);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ego-motion activity classification from optical flow"};
  app.require_subcommand(1);

  FlowArgs fa;
  auto* flow_cmd = app.add_subcommand("flow", "Estimate or synthesize optical flow and write .flo files");
  flow_cmd->add_option("--frames-dir", fa.frames_dir, "Directory of .pgm frames (sorted by name)");
  flow_cmd->add_option("--out-dir", fa.out_dir, "Output directory for .flo files")->required();
  flow_cmd->add_option("--alpha", fa.alpha, "Smoothness weight")->capture_default_str();
  flow_cmd->add_option("--iters", fa.iters, "Maximum iterations")->capture_default_str();
  flow_cmd->add_option("--tol", fa.tol, "Convergence tolerance")->capture_default_str();
  flow_cmd->add_option("--synthetic", fa.synthetic, "translate:U,V | rotate:W | zoom:S | noise:SIGMA[,SEED]");
  flow_cmd->add_option("--fields", fa.fields, "Synthetic: number of fields")->capture_default_str();
  flow_cmd->add_option("--noise", fa.noise, "Synthetic: additive noise sigma")->capture_default_str();
  flow_cmd->add_option("--seed", fa.seed, "Synthetic: noise seed of field 0")->capture_default_str();
  flow_cmd->add_option("--width", fa.width, "Frame / field width")->capture_default_str();
  flow_cmd->add_option("--height", fa.height, "Frame / field height")->capture_default_str();

  DescriptorArgs da;
  auto* desc_cmd = app.add_subcommand("descriptor", "Build the motion descriptor matrix from .flo files");
  desc_cmd->add_option("--flo-dir", da.flo_dir)->required();
  desc_cmd->add_option("--dt", da.cfg.dt, "Frames per segment")->capture_default_str();
  desc_cmd->add_option("--dx", da.cfg.dx, "Cell width")->capture_default_str();
  desc_cmd->add_option("--dy", da.cfg.dy, "Cell height")->capture_default_str();
  desc_cmd->add_option("--fps", da.cfg.fps)->capture_default_str();
  desc_cmd->add_option("--out", da.out, "GMD1 output")->required();
  desc_cmd->add_option("--csv", da.csv, "Optional CSV export");

  ReduceArgs ra;
  auto* red_cmd = app.add_subcommand("reduce", "NMF (or fixed-basis projection) plus temporal smoothing");
  red_cmd->add_option("--in", ra.in, "Descriptor GMD1")->required();
  red_cmd->add_option("--out", ra.out, "Smoothed features GMD1")->required();
  red_cmd->add_option("--rank", ra.nmf.rank)->capture_default_str();
  red_cmd->add_option("--iters", ra.nmf.max_iters)->capture_default_str();
  red_cmd->add_option("--tol", ra.nmf.tol)->capture_default_str();
  red_cmd->add_option("--seed", ra.nmf.seed)->capture_default_str();
  red_cmd->add_option("--window", ra.window, "Odd smoothing window")->capture_default_str();
  red_cmd->add_option("--basis-out", ra.basis_out);
  red_cmd->add_option("--basis-in", ra.basis_in, "Project onto this basis instead of factoring");
  red_cmd->add_option("--coefficients-out", ra.coefficients_out, "Unsmoothed coefficients");

  SpectrumArgs sa;
  auto add_spectrum_flags = [](CLI::App* cmd, SpectrumArgs& s, const std::string& seed_flag) {
    cmd->add_option("--nsample", s.opts.n_sample)->capture_default_str();
    cmd->add_option("--neig", s.opts.n_eig)->capture_default_str();
    auto* knn = cmd->add_option("--knn", s.knn, "Local scaling neighbour")->capture_default_str();
    cmd->add_option("--tau", s.tau, "Global scale (instead of --knn)")->excludes(knn);
    cmd->add_flag("--knn-full", s.knn_full, "Search neighbours among all nodes");
    cmd->add_option(seed_flag, s.opts.seed)->capture_default_str();
    cmd->add_flag("--landmark-only-da", s.opts.landmark_only_da, "Landmark strengths from W_AA only");
  };
  auto* spec_cmd = app.add_subcommand("spectrum", "Nystrom eigenpairs of the graph Laplacian");
  spec_cmd->add_option("--in", sa.in, "Features GMD1 (one column per node)")->required();
  spec_cmd->add_option("--out", sa.out, "SPC1 output")->required();
  add_spectrum_flags(spec_cmd, sa, "--seed");

  ClassifyArgs ca;
  auto* cls_cmd = app.add_subcommand("classify", "Semi-supervised MBO labelling");
  cls_cmd->add_option("--spectrum", ca.spectrum, "SPC1 spectrum (single batch)");
  cls_cmd->add_option("--features", ca.features, "Features GMD1; spectra are computed per batch");
  cls_cmd->add_option("--classes", ca.classes)->required()->check(CLI::PositiveNumber);
  cls_cmd->add_option("--truth", ca.truth, "Ground truth CSV used for fidelity sampling");
  cls_cmd->add_option("--fidelity-fraction", ca.fidelity_fraction)->capture_default_str();
  cls_cmd->add_option("--fidelity-seed", ca.fidelity_seed)->capture_default_str();
  cls_cmd->add_option("--fidelity-file", ca.fidelity_file, "Explicit fidelity CSV");
  cls_cmd->add_option("--batch-size", ca.batch_size);
  cls_cmd->add_option("--eta", ca.mbo.eta)->capture_default_str();
  cls_cmd->add_option("--dt", ca.mbo.dt)->capture_default_str();
  cls_cmd->add_option("--nstep", ca.mbo.n_step)->capture_default_str();
  cls_cmd->add_option("--max-iter", ca.mbo.max_iter)->capture_default_str();
  cls_cmd->add_option("--seed", ca.mbo.seed, "Initialization seed")->capture_default_str();
  cls_cmd->add_option("--out", ca.out, "Predictions CSV")->required();
  cls_cmd->add_option("--diagnostics", ca.diagnostics, "Per-iteration changed-label counts CSV");
  add_spectrum_flags(cls_cmd, ca.spec, "--spectrum-seed");

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Precision, recall, accuracy and confusion matrix");
  eval_cmd->add_option("--pred", ea.pred)->required();
  eval_cmd->add_option("--truth", ea.truth)->required();
  eval_cmd->add_option("--classes", ea.classes, "Number of classes (default: inferred)");
  eval_cmd->add_option("--eval-classes", ea.eval_classes, "Classes included in the means")->delimiter(',');
  eval_cmd->add_flag("--held-out", ea.held_out, "Exclude fidelity segments from evaluation");
  eval_cmd->add_option("--fidelity-file", ea.fidelity_file);
  eval_cmd->add_option("--report", ea.report, "JSON report (default: stdout)");
  eval_cmd->add_option("--confusion-csv", ea.confusion_csv);
  eval_cmd->add_option("--confusion-image", ea.confusion_image);

  PlotArgs pa;
  auto* plot_cmd = app.add_subcommand("plot", "Per-segment class strip as a PPM image");
  plot_cmd->add_option("--pred", pa.pred)->required();
  plot_cmd->add_option("--truth", pa.truth, "Adds a ground-truth strip");
  plot_cmd->add_option("--out", pa.out)->required();
  plot_cmd->add_option("--height", pa.height)->capture_default_str();
  plot_cmd->add_option("--palette", pa.palette, "Colours as #rrggbb")->delimiter(',');

  std::string config;
  bool force = false;
  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline from a JSON config");
  run_cmd->add_option("--config", config)->required();
  run_cmd->add_flag("--force", force, "Recompute stages whose outputs exist");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*flow_cmd) as_stage("flow", [&] { run_flow(fa); });
    else if (*desc_cmd) as_stage("descriptor", [&] { run_descriptor(da); });
    else if (*red_cmd) as_stage("reduce", [&] { run_reduce(ra); });
    else if (*spec_cmd) as_stage("spectrum", [&] { run_spectrum(sa); });
    else if (*cls_cmd) as_stage("classify", [&] { run_classify(ca); });
    else if (*eval_cmd) as_stage("evaluate", [&] { run_evaluate(ea); });
    else if (*plot_cmd) as_stage("plot", [&] { run_plot(pa); });
    else if (*run_cmd) {
      const auto summary = pipeline::run_pipeline(fs::path(config), force);
      for (const auto& s : summary.stages) std::cerr << s.stage << ": " << (s.skipped ? "skipped" : "done") << "\n";
      for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
    }
  } catch (const pipeline::StageError& e) {
    std::cerr << "egograph: " << e.what() << "\n";
    return 2;
  } catch (const Tagged& t) {
    std::cerr << "egograph: stage '" << t.stage << "': " << t.message << "\n";
    return 2;
  }
  return 0;
}

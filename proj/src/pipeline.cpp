#include "egograph/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "egograph/binary_io.hpp"
#include "egograph/evaluation.hpp"
#include "egograph/labels_io.hpp"
#include "egograph/matrix_io.hpp"

namespace egograph::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

StageError::StageError(std::string stage, fs::path file, const std::string& what)
    : Error("stage", "stage '" + stage + "'" + (file.empty() ? std::string() : " (" + file.string() + ")") + ": " + what),
      stage_(std::move(stage)),
      file_(std::move(file)) {}

namespace {

// ---- config parsing ----

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key)) throw ParseError(where + ": unknown key '" + key + "'");
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config key '") + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

VideoSource parse_video(const json& v, const fs::path& base, std::size_t index) {
  const std::string where = "videos[" + std::to_string(index) + "]";
  check_keys(v, {"id", "frames_dir", "flo_dir", "synthetic", "fps", "frames", "label"}, where);
  VideoSource s;
  s.id = "video" + std::to_string(index);
  read_opt(v, "id", s.id);
  read_opt(v, "fps", s.fps);
  if (!(s.fps > 0)) throw ParameterError(where + ": fps must be positive");
  if (v.contains("label") && !v["label"].is_null()) s.label = v["label"].get<int>();
  if (v.contains("frames") && !v["frames"].is_null()) s.count = v["frames"].get<int>();
  const int kinds = v.contains("frames_dir") + v.contains("flo_dir") + v.contains("synthetic");
  if (kinds != 1) throw ParseError(where + ": exactly one of frames_dir, flo_dir, synthetic is required");
  if (v.contains("frames_dir")) {
    s.kind = VideoSource::Kind::Frames;
    s.dir = resolve(base, v["frames_dir"].get<std::string>());
  } else if (v.contains("flo_dir")) {
    s.kind = VideoSource::Kind::Flo;
    s.dir = resolve(base, v["flo_dir"].get<std::string>());
  } else {
    const json& syn = v["synthetic"];
    check_keys(syn, {"pattern", "fields", "noise_sigma", "seed", "width", "height"}, where + ".synthetic");
    s.kind = VideoSource::Kind::Synthetic;
    if (!syn.contains("pattern") || !syn.contains("fields"))
      throw ParseError(where + ".synthetic: 'pattern' and 'fields' are required");
    s.pattern = flow::parse_pattern(syn["pattern"].get<std::string>());
    s.count = syn["fields"].get<int>();
    read_opt(syn, "noise_sigma", s.noise_sigma);
    read_opt(syn, "seed", s.noise_seed);
    read_opt(syn, "width", s.width);
    read_opt(syn, "height", s.height);
    if (!(s.noise_sigma >= 0)) throw ParameterError(where + ": noise_sigma must be >= 0");
  }
  if (s.count && *s.count < 1) throw ParameterError(where + ": frame/field count must be >= 1");
  return s;
}

// ---- small helpers ----

bool all_exist(const std::vector<fs::path>& paths) {
  return std::all_of(paths.begin(), paths.end(), [](const fs::path& p) { return fs::exists(p); });
}

// Writes through a temporary name so an interrupted run never leaves a
// truncated output that a resumed run would take as complete.
template <class Write>
void commit(const fs::path& path, Write&& write) {
  fs::path tmp = path;
  tmp += ".partial";
  write(tmp);
  fs::rename(tmp, path);
}

void commit_text(const fs::path& path, const std::string& text) {
  commit(path, [&](const fs::path& p) { io::write_file(p, text); });
}

std::string zero_pad(std::size_t i, int width = 6) {
  std::string s = std::to_string(i);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

std::string batch_name(std::size_t b) { return "spectrum_" + zero_pad(b, 3) + ".spc"; }

struct SegmentIndex {
  std::vector<std::string> ids;
  std::vector<Eigen::Index> first, count;
  std::vector<int> labels;  // -1 when the video has no label

  Eigen::Index total() const { return count.empty() ? 0 : first.back() + count.back(); }
};

std::string encode_index(const SegmentIndex& s) {
  std::string out = "video_id,first_segment,segments,label\n";
  for (std::size_t i = 0; i < s.ids.size(); ++i)
    out += s.ids[i] + ',' + std::to_string(s.first[i]) + ',' + std::to_string(s.count[i]) + ',' +
           std::to_string(s.labels[i]) + '\n';
  return out;
}

SegmentIndex read_index(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  SegmentIndex s;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1)
      f.push_back(line.substr(start, pos - start));
    f.push_back(line.substr(start));
    if (f.size() != 4) throw ParseError(path.string() + ": malformed row '" + line + "'");
    s.ids.push_back(f[0]);
    s.first.push_back(std::stol(f[1]));
    s.count.push_back(std::stol(f[2]));
    s.labels.push_back(std::stoi(f[3]));
  }
  return s;
}

class Stages {
public:
  Stages(const Config& cfg, bool force) : cfg_(cfg), force_(force), work_(cfg.work_dir) {}

  RunSummary run() {
    stage_flow();
    stage_descriptor();
    stage_reduce();
    stage_spectrum();
    stage_classify();
    stage_evaluate();
    return std::move(summary_);
  }

private:
  // Runs `body` unless every output exists; library errors are re-raised
  // tagged with the stage and the file being processed.
  template <class Body>
  void stage(const std::string& name, const std::vector<fs::path>& outputs, Body&& body) {
    if (!force_ && !outputs.empty() && all_exist(outputs)) {
      summary_.stages.push_back({name, true});
      return;
    }
    current_.clear();
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, current_, e.what());
    }
    summary_.stages.push_back({name, false});
  }

  fs::path flow_dir(const VideoSource& v) const { return work_ / "flow" / v.id; }

  // Input frames of a frames-dir video, capped by its frame count.
  std::vector<fs::path> frames_of(const VideoSource& v) {
    current_ = v.dir;
    if (!fs::is_directory(v.dir)) throw IoError("frames directory does not exist");
    auto frames = list_files(v.dir, ".pgm");
    if (v.count && static_cast<std::size_t>(*v.count) < frames.size()) frames.resize(static_cast<std::size_t>(*v.count));
    if (frames.size() < 2) throw ParameterError("need at least two .pgm frames, found " + std::to_string(frames.size()));
    return frames;
  }

  void stage_flow() {
    // Only frame directories produce flow files; .flo inputs are read in
    // place and synthetic fields are generated on the fly by the descriptor.
    std::size_t computed = 0;
    stage("flow", {}, [&] {
      for (const auto& v : cfg_.videos) {
        if (v.kind != VideoSource::Kind::Frames) continue;
        const auto frames = frames_of(v);
        fs::create_directories(flow_dir(v));
        flow::Frame prev;
        bool have_prev = false;
        for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
          const fs::path out = flow_dir(v) / (zero_pad(i) + ".flo");
          if (!force_ && fs::exists(out)) {
            have_prev = false;
            continue;
          }
          if (!have_prev) {
            current_ = frames[i];
            prev = flow::resize_frame(flow::read_frame(frames[i]), cfg_.frame_width, cfg_.frame_height);
          }
          current_ = frames[i + 1];
          flow::Frame next = flow::resize_frame(flow::read_frame(frames[i + 1]), cfg_.frame_width, cfg_.frame_height);
          current_ = out;
          const flow::FlowField field = flow::compute_flow(prev, next, cfg_.flow);
          commit(out, [&](const fs::path& p) { flow::write_flo(field, p); });
          prev = std::move(next);
          have_prev = true;
          ++computed;
        }
      }
    });
    summary_.stages.back().skipped = computed == 0;
  }

  descriptor::DescriptorMatrix video_descriptor(const VideoSource& v) {
    descriptor::DescriptorConfig dc;
    dc.dx = cfg_.dx;
    dc.dy = cfg_.dy;
    dc.fps = v.fps;
    dc.dt = cfg_.segment_frames(v.fps);
    if (v.kind == VideoSource::Kind::Synthetic) {
      const flow::FlowField base = flow::synth_flow(v.pattern, v.width, v.height);
      return descriptor::build_descriptor_matrix(
          static_cast<std::size_t>(*v.count),
          [&](std::size_t i) {
            flow::FlowField f = base;
            if (v.noise_sigma > 0) flow::add_noise(f, v.noise_sigma, v.noise_seed + i);
            return f;
          },
          dc);
    }
    std::vector<fs::path> files;
    if (v.kind == VideoSource::Kind::Flo) {
      current_ = v.dir;
      if (!fs::is_directory(v.dir)) throw IoError("flow directory does not exist");
      files = list_files(v.dir, ".flo");
      if (v.count && static_cast<std::size_t>(*v.count) < files.size()) files.resize(static_cast<std::size_t>(*v.count));
    } else {
      const std::size_t expected = frames_of(v).size() - 1;
      for (std::size_t i = 0; i < expected; ++i) files.push_back(flow_dir(v) / (zero_pad(i) + ".flo"));
    }
    return descriptor::build_descriptor_matrix(
        files.size(),
        [&](std::size_t i) {
          current_ = files[i];
          return flow::read_flo(files[i]);
        },
        dc);
  }

  void stage_descriptor() {
    const fs::path out = work_ / "descriptor.gmd", index = work_ / "segments.csv";
    stage("descriptor", {out, index}, [&] {
      std::vector<descriptor::DescriptorMatrix> parts;
      SegmentIndex s;
      Eigen::Index rows = -1, total = 0;
      for (const auto& v : cfg_.videos) {
        parts.push_back(video_descriptor(v));
        current_.clear();
        if (rows >= 0 && parts.back().rows() != rows)
          throw ShapeError("video '" + v.id + "' has " + std::to_string(parts.back().rows()) +
                           " descriptor rows, earlier videos " + std::to_string(rows));
        rows = parts.back().rows();
        s.ids.push_back(v.id);
        s.first.push_back(total);
        s.count.push_back(parts.back().cols());
        s.labels.push_back(v.label.value_or(-1));
        total += parts.back().cols();
      }
      descriptor::DescriptorMatrix X(rows, total);
      for (std::size_t i = 0; i < parts.size(); ++i) X.middleCols(s.first[i], s.count[i]) = parts[i];
      current_ = out;
      commit(out, [&](const fs::path& p) { io::write_matrix(X, p); });
      current_ = index;
      commit_text(index, encode_index(s));
    });
    current_ = index;
    segments_ = read_index(index);
  }

  void stage_reduce() {
    const fs::path basis = work_ / "basis.gmd", coeffs = work_ / "coefficients.gmd", feats = work_ / "features.gmd";
    stage("reduce", {basis, coeffs, feats}, [&] {
      current_ = work_ / "descriptor.gmd";
      const Eigen::MatrixXd X = io::read_matrix(current_);
      Eigen::MatrixXd V, H;
      if (cfg_.basis_in) {
        current_ = *cfg_.basis_in;
        V = io::read_matrix(*cfg_.basis_in);
        current_.clear();
        H = reduction::project_nnls(X, V);
      } else {
        current_.clear();
        auto f = reduction::nmf(X, cfg_.nmf);
        V = std::move(f.basis);
        H = std::move(f.coefficients);
      }
      // Smoothing never crosses a video boundary.
      Eigen::MatrixXd F(H.rows(), H.cols());
      for (std::size_t i = 0; i < segments_.ids.size(); ++i)
        F.middleCols(segments_.first[i], segments_.count[i]) =
            reduction::smooth(H.middleCols(segments_.first[i], segments_.count[i]), cfg_.window);
      commit(basis, [&](const fs::path& p) { io::write_matrix(V, p); });
      commit(coeffs, [&](const fs::path& p) { io::write_matrix(H, p); });
      commit(feats, [&](const fs::path& p) { io::write_matrix(F, p); });
    });
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges() const {
    const Eigen::Index n = segments_.total();
    return mbo::batch_ranges(n, std::max<Eigen::Index>(2, cfg_.batch_size.value_or(n)));
  }

  void stage_spectrum() {
    const auto rs = ranges();
    std::vector<fs::path> outputs;
    for (std::size_t b = 0; b < rs.size(); ++b) outputs.push_back(work_ / batch_name(b));
    stage("spectrum", outputs, [&] {
      current_ = work_ / "features.gmd";
      const Eigen::MatrixXd F = io::read_matrix(current_);
      if (F.cols() != segments_.total())
        throw ShapeError("features have " + std::to_string(F.cols()) + " columns for " +
                         std::to_string(segments_.total()) + " segments");
      for (std::size_t b = 0; b < rs.size(); ++b) {
        const auto [begin, size] = rs[b];
        current_ = outputs[b];
        const auto spectrum =
            graph::nystrom_spectrum(F.middleCols(begin, size), mbo::batch_spectrum_options(cfg_.spectrum, b, size));
        commit(outputs[b], [&](const fs::path& p) { graph::write_spectrum(spectrum, p); });
      }
    });
  }

  // Ground truth per segment, or empty when none is configured.
  std::vector<int> truth() {
    if (cfg_.truth_labels) {
      current_ = *cfg_.truth_labels;
      auto t = read_labels(*cfg_.truth_labels);
      if (static_cast<Eigen::Index>(t.size()) != segments_.total())
        throw ShapeError("truth file has " + std::to_string(t.size()) + " rows for " +
                         std::to_string(segments_.total()) + " segments");
      return t;
    }
    if (std::any_of(segments_.labels.begin(), segments_.labels.end(), [](int l) { return l < 0; })) return {};
    std::vector<int> t;
    for (std::size_t i = 0; i < segments_.ids.size(); ++i) t.insert(t.end(), static_cast<std::size_t>(segments_.count[i]), segments_.labels[i]);
    return t;
  }

  void stage_classify() {
    const fs::path fid = work_ / "fidelity.csv", pred = work_ / "predictions.csv", diag = work_ / "diagnostics.csv";
    stage("classify", {fid, pred, diag}, [&] {
      const Eigen::Index n = segments_.total();
      mbo::LabelData labels;
      if (cfg_.fidelity_file) {
        current_ = *cfg_.fidelity_file;
        labels = read_fidelity(*cfg_.fidelity_file, n, cfg_.classes());
      } else {
        const auto t = truth();
        if (t.empty()) throw ParameterError("fidelity sampling needs ground truth (truth_labels or per-video labels)");
        current_.clear();
        labels = mbo::sample_fidelity(t, cfg_.classes(), cfg_.fidelity_fraction, cfg_.fidelity_seed);
      }
      if (labels.fidelity_count() == 0) throw ParameterError("no fidelity nodes");
      const auto rs = ranges();
      for (auto& w : mbo::batch_warnings(labels, rs)) summary_.warnings.push_back(std::move(w));

      std::vector<int> predicted(static_cast<std::size_t>(n));
      std::vector<mbo::MboResult> results;
      for (std::size_t b = 0; b < rs.size(); ++b) {
        const auto [begin, size] = rs[b];
        current_ = work_ / batch_name(b);
        const auto spectrum = graph::read_spectrum(current_);
        if (spectrum.nodes() != size) throw ShapeError("spectrum covers " + std::to_string(spectrum.nodes()) + " nodes, batch " + std::to_string(size));
        auto r = mbo::classify_batch(spectrum, labels.slice(begin, size), mbo::batch_mbo_params(cfg_.mbo, b));
        if (!r.converged)
          summary_.warnings.push_back("batch " + std::to_string(b) + " did not converge within " +
                                      std::to_string(cfg_.mbo.max_iter) + " iterations");
        const auto l = r.labels();
        std::copy(l.begin(), l.end(), predicted.begin() + begin);
        results.push_back(std::move(r));
      }
      current_ = fid;
      commit(fid, [&](const fs::path& p) { write_fidelity(labels, p); });
      current_ = pred;
      commit(pred, [&](const fs::path& p) { write_labels(predicted, p); });
      current_ = diag;
      commit(diag, [&](const fs::path& p) { write_diagnostics(results, p); });
    });
  }

  void stage_evaluate() {
    const fs::path plot = work_ / "segments.ppm", report = work_ / "report.json", csv = work_ / "confusion.csv",
                   image = work_ / "confusion.ppm";
    current_.clear();
    std::vector<int> t;
    try {
      t = truth();
    } catch (const std::exception& e) {
      throw StageError("evaluate", current_, e.what());
    }
    std::vector<fs::path> outputs{plot};
    if (!t.empty()) outputs.insert(outputs.end(), {report, csv, image});
    stage("evaluate", outputs, [&] {
      current_ = work_ / "predictions.csv";
      const auto predicted = read_labels(current_);
      current_ = plot;
      const auto bytes = encode_ppm(render_segment_plot(predicted, cfg_.palette, cfg_.plot_height, t));
      commit_text(plot, std::string(bytes.begin(), bytes.end()));
      if (t.empty()) return;
      if (cfg_.evaluation_mode == Config::EvalMode::HeldOut) {
        current_ = work_ / "fidelity.csv";
        const auto fid = read_fidelity(current_, segments_.total(), cfg_.classes());
        for (Eigen::Index i = 0; i < fid.nodes(); ++i)
          if (fid.is_fidelity(i)) t[static_cast<std::size_t>(i)] = mbo::kNoLabel;
      }
      current_.clear();
      const auto r = evaluate(predicted, t, cfg_.classes(), cfg_.eval_classes);
      json j = to_json(r, cfg_.class_names);
      j["evaluation_mode"] = cfg_.evaluation_mode == Config::EvalMode::All ? "all" : "held_out";
      current_ = report;
      commit_text(report, j.dump(2) + "\n");
      current_ = csv;
      commit(csv, [&](const fs::path& p) { emit_confusion_matrix(r, p, image); });
    });
  }

  const Config& cfg_;
  bool force_;
  fs::path work_;
  fs::path current_;
  SegmentIndex segments_;
  RunSummary summary_;
};

}  // namespace

int Config::segment_frames(double fps) const {
  if (dt) return *dt;
  return static_cast<int>(std::lround(*delta_t * fps));
}

Config parse_config(const json& j, const fs::path& base) {
  check_keys(j, {"work_dir", "class_names", "truth_labels", "eval_classes", "evaluation_mode", "videos", "flow",
                 "descriptor", "nmf", "window", "spectrum", "batch_size", "mbo", "fidelity", "plot"},
             "config");
  Config c;
  try {
    if (!j.contains("work_dir")) throw ParseError("config: 'work_dir' is required");
    c.work_dir = resolve(base, j["work_dir"].get<std::string>());
    read_opt(j, "class_names", c.class_names);
    if (c.class_names.empty()) throw ParseError("config: 'class_names' must list at least one class");
    if (j.contains("truth_labels") && !j["truth_labels"].is_null())
      c.truth_labels = resolve(base, j["truth_labels"].get<std::string>());
    read_opt(j, "eval_classes", c.eval_classes);
    std::string mode = "all";
    read_opt(j, "evaluation_mode", mode);
    if (mode == "all") c.evaluation_mode = Config::EvalMode::All;
    else if (mode == "held_out") c.evaluation_mode = Config::EvalMode::HeldOut;
    else throw ParseError("config: evaluation_mode must be 'all' or 'held_out'");

    if (!j.contains("videos") || !j["videos"].is_array() || j["videos"].empty())
      throw ParseError("config: 'videos' must be a non-empty array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j["videos"].size(); ++i) {
      c.videos.push_back(parse_video(j["videos"][i], base, i));
      if (!ids.insert(c.videos.back().id).second) throw ParseError("config: duplicate video id '" + c.videos.back().id + "'");
    }

    if (j.contains("flow")) {
      const json& f = j["flow"];
      check_keys(f, {"alpha", "iterations", "tol", "width", "height"}, "flow");
      read_opt(f, "alpha", c.flow.smoothness);
      read_opt(f, "iterations", c.flow.iterations);
      read_opt(f, "tol", c.flow.convergence_tol);
      read_opt(f, "width", c.frame_width);
      read_opt(f, "height", c.frame_height);
    }
    c.flow.validate();

    if (j.contains("descriptor")) {
      const json& d = j["descriptor"];
      check_keys(d, {"dx", "dy", "dt", "delta_t"}, "descriptor");
      read_opt(d, "dx", c.dx);
      read_opt(d, "dy", c.dy);
      if (d.contains("dt")) c.dt = d["dt"].get<int>();
      if (d.contains("delta_t")) c.delta_t = d["delta_t"].get<double>();
    }
    if (c.dt && c.delta_t) throw ParseError("descriptor: give either dt (frames) or delta_t (seconds), not both");
    if (!c.dt && !c.delta_t) c.dt = descriptor::DescriptorConfig{}.dt;
    if (c.delta_t && !(*c.delta_t > 0)) throw ParameterError("descriptor: delta_t must be positive");

    if (j.contains("nmf")) {
      const json& n = j["nmf"];
      check_keys(n, {"rank", "max_iters", "tol", "seed", "basis_in"}, "nmf");
      read_opt(n, "rank", c.nmf.rank);
      read_opt(n, "max_iters", c.nmf.max_iters);
      read_opt(n, "tol", c.nmf.tol);
      read_opt(n, "seed", c.nmf.seed);
      if (n.contains("basis_in") && !n["basis_in"].is_null()) c.basis_in = resolve(base, n["basis_in"].get<std::string>());
    }
    read_opt(j, "window", c.window);
    if (c.window < 1 || c.window % 2 == 0) throw ParameterError("window must be a positive odd integer");

    if (j.contains("spectrum")) {
      const json& s = j["spectrum"];
      check_keys(s, {"n_sample", "n_eig", "knn", "tau", "knn_reference", "seed", "landmark_only_da"}, "spectrum");
      read_opt(s, "n_sample", c.spectrum.n_sample);
      read_opt(s, "n_eig", c.spectrum.n_eig);
      read_opt(s, "seed", c.spectrum.seed);
      read_opt(s, "landmark_only_da", c.spectrum.landmark_only_da);
      if (s.contains("knn") && s.contains("tau")) throw ParseError("spectrum: give either knn or tau, not both");
      if (s.contains("tau")) c.spectrum.scales = graph::ScaleParams::global(s["tau"].get<double>());
      else {
        int k = 10;
        read_opt(s, "knn", k);
        std::string ref = "sampled";
        read_opt(s, "knn_reference", ref);
        if (ref != "sampled" && ref != "full") throw ParseError("spectrum: knn_reference must be 'sampled' or 'full'");
        c.spectrum.scales =
            graph::ScaleParams::local(k, ref == "full" ? graph::KnnReference::Full : graph::KnnReference::Sampled);
      }
    }
    if (j.contains("batch_size") && !j["batch_size"].is_null()) {
      c.batch_size = j["batch_size"].get<Eigen::Index>();
      if (*c.batch_size < 2) throw ParameterError("batch_size must be >= 2");
    }

    if (j.contains("mbo")) {
      const json& m = j["mbo"];
      check_keys(m, {"eta", "dt", "n_step", "max_iter", "seed"}, "mbo");
      read_opt(m, "eta", c.mbo.eta);
      read_opt(m, "dt", c.mbo.dt);
      read_opt(m, "n_step", c.mbo.n_step);
      read_opt(m, "max_iter", c.mbo.max_iter);
      read_opt(m, "seed", c.mbo.seed);
    }
    c.mbo.validate();

    if (j.contains("fidelity")) {
      const json& f = j["fidelity"];
      check_keys(f, {"fraction", "seed", "file"}, "fidelity");
      read_opt(f, "fraction", c.fidelity_fraction);
      read_opt(f, "seed", c.fidelity_seed);
      if (f.contains("file") && !f["file"].is_null()) c.fidelity_file = resolve(base, f["file"].get<std::string>());
    }
    if (!(c.fidelity_fraction > 0 && c.fidelity_fraction <= 1)) throw ParameterError("fidelity fraction must lie in (0, 1]");

    if (j.contains("plot")) {
      const json& p = j["plot"];
      check_keys(p, {"palette", "height"}, "plot");
      read_opt(p, "height", c.plot_height);
      if (p.contains("palette")) {
        c.palette.clear();
        for (const auto& s : p["palette"]) c.palette.push_back(parse_color(s.get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }

  for (int k : c.eval_classes)
    if (k < 0 || k >= c.classes()) throw ParameterError("eval class " + std::to_string(k) + " out of range");
  for (const auto& v : c.videos)
    if (v.label && (*v.label < 0 || *v.label >= c.classes()))
      throw ParameterError("video '" + v.id + "': label " + std::to_string(*v.label) + " out of range");
  if (static_cast<int>(c.palette.size()) < c.classes())
    throw ParameterError("palette has fewer colours than classes");
  return c;
}

Config load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& extension) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == extension) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

RunLock::RunLock(const fs::path& dir) : path_(dir / ".egograph.lock") {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    const int err = errno;
    if (err == EEXIST) throw IoError("work directory is locked by another run (" + path_.string() + ")");
    throw IoError("cannot create lock " + path_.string() + ": " + std::strerror(err));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

RunSummary run_pipeline(const Config& config, bool force) {
  try {
    fs::create_directories(config.work_dir);
  } catch (const fs::filesystem_error& e) {
    throw StageError("setup", config.work_dir, e.what());
  }
  std::optional<RunLock> lock;
  try {
    lock.emplace(config.work_dir);
  } catch (const Error& e) {
    throw StageError("setup", config.work_dir, e.what());
  }
  return Stages(config, force).run();
}

RunSummary run_pipeline(const fs::path& config_path, bool force) {
  Config c;
  try {
    c = load_config(config_path);
  } catch (const std::exception& e) {
    throw StageError("config", config_path, e.what());
  }
  return run_pipeline(c, force);
}

}  // namespace egograph::pipeline

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "egograph/binary_io.hpp"
#include "egograph/evaluation.hpp"
#include "egograph/figures.hpp"
#include "egograph/labels_io.hpp"
#include "egograph/matrix_io.hpp"
#include "egograph/pipeline.hpp"
#include "support.hpp"

using namespace egograph;
using namespace egograph::pipeline;
using nlohmann::json;
using testing_support::TempDir;

namespace {

std::vector<int> repeat(std::initializer_list<std::pair<int, int>> runs) {
  std::vector<int> out;
  for (auto [value, count] : runs) out.insert(out.end(), static_cast<std::size_t>(count), value);
  return out;
}

// 2x2 confusion [[3,1],[2,4]].
std::pair<std::vector<int>, std::vector<int>> two_class_case() {
  return {repeat({{0, 3}, {1, 1}, {0, 2}, {1, 4}}), repeat({{0, 4}, {1, 6}})};
}

json small_synthetic_config() {
  auto video = [](const std::string& id, int label, const std::string& pattern, int seed) {
    return json{{"id", id},
                {"label", label},
                {"synthetic",
                 {{"pattern", pattern}, {"fields", 40}, {"noise_sigma", 0.2}, {"seed", seed}, {"width", 128},
                  {"height", 64}}}};
  };
  return json{{"work_dir", "work"},
              {"class_names", {"right", "spin", "zoom"}},
              {"videos",
               {video("a", 0, "translate:2,0", 10), video("b", 1, "rotate:0.05", 20), video("c", 2, "zoom:0.03", 30)}},
              {"descriptor", {{"dx", 32}, {"dy", 32}, {"dt", 2}}},
              {"nmf", {{"rank", 5}, {"seed", 1}, {"max_iters", 100}}},
              {"window", 3},
              {"spectrum", {{"n_sample", 30}, {"n_eig", 10}, {"knn", 5}, {"seed", 2}}},
              {"mbo", {{"seed", 3}}},
              {"fidelity", {{"fraction", 0.2}, {"seed", 4}}}};
}

std::filesystem::path write_config(const TempDir& dir, const json& j) {
  const auto path = dir / "config.json";
  io::write_file(path, j.dump(2));
  return path;
}

}  // namespace

TEST(LabelsCsv, Format) {
  EXPECT_EQ(encode_labels({2, 0, -1}), "segment_index,class_id\n0,2\n1,0\n2,-1\n");
  EXPECT_EQ(decode_labels("segment_index,class_id\r\n1,5\r\n0,3\r\n"), (std::vector<int>{3, 5}));
}

TEST(LabelsCsv, RandomRoundTrips) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> l(static_cast<std::size_t>(rng() % 200));
    for (int& x : l) x = static_cast<int>(rng() % 15) - 1;
    EXPECT_EQ(decode_labels(encode_labels(l)), l);
  }
}

TEST(LabelsCsv, Errors) {
  EXPECT_THROW(decode_labels("index,class\n0,1\n"), ParseError);
  EXPECT_THROW(decode_labels("segment_index,class_id\n0,1\n0,2\n"), ParseError);
  EXPECT_THROW(decode_labels("segment_index,class_id\n0,1\n2,2\n"), ParseError);
  EXPECT_THROW(decode_labels("segment_index,class_id\n0,x\n"), ParseError);
  EXPECT_THROW(read_labels("/nonexistent/labels.csv"), IoError);
}

TEST(LabelsCsv, FidelityFileRoundTrip) {
  TempDir dir("fid");
  const mbo::LabelData l(3, {0, mbo::kNoLabel, 2, mbo::kNoLabel, 1});
  write_fidelity(l, dir / "f.csv");
  EXPECT_EQ(read_fidelity(dir / "f.csv", 5, 3).labels, l.labels);
  EXPECT_THROW(read_fidelity(dir / "f.csv", 4, 3), ParseError);
  EXPECT_THROW(read_fidelity(dir / "f.csv", 5, 2), ParameterError);
}

TEST(Evaluate, TwoClassConfusion) {
  const auto [pred, truth] = two_class_case();
  const auto r = evaluate(pred, truth, 2);
  EXPECT_EQ(r.confusion(0, 0), 3);
  EXPECT_EQ(r.confusion(0, 1), 1);
  EXPECT_EQ(r.confusion(1, 0), 2);
  EXPECT_EQ(r.confusion(1, 1), 4);
  EXPECT_NEAR(r.precision[0], 0.6, 1e-12);
  EXPECT_NEAR(r.recall[0], 0.75, 1e-12);
  EXPECT_NEAR(r.precision[1], 0.8, 1e-12);
  EXPECT_NEAR(r.recall[1], 4.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.accuracy, 0.7, 1e-12);
  EXPECT_NEAR(r.mean_precision, 0.7, 1e-12);
  EXPECT_EQ(r.total, 10);
}

TEST(Evaluate, PerfectPrediction) {
  const std::vector<int> l{0, 1, 2, 2, 1, 0, 3};
  const auto r = evaluate(l, l, 4);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.mean_precision, 1.0);
  EXPECT_EQ(r.mean_recall, 1.0);
  EXPECT_TRUE(r.confusion.isDiagonal());
}

TEST(Evaluate, UndefinedPrecisionFlagged) {
  const auto r = evaluate(std::vector<int>{0, 0, 0}, std::vector<int>{0, 1, 1}, 3);
  EXPECT_TRUE(r.precision_undefined[1]);
  EXPECT_EQ(r.precision[1], 0.0);
  EXPECT_TRUE(r.recall_undefined[2]);
  EXPECT_FALSE(r.recall_undefined[1]);
  const auto j = to_json(r, {"a", "b", "c"});
  EXPECT_EQ(j["classes"][1]["precision_undefined"], true);
  EXPECT_EQ(j["classes"][0]["name"], "a");
}

TEST(Evaluate, SkipsUnlabelledAndRestrictsMeans) {
  const auto r = evaluate(std::vector<int>{0, 1, 1, 0}, std::vector<int>{0, -1, 1, 1}, 2, {1});
  EXPECT_EQ(r.total, 3);
  EXPECT_NEAR(r.mean_recall, 0.5, 1e-12);
  EXPECT_NEAR(r.mean_precision, 1.0, 1e-12);
}

TEST(Evaluate, Errors) {
  EXPECT_THROW(evaluate(std::vector<int>{0}, std::vector<int>{0, 1}, 2), ShapeError);
  EXPECT_THROW(evaluate(std::vector<int>{2}, std::vector<int>{0}, 2), ParameterError);
  EXPECT_THROW(evaluate(std::vector<int>{0}, std::vector<int>{0}, 2, {5}), ParameterError);
}

TEST(Figures, SegmentPlotGeometry) {
  const auto img = render_segment_plot(std::vector<int>{0, 1, 2, 3}, default_palette(), 10);
  EXPECT_EQ(img.width, 4);
  EXPECT_EQ(img.height, 10);
  for (int x = 0; x < 4; ++x) EXPECT_EQ(img.pixel(x, 9), default_palette()[static_cast<std::size_t>(x)]);
  EXPECT_EQ(render_segment_plot(std::vector<int>(4000, 0), default_palette()).width, 4000);
  const auto with_truth = render_segment_plot(std::vector<int>{0, 1}, default_palette(), 5, std::vector<int>{1, -1});
  EXPECT_EQ(with_truth.height, 12);
  EXPECT_EQ(with_truth.pixel(0, 6), (Rgb{255, 255, 255}));
  EXPECT_EQ(with_truth.pixel(0, 7), default_palette()[1]);
}

TEST(Figures, SegmentPlotErrors) {
  EXPECT_THROW(render_segment_plot(std::vector<int>{}, default_palette()), EmptyOutputError);
  EXPECT_THROW(render_segment_plot(std::vector<int>{0, 2}, {Rgb{0, 0, 0}, Rgb{1, 1, 1}}), ParameterError);
  EXPECT_THROW(parse_color("#12345"), ParseError);
  EXPECT_EQ(parse_color("#ff0080"), (Rgb{255, 0, 128}));
}

TEST(Figures, PpmRoundTrip) {
  const auto img = render_segment_plot(std::vector<int>{0, 3, 5, 1}, default_palette(), 3);
  const auto back = decode_ppm(encode_ppm(img));
  EXPECT_EQ(back.width, img.width);
  EXPECT_EQ(back.height, img.height);
  EXPECT_EQ(back.rgb, img.rgb);
}

TEST(Figures, ConfusionOutputs) {
  const auto [pred, truth] = two_class_case();
  const auto r = evaluate(pred, truth, 2);
  EXPECT_EQ(confusion_csv(r), "3,1\n2,4");

  const std::vector<int> ident{0, 1, 2};
  const auto diag = render_confusion(evaluate(ident, ident, 3), 4);
  EXPECT_EQ(diag.width, 12);
  EXPECT_EQ(diag.pixel(1, 1), (Rgb{0, 0, 0}));
  EXPECT_EQ(diag.pixel(5, 1), (Rgb{255, 255, 255}));

  // Class 2 never appears in truth: its row stays white.
  const auto sparse = render_confusion(evaluate(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 3), 2);
  for (int x = 0; x < 6; ++x) EXPECT_EQ(sparse.pixel(x, 5), (Rgb{255, 255, 255}));
}

TEST(MatrixFile, RandomRoundTrips) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const auto rows = static_cast<Eigen::Index>(rng() % 20), cols = static_cast<Eigen::Index>(rng() % 20);
    const Eigen::MatrixXd m = testing_support::uniform_matrix(rows, cols, rng(), -1e6, 1e6);
    const auto back = io::decode_matrix(io::encode_matrix(m));
    ASSERT_EQ(back.rows(), rows);
    ASSERT_EQ(back.cols(), cols);
    EXPECT_TRUE(back == m);
  }
}

TEST(Config, ParsesAndResolvesPaths) {
  auto j = small_synthetic_config();
  j["truth_labels"] = "truth.csv";
  j["evaluation_mode"] = "held_out";
  const Config c = parse_config(j, "/data/run");
  EXPECT_EQ(c.work_dir, std::filesystem::path("/data/run/work"));
  EXPECT_EQ(*c.truth_labels, std::filesystem::path("/data/run/truth.csv"));
  EXPECT_EQ(c.evaluation_mode, Config::EvalMode::HeldOut);
  EXPECT_EQ(c.videos.size(), 3u);
  EXPECT_EQ(c.videos[1].kind, VideoSource::Kind::Synthetic);
  EXPECT_EQ(c.spectrum.n_eig, 10);
  EXPECT_EQ(c.segment_frames(30), 2);
}

TEST(Config, SegmentLengthFromSeconds) {
  auto j = small_synthetic_config();
  j["descriptor"] = {{"dx", 32}, {"dy", 32}, {"delta_t", 0.5}};
  EXPECT_EQ(parse_config(j, ".").segment_frames(30), 15);
}

TEST(Config, Errors) {
  auto j = small_synthetic_config();
  j["bogus"] = 1;
  EXPECT_THROW(parse_config(j, "."), Error);
  j = small_synthetic_config();
  j["videos"][0]["flo_dir"] = "x";
  EXPECT_THROW(parse_config(j, "."), Error);
  j = small_synthetic_config();
  j.erase("class_names");
  EXPECT_THROW(parse_config(j, "."), Error);
  TempDir dir("badcfg");
  io::write_file(dir / "config.json", "{not json");
  try {
    run_pipeline(dir / "config.json");
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
}

TEST(RunLock, SecondLockFails) {
  TempDir dir("lock");
  {
    RunLock a(dir.path());
    EXPECT_THROW(RunLock b(dir.path()), IoError);
  }
  EXPECT_NO_THROW(RunLock c(dir.path()));
}

TEST(RunPipeline, SyntheticEndToEndAndResume) {
  TempDir dir("run");
  const auto cfg = write_config(dir, small_synthetic_config());
  const auto first = run_pipeline(cfg);
  for (const auto& s : first.stages) EXPECT_FALSE(s.skipped && s.stage != "flow") << s.stage;
  const auto work = dir / "work";
  const auto pred = read_labels(work / "predictions.csv");
  ASSERT_EQ(pred.size(), 60u);
  for (int p : pred) EXPECT_TRUE(p >= 0 && p < 3);
  const auto X = io::read_matrix(work / "descriptor.gmd");
  EXPECT_EQ(X.cols(), 60);
  EXPECT_EQ(X.rows(), 4 * 2 * 8);
  for (const char* f : {"basis.gmd", "coefficients.gmd", "features.gmd", "spectrum_000.spc", "fidelity.csv",
                        "diagnostics.csv", "report.json", "confusion.csv", "confusion.ppm", "segments.ppm"})
    EXPECT_TRUE(std::filesystem::exists(work / f)) << f;
  const auto report = json::parse(io::read_file(work / "report.json"));
  EXPECT_EQ(report["total"], 60);

  const auto before = io::read_file(work / "predictions.csv");
  const auto second = run_pipeline(cfg);
  for (const auto& s : second.stages) EXPECT_TRUE(s.skipped) << s.stage;
  EXPECT_EQ(io::read_file(work / "predictions.csv"), before);

  const auto forced = run_pipeline(cfg, true);
  EXPECT_FALSE(forced.stages.back().skipped);
  EXPECT_EQ(io::read_file(work / "predictions.csv"), before);
}

TEST(RunPipeline, BatchingWarnsAboutMissingClasses) {
  TempDir dir("batch");
  auto j = small_synthetic_config();
  j["batch_size"] = 20;  // each batch holds a single video, hence a single class
  const auto summary = run_pipeline(write_config(dir, j));
  EXPECT_EQ(summary.warnings.size() >= 6u, true);
  EXPECT_TRUE(std::filesystem::exists(dir / "work" / "spectrum_002.spc"));
}

TEST(RunPipeline, FramesDirectoryVideos) {
  TempDir dir("frames");
  // Two 32x32 textured clips, one moving right and one moving down.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0, 1);
  flow::Frame tex(64, 64, 0.0);
  for (auto& v : tex.intensities) v = d(rng);
  for (int c = 0; c < 2; ++c) {
    const auto sub = dir / ("clip" + std::to_string(c));
    std::filesystem::create_directories(sub);
    for (int k = 0; k < 7; ++k) {
      flow::Frame f(32, 32, 0.0);
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const int sx = c == 0 ? x + 16 - k : x + 16, sy = c == 1 ? y + 16 - k : y + 16;
          f.at(x, y) = tex.at(sx, sy);
        }
      char name[32];
      std::snprintf(name, sizeof name, "%04d.pgm", k);
      flow::write_frame(f, sub / name, 255);
    }
  }
  json j{{"work_dir", "work"},
         {"class_names", {"right", "down"}},
         {"videos",
          {{{"id", "r"}, {"label", 0}, {"frames_dir", "clip0"}}, {{"id", "d"}, {"label", 1}, {"frames_dir", "clip1"}}}},
         {"flow", {{"width", 32}, {"height", 32}, {"iterations", 50}}},
         {"descriptor", {{"dx", 16}, {"dy", 16}, {"dt", 2}}},
         {"nmf", {{"rank", 2}}},
         {"spectrum", {{"n_sample", 6}, {"n_eig", 4}, {"knn", 2}}},
         {"fidelity", {{"fraction", 1.0}}}};
  run_pipeline(write_config(dir, j));
  EXPECT_EQ(list_files(dir / "work" / "flow" / "r", ".flo").size(), 6u);
  EXPECT_EQ(read_labels(dir / "work" / "predictions.csv").size(), 6u);

  std::filesystem::remove_all(dir / "clip1");
  try {
    run_pipeline(dir / "config.json", true);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "flow");
  }
}

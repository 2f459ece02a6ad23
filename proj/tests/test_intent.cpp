#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gazeforge/cli.hpp"
#include "gazeforge/imaging.hpp"
#include "gazeforge/intent.hpp"
#include "gazeforge/learn.hpp"
#include "gazeforge/rng.hpp"
#include "sample_rows.hpp"

using namespace gazeforge;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto d = fs::temp_directory_path() / "gf_intent_test";
  fs::create_directories(d);
  return d;
}

fs::path fresh_dir(const std::string& name) {
  auto d = temp_dir() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// run_cli with stdout/stderr swallowed so test logs stay readable
int run(std::vector<std::string> args) {
  std::ostringstream sink;
  auto* out = std::cout.rdbuf(sink.rdbuf());
  auto* err = std::cerr.rdbuf(sink.rdbuf());
  const int rc = run_cli(std::move(args));
  std::cout.rdbuf(out);
  std::cerr.rdbuf(err);
  return rc;
}

// identity standardization, decision value = values[0]
TrainedModel first_feature_svm() {
  TrainedModel m;
  m.family = Family::SVM_LINEAR;
  m.scaler.means.assign(8, 0.0);
  m.scaler.stds.assign(8, 1.0);
  m.w.assign(8, 0.0);
  m.w[0] = 1.0;
  m.b = 0.0;
  m.c = 1.0;
  return m;
}

FeatureVector row_of(std::array<double, 8> values) {
  FeatureVector fv;
  fv.values = values;
  return fv;
}

std::vector<Inference> split_inferences(int text, int image, const std::string& group) {
  std::vector<Inference> all;
  for (int i = 0; i < text + image; ++i) {
    Inference inf;
    inf.source = "s" + std::to_string(i);
    inf.label = i < text ? Label::TEXT : Label::IMAGE;
    inf.score = i < text ? 1.0 : -1.0;
    inf.group = group;
    all.push_back(inf);
  }
  return all;
}

double rmse_against(const GazeTrace& got, const GazeTrace& truth) {
  REQUIRE(got.samples.size() == truth.samples.size());
  double acc = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < got.samples.size(); ++i) {
    REQUIRE(got.samples[i].valid);
    const double dx = got.samples[i].x - truth.samples[i].x;
    const double dy = got.samples[i].y - truth.samples[i].y;
    acc += dx * dx + dy * dy;
    ++n;
  }
  return std::sqrt(acc / double(n));
}

}  // namespace

TEST_CASE("a hand-built linear model labels by margin sign") {
  const auto m = first_feature_svm();
  const auto pos = infer(m, row_of({2, 0, 0, 0, 0, 0, 0, 0}), "p", "G1");
  CHECK(pos.label == Label::TEXT);
  CHECK(pos.score == 2.0);
  CHECK(pos.source == "p");
  CHECK(pos.group == "G1");

  const auto neg = infer(m, row_of({-3, 0, 0, 0, 0, 0, 0, 0}));
  CHECK(neg.label == Label::IMAGE);
  CHECK(neg.score == -3.0);
}

TEST_CASE("inference is a pure function of the model and features") {
  const auto ds = gftest::reference_rows();
  const auto [rows, labels] = to_matrix(ds);
  const auto m = train_model(Family::RANDOM_FOREST, rows, labels);
  double ms = -1.0;
  const auto a = infer(m, ds.rows[3], "x", "g", &ms);
  const auto b = infer(m, ds.rows[3], "x", "g");
  CHECK(a == b);
  CHECK(ms >= 0.0);
}

TEST_CASE("a held-out sample lands on the right side of the micro-dataset") {
  const auto ds = gftest::reference_rows();
  auto [rows, labels] = to_matrix(ds);
  const auto held = ds.rows[0];  // a TEXT row
  rows.erase(rows.begin());
  labels.erase(labels.begin());
  const auto m = train_model(Family::SVM_LINEAR, rows, labels);
  CHECK(infer(m, held).label == Label::TEXT);
}

TEST_CASE("inference rows survive the CSV round trip") {
  std::vector<Inference> rows;
  rows.push_back({"cam0", Label::TEXT, 0.5, "G1"});
  rows.push_back({"cam1", Label::IMAGE, -1.25, ""});
  const auto path = (temp_dir() / "inf.csv").string();
  write_inferences_csv(path, rows);
  CHECK(read_inferences_csv(path) == rows);

  rows.push_back({"a,b", Label::TEXT, 0.0, ""});
  CHECK_THROWS_AS(write_inferences_csv(path, rows), std::invalid_argument);
}

TEST_CASE("relative interest reproduces the worked splits") {
  const auto a = relative_interest(split_inferences(9, 31, "G1"), "G1");
  CHECK(a.n_contents == 40);
  CHECK(std::abs(a.ri_text - 22.50) <= 1e-9);
  CHECK(std::abs(a.ri_image - 77.50) <= 1e-9);

  const auto b = relative_interest(split_inferences(17, 23, "G2"), "G2");
  CHECK(std::abs(b.ri_text - 42.50) <= 1e-9);
  CHECK(std::abs(b.ri_image - 57.50) <= 1e-9);

  const auto c = relative_interest(split_inferences(40, 0, "G3"), "G3");
  CHECK(c.ri_text == 100.0);
  CHECK(c.ri_image == 0.0);
}

TEST_CASE("relative interest is a permutation-invariant sum to one hundred") {
  Rng rng(40);
  for (int trial = 0; trial < 30; ++trial) {
    const int text = int(rng.below(20)), image = 1 + int(rng.below(20));
    auto list = split_inferences(text, image, "G");
    const auto base = relative_interest(list, "G");
    CHECK(std::abs(base.ri_text + base.ri_image - 100.0) <= 1e-9);
    rng.shuffle(list);
    const auto shuffled = relative_interest(list, "G");
    CHECK(shuffled.ri_text == base.ri_text);
    CHECK(shuffled.ri_image == base.ri_image);
  }
}

TEST_CASE("interest tables keep group order of first appearance") {
  auto list = split_inferences(1, 1, "B");
  auto more = split_inferences(2, 0, "A");
  list.insert(list.end(), more.begin(), more.end());
  list.push_back({"x", Label::IMAGE, -1.0, "B"});
  const auto table = relative_interest_table(list);
  REQUIRE(table.size() == 2);
  CHECK(table[0].group == "B");
  CHECK(table[0].n_contents == 3);
  CHECK(table[1].group == "A");
  CHECK(table[1].ri_text == 100.0);

  CHECK_THROWS_AS(relative_interest(list, "missing"), std::invalid_argument);
}

TEST_CASE("the interest CSV prints percentages with two decimals") {
  const auto table = relative_interest_table(split_inferences(9, 31, "G1"));
  CHECK(format_interest_csv(table) == "group,n,ri_text,ri_image\nG1,40,22.50,77.50\n");
}

TEST_CASE("histograms put a single row in exactly one bin") {
  GazeDataset ds;
  auto fv = row_of({1, 2, 3, 4, 5, 6, 7, 8});
  fv.label = Label::TEXT;
  ds.rows.push_back(fv);
  const auto hists = feature_histograms(ds, 5);
  REQUIRE(hists.size() == 8);  // IMAGE class absent
  for (const auto& h : hists) {
    CHECK(h.cls == Label::TEXT);
    CHECK(h.edges.size() == 6);
    long total = 0, nonzero = 0;
    for (const auto c : h.counts) {
      total += c;
      nonzero += c > 0;
    }
    CHECK(total == 1);
    CHECK(nonzero == 1);
  }
}

TEST_CASE("histogram counts add up to the class sizes over the pooled range") {
  const auto ds = synth_dataset(12, 5);
  const auto hists = feature_histograms(ds, 7);
  REQUIRE(hists.size() == 16);
  for (const auto& h : hists) {
    long total = 0;
    for (const auto c : h.counts) total += c;
    CHECK(total == 12);
    for (std::size_t b = 1; b < h.edges.size(); ++b) CHECK(h.edges[b] >= h.edges[b - 1]);
  }
  // both classes share each feature's pooled edges
  for (int f = 0; f < 8; ++f) CHECK(hists[2 * f].edges == hists[2 * f + 1].edges);
}

TEST_CASE("histograms reject bad input") {
  CHECK_THROWS_AS(feature_histograms(GazeDataset{}, 10), std::invalid_argument);
  GazeDataset ds;
  ds.rows.push_back(row_of({1, 1, 1, 1, 1, 1, 1, 1}));  // unlabeled
  CHECK_THROWS_AS(feature_histograms(ds, 10), std::invalid_argument);
  ds.rows[0].label = Label::TEXT;
  CHECK_THROWS_AS(feature_histograms(ds, 0), std::invalid_argument);
}

TEST_CASE("the scene renderer keeps the scripted pupils inside the eye patches") {
  FaceSceneSpec spec;
  for (const double rx : {0.0, 0.5, 1.0}) {
    spec.pupil_rx = spec.pupil_ry = rx;
    const auto [lc, rc] = scene_pupil_centers(spec);
    CHECK(lc[0] > spec.face.x);
    CHECK(rc[0] < spec.face.x + spec.face.width);
    CHECK(lc[1] == rc[1]);
    CHECK(lc[0] < rc[0]);
  }
  // the same spec renders the same bytes
  CHECK(render_face_scene(spec) == render_face_scene(spec));
  spec.noise_sigma = 2.0;
  spec.noise_seed = 9;
  CHECK(render_face_scene(spec) == render_face_scene(spec));
}

TEST_CASE("a scripted scene is recovered within tolerance") {
  const auto dir = fresh_dir("scene");
  SceneScript script;  // seed 11, 90 frames
  const auto [truth_left, truth_right] = render_scripted_frames(script, dir.string());

  auto cfg = scene_pipeline_config((dir / "face.xml").string(), (dir / "eye.xml").string());
  save_cascade(stub_face_cascade(), cfg.face_cascade);
  save_cascade(stub_eye_cascade(), cfg.eye_cascade);
  cfg.dump_dir = (dir / "dump").string();

  const auto frames = list_frames(dir.string());
  REQUIRE(frames.size() == 90);
  const auto result = run_pipeline(frames, cfg);

  CHECK(rmse_against(result.left, truth_left) <= 3.0);
  CHECK(rmse_against(result.right, truth_right) <= 3.0);
  CHECK(result.face.width > 48);

  for (const char* name : {"observations_left.csv", "observations_right.csv",
                           "trace_left.csv", "trace_right.csv"})
    CHECK(fs::exists(dir / "dump" / name));

  // a second pass over the same frames lands on the same features
  auto cfg2 = cfg;
  cfg2.dump_dir.clear();
  const auto again = run_pipeline(frames, cfg2);
  CHECK(again.features.values == result.features.values);
}

TEST_CASE("frames without a face abort during calibration") {
  const auto dir = fresh_dir("blank");
  char name[32];
  for (int t = 0; t < 35; ++t) {
    std::snprintf(name, sizeof name, "frame_%04d.pgm", t);
    save_pgm(GrayFrame(320, 240, 200), (dir / name).string());
  }
  auto cfg = scene_pipeline_config((dir / "face.xml").string(), (dir / "eye.xml").string());
  save_cascade(stub_face_cascade(), cfg.face_cascade);
  save_cascade(stub_eye_cascade(), cfg.eye_cascade);
  try {
    run_pipeline(list_frames(dir.string()), cfg);
    FAIL("expected a calibration error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("no face") != std::string::npos);
  }
}

TEST_CASE("frame listing sorts by name and rejects empty directories") {
  const auto dir = fresh_dir("frames");
  for (const char* name : {"c.pgm", "a.pgm", "b.pgm"})
    save_pgm(GrayFrame(4, 4, 0), (dir / name).string());
  fs::create_directories(dir / "sub");  // ignored
  const auto frames = list_frames(dir.string());
  REQUIRE(frames.size() == 3);
  CHECK(fs::path(frames[0]).filename() == "a.pgm");
  CHECK(fs::path(frames[2]).filename() == "c.pgm");

  CHECK_THROWS_AS(list_frames((dir / "sub").string()), std::runtime_error);
  CHECK_THROWS_AS(list_frames((dir / "a.pgm").string()), std::runtime_error);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}) == 2);
  CHECK(run({"bogus"}) == 2);
  CHECK(run({"train", "--nope"}) == 2);
  CHECK(run({"synth"}) == 2);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("the synth subcommand is deterministic per seed") {
  const auto dir = fresh_dir("cli_synth");
  const auto a = dir / "a.csv";
  const auto b = dir / "b.csv";
  CHECK(run({"synth", "dataset", "--per-class", "6", "--seed", "7", "--out", a.string()}) == 0);
  CHECK(run({"synth", "dataset", "--per-class", "6", "--seed", "7", "--out", b.string()}) == 0);
  CHECK(slurp(a) == slurp(b));

  // the environment variable stands in for --seed
  ::setenv("GAZEFORGE_SEED", "7", 1);
  const auto c = dir / "c.csv";
  CHECK(run({"synth", "dataset", "--per-class", "6", "--out", c.string()}) == 0);
  CHECK(slurp(a) == slurp(c));
  ::setenv("GAZEFORGE_SEED", "pardon", 1);
  CHECK(run({"synth", "dataset", "--per-class", "6", "--out", c.string()}) == 1);
  ::unsetenv("GAZEFORGE_SEED");
}

TEST_CASE("training on an empty dataset is a processing error") {
  const auto dir = fresh_dir("cli_empty");
  const auto csv = dir / "empty.csv";
  write_dataset(GazeDataset{}, csv.string());  // header only
  CHECK(run({"train", "--data", csv.string(), "--out", (dir / "m.json").string()}) == 1);
}

TEST_CASE("eval rejects fold counts that exceed a class") {
  const auto dir = fresh_dir("cli_eval");
  const auto csv = dir / "ten.csv";
  write_dataset(gftest::reference_rows(), csv.string());
  const auto report = dir / "report.json";
  CHECK(run({"eval", "--data", csv.string(), "--family", "svm", "--cv", "10x5", "--seed", "42",
             "--out", report.string()}) == 1);
  CHECK(run({"eval", "--data", csv.string(), "--family", "svm", "--cv", "2x5", "--seed", "42",
             "--out", report.string()}) == 0);
  CHECK(fs::exists(report));

  // byte-stable reruns once the timing field is pinned
  const auto second = dir / "report2.json";
  CHECK(run({"eval", "--data", csv.string(), "--family", "svm", "--cv", "2x5", "--seed", "42",
             "--out", report.string(), "--no-timing"}) == 0);
  CHECK(run({"eval", "--data", csv.string(), "--family", "svm", "--cv", "2x5", "--seed", "42",
             "--out", second.string(), "--no-timing"}) == 0);
  CHECK(slurp(report) == slurp(second));
}

TEST_CASE("featurize, train and infer close the loop") {
  const auto dir = fresh_dir("cli_loop");
  const auto traces = (dir / "traces").string();
  const auto feats = (dir / "feats.csv").string();
  const auto model = (dir / "svm.json").string();
  const auto inf = (dir / "inf.csv").string();
  CHECK(run({"synth", "traces", "--count", "5", "--seed", "31", "--duration", "12",
             "--out-dir", traces}) == 0);
  CHECK(run({"featurize", "--traces", traces, "--out", feats}) == 0);
  CHECK(run({"train", "--data", feats, "--family", "svm", "--out", model}) == 0);
  CHECK(run({"infer", "--model", model, "--data", feats, "--out", inf, "--group", "G1"}) == 0);

  // inferring on the training rows reproduces the training predictions
  const auto ds = read_dataset(feats);
  const auto m = load_model(model);
  const auto inferred = read_inferences_csv(inf);
  REQUIRE(inferred.size() == ds.rows.size());
  long train_hits = 0, infer_hits = 0;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const std::vector<double> row(ds.rows[i].values.begin(), ds.rows[i].values.end());
    train_hits += predict(m, row) == *ds.rows[i].label;
    infer_hits += inferred[i].label == *ds.rows[i].label;
    CHECK(inferred[i].group == "G1");
  }
  CHECK(infer_hits >= train_hits);

  // the report subcommand digests those inferences
  const auto interest = dir / "interest.csv";
  CHECK(run({"report", "--inferences", inf, "--out", interest.string()}) == 0);
  const auto text = slurp(interest);
  CHECK(text.rfind("group,n,ri_text,ri_image\nG1,10,", 0) == 0);
}

TEST_CASE("the report subcommand reproduces the worked interest split") {
  const auto dir = fresh_dir("cli_report");
  const auto inf = dir / "g1.csv";
  write_inferences_csv(inf.string(), split_inferences(9, 31, "G1"));
  const auto out = dir / "interest.csv";
  CHECK(run({"report", "--inferences", inf.string(), "--out", out.string()}) == 0);
  CHECK(slurp(out) == "group,n,ri_text,ri_image\nG1,40,22.50,77.50\n");

  CHECK(run({"report", "--inferences", inf.string(), "--data", inf.string()}) == 2);
}

TEST_CASE("importance reports require a forest model") {
  const auto dir = fresh_dir("cli_imp");
  const auto csv = dir / "rows.csv";
  write_dataset(gftest::reference_rows(), csv.string());
  const auto svm = dir / "svm.json";
  const auto rf = dir / "rf.json";
  CHECK(run({"train", "--data", csv.string(), "--family", "svm", "--out", svm.string()}) == 0);
  CHECK(run({"train", "--data", csv.string(), "--family", "rf", "--out", rf.string(),
             "--trees", "40", "--seed", "2"}) == 0);
  CHECK(run({"report", "--model", svm.string(), "--out", (dir / "i.csv").string()}) == 1);
  CHECK(run({"report", "--model", rf.string(), "--out", (dir / "i.csv").string()}) == 0);
  const auto text = slurp(dir / "i.csv");
  CHECK(text.rfind("feature,importance\nMAX_FC_R,", 0) == 0);
}

#include "gazeforge/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "gazeforge/detect.hpp"
#include "gazeforge/gazefeat.hpp"
#include "gazeforge/intent.hpp"
#include "gazeforge/learn.hpp"
#include "gazeforge/pupiltrack.hpp"
#include "text_util.hpp"

namespace gazeforge {

namespace {

namespace fs = std::filesystem;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           std::uint64_t fallback = 1) {
  if (flag) return *flag;
  if (const char* env = std::getenv("GAZEFORGE_SEED")) {
    const std::string text(env);
    std::size_t pos = 0;
    std::uint64_t value = 0;
    try {
      value = std::stoull(text, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != text.size())
      throw std::runtime_error("GAZEFORGE_SEED is not an unsigned integer: '" + text + "'");
    return value;
  }
  return fallback;
}

// "10x5" -> folds 10, repeats 5; a bare "10" means a single repeat
std::pair<int, int> parse_cv(const std::string& text) {
  const auto xpos = text.find('x');
  const long k = textio::to_long(text.substr(0, xpos), "cv folds");
  const long r =
      xpos == std::string::npos ? 1 : textio::to_long(text.substr(xpos + 1), "cv repeats");
  if (k < 1 || r < 1) throw std::runtime_error("--cv wants KxR with K,R >= 1");
  return {int(k), int(r)};
}

Label label_for_stem(const std::string& stem, const std::string& forced) {
  if (!forced.empty()) return label_from(forced);
  if (stem.rfind("read", 0) == 0) return Label::TEXT;
  if (stem.rfind("view", 0) == 0) return Label::IMAGE;
  throw std::runtime_error(stem +
                           ": name gives no read_/view_ prefix to derive a label; pass --label");
}

GazeDataset load_nonempty_dataset(const std::string& path) {
  auto ds = read_dataset(path);
  if (ds.rows.empty()) throw std::runtime_error(path + ": empty dataset");
  return ds;
}

std::vector<HyperParams> default_grid(Family family, const HyperParams& base) {
  std::vector<HyperParams> grid;
  auto with = [&](auto&& tweak) {
    HyperParams hp = base;
    tweak(hp);
    grid.push_back(hp);
  };
  switch (family) {
    case Family::KNN:
      for (int k : {1, 3, 5, 7, 9}) with([&](HyperParams& hp) { hp.knn_k = k; });
      break;
    case Family::GNB:
      for (double f : {1e-9, 1e-6, 1e-3}) with([&](HyperParams& hp) { hp.gnb_var_floor = f; });
      break;
    case Family::LOGREG:
    case Family::SVM_LINEAR:
      for (double c : {0.01, 0.1, 1.0, 10.0, 100.0}) with([&](HyperParams& hp) { hp.c = c; });
      break;
    case Family::RANDOM_FOREST:
      for (int trees : {50, 100, 200})
        for (int mtry : {2, 3})
          with([&](HyperParams& hp) {
            hp.rf_trees = trees;
            hp.rf_features = mtry;
          });
      break;
  }
  return grid;
}

std::string describe_point(Family family, const HyperParams& hp) {
  switch (family) {
    case Family::KNN:
      return "k=" + std::to_string(hp.knn_k);
    case Family::GNB:
      return "var_floor=" + textio::fmt(hp.gnb_var_floor);
    case Family::LOGREG:
    case Family::SVM_LINEAR:
      return "C=" + textio::fmt(hp.c);
    case Family::RANDOM_FOREST:
      return "trees=" + std::to_string(hp.rf_trees) +
             " mtry=" + std::to_string(hp.rf_features);
  }
  return "";
}

struct TracePair {
  std::string stem;
  fs::path left;
  fs::path right;
};

std::vector<TracePair> find_trace_pairs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error(dir + ": not a directory");
  const std::string suffix = "_left.csv";
  std::vector<TracePair> pairs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() <= suffix.size() || name.substr(name.size() - suffix.size()) != suffix)
      continue;
    TracePair p;
    p.stem = name.substr(0, name.size() - suffix.size());
    p.left = entry.path();
    p.right = entry.path().parent_path() / (p.stem + "_right.csv");
    if (!fs::exists(p.right))
      throw std::runtime_error(p.left.string() + " has no matching " + p.right.string());
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw std::runtime_error(dir + ": no *_left.csv trace files");
  std::sort(pairs.begin(), pairs.end(),
            [](const TracePair& a, const TracePair& b) { return a.stem < b.stem; });
  return pairs;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    textio::write_text_file(out_path, text);
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"gaze intention toolkit: pupil tracking, gaze features, TEXT/IMAGE classifiers"};
  app.require_subcommand(1);

  // ---- synth ----------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate synthetic fixtures");
  synth->require_subcommand(1);

  struct {
    int per_class = 100;
    std::optional<std::uint64_t> seed;
    std::string out;
    double duration = 20.0, fps = 30.0;
  } sd;
  auto* sd_cmd = synth->add_subcommand("dataset", "labeled feature CSV from synthetic traces");
  sd_cmd->add_option("--per-class", sd.per_class, "rows per label")->check(CLI::PositiveNumber);
  sd_cmd->add_option("--seed", sd.seed, "base seed (GAZEFORGE_SEED, then 1)");
  sd_cmd->add_option("--out", sd.out, "output CSV path")->required();
  sd_cmd->add_option("--duration", sd.duration, "trace length, seconds");
  sd_cmd->add_option("--fps", sd.fps, "sample rate");
  sd_cmd->callback([&] {
    const auto ds = synth_dataset(sd.per_class, resolve_seed(sd.seed), sd.duration, sd.fps);
    write_dataset(ds, sd.out);
    std::cout << "wrote " << ds.rows.size() << " rows to " << sd.out << "\n";
  });

  struct {
    int count = 10;
    std::optional<std::uint64_t> seed;
    std::string dir;
    double duration = 20.0, fps = 30.0;
  } st;
  auto* st_cmd = synth->add_subcommand("traces", "left/right gaze trace CSV pairs");
  st_cmd->add_option("--count", st.count, "pairs per activity kind")->check(CLI::PositiveNumber);
  st_cmd->add_option("--seed", st.seed, "base seed (GAZEFORGE_SEED, then 1)");
  st_cmd->add_option("--out-dir", st.dir, "output directory")->required();
  st_cmd->add_option("--duration", st.duration, "trace length, seconds");
  st_cmd->add_option("--fps", st.fps, "sample rate");
  st_cmd->callback([&] {
    const std::uint64_t base = resolve_seed(st.seed);
    fs::create_directories(st.dir);
    char name[48];
    for (int i = 0; i < st.count; ++i)
      for (const auto kind : {TraceKind::READING, TraceKind::VIEWING}) {
        SynthTraceConfig cfg;
        cfg.kind = kind;
        cfg.duration_s = st.duration;
        cfg.fps = st.fps;
        cfg.seed = base + std::uint64_t(i);
        const auto [left, right] = synth_trace(cfg);
        const char* prefix = kind == TraceKind::READING ? "read" : "view";
        std::snprintf(name, sizeof name, "%s_%04d_left.csv", prefix, i);
        write_trace_csv((fs::path(st.dir) / name).string(), left);
        std::snprintf(name, sizeof name, "%s_%04d_right.csv", prefix, i);
        write_trace_csv((fs::path(st.dir) / name).string(), right);
      }
    std::cout << "wrote " << 2 * st.count << " trace pairs to " << st.dir << "\n";
  });

  struct {
    int frames = 90;
    std::optional<std::uint64_t> seed;
    std::string dir;
    double fps = 30.0;
    double noise = 0.0;
  } sf;
  auto* sf_cmd =
      synth->add_subcommand("frames", "scripted face scene frames, cascades and truth traces");
  sf_cmd->add_option("--frames", sf.frames, "frame count")->check(CLI::PositiveNumber);
  sf_cmd->add_option("--seed", sf.seed, "script seed (GAZEFORGE_SEED, then 11)");
  sf_cmd->add_option("--out-dir", sf.dir, "output directory")->required();
  sf_cmd->add_option("--fps", sf.fps, "frame rate");
  sf_cmd->add_option("--noise", sf.noise, "gaussian pixel noise sigma");
  sf_cmd->callback([&] {
    SceneScript script;
    script.frames = sf.frames;
    script.fps = sf.fps;
    script.seed = resolve_seed(sf.seed, script.seed);
    script.scene.noise_sigma = sf.noise;
    script.scene.noise_seed = script.seed;
    const auto [left, right] = render_scripted_frames(script, sf.dir);
    write_trace_csv((fs::path(sf.dir) / "truth_left.csv").string(), left);
    write_trace_csv((fs::path(sf.dir) / "truth_right.csv").string(), right);
    save_cascade(stub_face_cascade(), (fs::path(sf.dir) / "face_cascade.xml").string());
    save_cascade(stub_eye_cascade(), (fs::path(sf.dir) / "eye_cascade.xml").string());
    std::cout << "wrote " << sf.frames << " frames to " << sf.dir << "\n";
  });

  // ---- featurize ------------------------------------------------------
  struct {
    std::string traces_dir, frames_dir, out, label;
    std::string face_xml, eye_xml, dump;
    double fps = 30.0;
    int calibration = 30;
    int min_face = 64;
    int rmin = 3, rmax = 7, pyramid = 0;
  } fz;
  auto* fz_cmd = app.add_subcommand("featurize", "turn trace pairs or frames into feature rows");
  auto* fz_traces = fz_cmd->add_option(
      "--traces", fz.traces_dir, "directory of <name>_left.csv/<name>_right.csv pairs");
  auto* fz_frames =
      fz_cmd->add_option("--frames", fz.frames_dir, "directory of ordered .pgm/.png frames");
  fz_traces->excludes(fz_frames);
  fz_cmd->add_option("--out", fz.out, "output feature CSV")->required();
  fz_cmd->add_option("--label", fz.label,
                     "TEXT or IMAGE (trace mode can also derive it from read_/view_ prefixes)");
  auto* fz_face = fz_cmd->add_option("--face-cascade", fz.face_xml, "face cascade XML");
  auto* fz_eye = fz_cmd->add_option("--eye-cascade", fz.eye_xml, "eye cascade XML");
  fz_cmd->add_option("--fps", fz.fps, "sample/frame rate");
  fz_cmd->add_option("--dump", fz.dump, "directory for intermediate observation/trace CSVs");
  fz_cmd->add_option("--calibration", fz.calibration, "frames allowed before the first face");
  fz_cmd->add_option("--min-face", fz.min_face, "smallest admitted face window, px");
  fz_cmd->add_option("--pupil-rmin", fz.rmin, "pupil radius lower bound, px");
  fz_cmd->add_option("--pupil-rmax", fz.rmax, "pupil radius upper bound, px");
  fz_cmd->add_option("--pyramid", fz.pyramid, "downscale steps before the circle transform");
  fz_frames->needs(fz_face);
  fz_frames->needs(fz_eye);
  fz_cmd->callback([&] {
    if (fz.traces_dir.empty() && fz.frames_dir.empty())
      throw CLI::RequiredError("featurize needs --traces or --frames");
    GazeDataset ds;
    if (!fz.traces_dir.empty()) {
      FeatureConfig fc;
      fc.fixation.fps = fz.fps;
      for (const auto& pair : find_trace_pairs(fz.traces_dir)) {
        const auto left = read_trace_csv(pair.left.string(), Eye::LEFT, fz.fps);
        const auto right = read_trace_csv(pair.right.string(), Eye::RIGHT, fz.fps);
        auto fv = extract_features(left, right, fc);
        fv.label = label_for_stem(pair.stem, fz.label);
        ds.rows.push_back(fv);
      }
      ds.source = fz.traces_dir;
    } else {
      if (fz.label.empty())
        throw CLI::RequiredError("featurize --frames needs --label (one row per directory)");
      PipelineConfig cfg = {};
      cfg.face_cascade = fz.face_xml;
      cfg.eye_cascade = fz.eye_xml;
      cfg.face_params.min_neighbors = 1;
      cfg.face_params.min_size = fz.min_face;
      cfg.eye_params.min_neighbors = 1;
      cfg.pupil.pyramid_levels = fz.pyramid;
      cfg.pupil.r_min = fz.rmin;
      cfg.pupil.r_max = fz.rmax;
      cfg.fps = fz.fps;
      cfg.calibration_frames = fz.calibration;
      cfg.dump_dir = fz.dump;
      auto result = run_pipeline(list_frames(fz.frames_dir), cfg);
      result.features.label = label_from(fz.label);
      ds.rows.push_back(result.features);
      ds.source = fz.frames_dir;
    }
    write_dataset(ds, fz.out);
    std::cout << "wrote " << ds.rows.size() << " rows to " << fz.out << "\n";
  });

  // shared classifier knobs
  struct HyperFlags {
    std::optional<double> c;
    std::optional<int> k, trees, mtry;
    std::optional<double> var_floor;

    void add_to(CLI::App* cmd) {
      cmd->add_option("--c", c, "SVM / logistic regularization weight");
      cmd->add_option("--k", k, "nearest-neighbor count");
      cmd->add_option("--trees", trees, "forest size");
      cmd->add_option("--mtry", mtry, "features sampled per split");
      cmd->add_option("--var-floor", var_floor, "naive-bayes variance floor fraction");
    }
    HyperParams apply(std::uint64_t seed) const {
      HyperParams hp;
      hp.rf_seed = seed;
      if (c) hp.c = *c;
      if (k) hp.knn_k = *k;
      if (trees) hp.rf_trees = *trees;
      if (mtry) hp.rf_features = *mtry;
      if (var_floor) hp.gnb_var_floor = *var_floor;
      return hp;
    }
  };

  // ---- train ----------------------------------------------------------
  struct {
    std::string data, out, family = "svm", cv = "10x5";
    std::optional<std::uint64_t> seed;
    bool grid = false;
    HyperFlags hyper;
  } tr;
  auto* tr_cmd = app.add_subcommand("train", "fit a classifier on a feature CSV");
  tr_cmd->add_option("--data", tr.data, "labeled feature CSV")->required();
  tr_cmd->add_option("--family", tr.family, "knn | gnb | logreg | svm | rf");
  tr_cmd->add_option("--out", tr.out, "model JSON path")->required();
  tr_cmd->add_flag("--grid", tr.grid, "pick hyper-parameters by cross-validated accuracy");
  tr_cmd->add_option("--cv", tr.cv, "KxR folds-by-repeats plan for --grid");
  tr_cmd->add_option("--seed", tr.seed, "shuffling/forest seed (GAZEFORGE_SEED, then 1)");
  tr.hyper.add_to(tr_cmd);
  tr_cmd->callback([&] {
    const auto ds = load_nonempty_dataset(tr.data);
    const auto [rows, labels] = to_matrix(ds);
    const Family family = family_from(tr.family);
    const std::uint64_t seed = resolve_seed(tr.seed);
    HyperParams hp = tr.hyper.apply(seed);
    if (tr.grid) {
      const auto [folds, repeats] = parse_cv(tr.cv);
      const auto plan = make_cv_plan(labels, folds, repeats, seed);
      const auto grid = default_grid(family, hp);
      const auto result = grid_search(family, grid, rows, labels, plan);
      hp = grid[result.best_index];
      std::cout << "grid: picked " << describe_point(family, hp) << " (mean accuracy "
                << textio::fmt(result.mean_accuracy[result.best_index]) << ")\n";
    }
    const auto model = train_model(family, rows, labels, hp);
    save_model(model, tr.out);
    long correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (predict(model, rows[i]) == labels[i]) ++correct;
    std::cout << family_name(family) << ": trained on " << rows.size()
              << " rows, training accuracy "
              << textio::fmt(double(correct) / double(rows.size())) << "\n";
  });

  // ---- eval -----------------------------------------------------------
  struct {
    std::string data, out, family = "svm", cv = "10x5";
    std::optional<std::uint64_t> seed;
    bool no_timing = false;
    HyperFlags hyper;
  } ev;
  auto* ev_cmd = app.add_subcommand("eval", "repeated stratified cross-validation report");
  ev_cmd->add_option("--data", ev.data, "labeled feature CSV")->required();
  ev_cmd->add_option("--family", ev.family, "knn | gnb | logreg | svm | rf");
  ev_cmd->add_option("--cv", ev.cv, "KxR folds-by-repeats plan");
  ev_cmd->add_option("--seed", ev.seed, "shuffling/forest seed (GAZEFORGE_SEED, then 1)");
  ev_cmd->add_option("--out", ev.out, "report JSON path")->required();
  ev_cmd->add_flag("--no-timing", ev.no_timing, "zero the timing field for byte-stable output");
  ev.hyper.add_to(ev_cmd);
  ev_cmd->callback([&] {
    const auto ds = load_nonempty_dataset(ev.data);
    const auto [rows, labels] = to_matrix(ds);
    const Family family = family_from(ev.family);
    const std::uint64_t seed = resolve_seed(ev.seed);
    const auto [folds, repeats] = parse_cv(ev.cv);
    const auto plan = make_cv_plan(labels, folds, repeats, seed);
    const auto report = evaluate(family, ev.hyper.apply(seed), rows, labels, plan);
    save_report(report, ev.out, !ev.no_timing);
    std::cout << family_name(family) << ": mean accuracy " << textio::fmt(report.mean_accuracy)
              << ", pooled AUC " << textio::fmt(report.pooled_auc) << " over " << report.n_folds
              << " folds\n";
  });

  // ---- infer ----------------------------------------------------------
  struct {
    std::string model, data, left, right, out, group, source;
    double fps = 30.0;
  } in;
  auto* in_cmd = app.add_subcommand("infer", "label feature rows or a trace pair with a model");
  in_cmd->add_option("--model", in.model, "model JSON from train")->required();
  auto* in_data = in_cmd->add_option("--data", in.data, "feature CSV (labels ignored)");
  auto* in_left = in_cmd->add_option("--left", in.left, "left-eye trace CSV");
  auto* in_right = in_cmd->add_option("--right", in.right, "right-eye trace CSV");
  in_cmd->add_option("--out", in.out, "inference CSV path")->required();
  in_cmd->add_option("--group", in.group, "group tag stamped on every inference");
  in_cmd->add_option("--source", in.source, "source id for trace mode");
  in_cmd->add_option("--fps", in.fps, "trace sample rate");
  in_data->excludes(in_left);
  in_left->needs(in_right);
  in_cmd->callback([&] {
    const auto model = load_model(in.model);
    std::vector<Inference> results;
    if (!in.data.empty()) {
      const auto ds = load_nonempty_dataset(in.data);
      const std::string stem = fs::path(in.data).stem().string();
      for (std::size_t i = 0; i < ds.rows.size(); ++i)
        results.push_back(
            infer(model, ds.rows[i], stem + "_" + std::to_string(i), in.group));
    } else if (!in.left.empty()) {
      const auto left = read_trace_csv(in.left, Eye::LEFT, in.fps);
      const auto right = read_trace_csv(in.right, Eye::RIGHT, in.fps);
      FeatureConfig fc;
      fc.fixation.fps = in.fps;
      const auto fv = extract_features(left, right, fc);
      const std::string source =
          in.source.empty() ? fs::path(in.left).stem().string() : in.source;
      results.push_back(infer(model, fv, source, in.group));
    } else {
      throw CLI::RequiredError("infer needs --data or --left/--right");
    }
    write_inferences_csv(in.out, results);
    long text = 0;
    for (const auto& r : results) text += r.label == Label::TEXT;
    std::cout << results.size() << " inferences: " << text << " TEXT, "
              << (long(results.size()) - text) << " IMAGE\n";
  });

  // ---- report ---------------------------------------------------------
  struct {
    std::string inferences, data, model, out;
    int bins = 10;
  } rp;
  auto* rp_cmd = app.add_subcommand("report", "derive analysis tables from earlier outputs");
  rp_cmd->add_option("--inferences", rp.inferences,
                     "inference CSV -> per-group relative interest table");
  rp_cmd->add_option("--data", rp.data, "feature CSV -> per-feature class histograms");
  rp_cmd->add_option("--model", rp.model, "forest model JSON -> feature importance table");
  rp_cmd->add_option("--out", rp.out, "output CSV (stdout when omitted)");
  rp_cmd->add_option("--bins", rp.bins, "histogram bin count")->check(CLI::PositiveNumber);
  rp_cmd->callback([&] {
    const int modes =
        int(!rp.inferences.empty()) + int(!rp.data.empty()) + int(!rp.model.empty());
    if (modes != 1)
      throw CLI::RequiredError("report needs exactly one of --inferences/--data/--model");
    std::string text;
    if (!rp.inferences.empty())
      text = format_interest_csv(relative_interest_table(read_inferences_csv(rp.inferences)));
    else if (!rp.data.empty())
      text = format_histograms_csv(feature_histograms(load_nonempty_dataset(rp.data), rp.bins));
    else
      text = format_importance_csv(gini_importance(load_model(rp.model)));
    emit(text, rp.out);
  });

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gazeforge: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gazeforge

#include "gazeforge/intent.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "gazeforge/rng.hpp"
#include "text_util.hpp"

namespace gazeforge {

namespace fs = std::filesystem;

Inference infer(const TrainedModel& model, const FeatureVector& fv, const std::string& source,
                const std::string& group, double* elapsed_ms) {
  const std::vector<double> row(fv.values.begin(), fv.values.end());
  const auto t0 = std::chrono::steady_clock::now();
  const double s = score(model, row);
  const auto t1 = std::chrono::steady_clock::now();
  if (elapsed_ms)
    *elapsed_ms =
        double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()) / 1e6;

  Inference inf;
  inf.source = source;
  inf.group = group;
  inf.score = s;
  const double cut =
      (model.family == Family::LOGREG || model.family == Family::SVM_LINEAR) ? 0.0 : 0.5;
  inf.label = s >= cut ? Label::TEXT : Label::IMAGE;
  return inf;
}

namespace {

void require_plain_field(const std::string& v, const char* what) {
  if (v.find(',') != std::string::npos || v.find('\n') != std::string::npos ||
      v.find('\r') != std::string::npos)
    throw std::invalid_argument(std::string(what) + " may not contain commas or newlines");
}

}  // namespace

void write_inferences_csv(const std::string& path, const std::vector<Inference>& rows) {
  std::string out = "source,label,score,group\n";
  for (const auto& r : rows) {
    require_plain_field(r.source, "source");
    require_plain_field(r.group, "group");
    out += r.source;
    out += ',';
    out += label_name(r.label);
    out += ',';
    out += textio::fmt(r.score);
    out += ',';
    out += r.group;
    out += '\n';
  }
  textio::write_text_file(path, out);
}

std::vector<Inference> read_inferences_csv(const std::string& path) {
  const auto lines = textio::read_lines(path);
  if (lines.empty() || lines[0] != "source,label,score,group")
    throw std::runtime_error(path + ": not an inference file");
  std::vector<Inference> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = textio::split(lines[i]);
    if (f.size() != 4) throw std::runtime_error(path + ": bad inference row " + lines[i]);
    Inference inf;
    inf.source = f[0];
    inf.label = label_from(f[1]);
    inf.score = textio::to_double(f[2], "score");
    inf.group = f[3];
    rows.push_back(std::move(inf));
  }
  return rows;
}

RelativeInterest relative_interest(const std::vector<Inference>& inferences,
                                   const std::string& group) {
  long n = 0, text = 0;
  for (const auto& inf : inferences) {
    if (inf.group != group) continue;
    ++n;
    if (inf.label == Label::TEXT) ++text;
  }
  if (n == 0) throw std::invalid_argument("no inferences carry group '" + group + "'");
  RelativeInterest ri;
  ri.group = group;
  ri.n_contents = n;
  ri.ri_text = 100.0 * double(text) / double(n);
  ri.ri_image = 100.0 * double(n - text) / double(n);
  return ri;
}

std::vector<RelativeInterest> relative_interest_table(
    const std::vector<Inference>& inferences) {
  std::vector<std::string> order;
  for (const auto& inf : inferences)
    if (std::find(order.begin(), order.end(), inf.group) == order.end())
      order.push_back(inf.group);
  std::vector<RelativeInterest> table;
  for (const auto& g : order) table.push_back(relative_interest(inferences, g));
  return table;
}

std::string format_interest_csv(const std::vector<RelativeInterest>& rows) {
  std::string out = "group,n,ri_text,ri_image\n";
  char buf[64];
  for (const auto& r : rows) {
    require_plain_field(r.group, "group");
    std::snprintf(buf, sizeof buf, "%s,%ld,%.2f,%.2f\n", r.group.c_str(), r.n_contents,
                  r.ri_text, r.ri_image);
    out += buf;
  }
  return out;
}

void write_interest_csv(const std::string& path, const std::vector<RelativeInterest>& rows) {
  textio::write_text_file(path, format_interest_csv(rows));
}

std::vector<FeatureHistogram> feature_histograms(const GazeDataset& ds, int bins) {
  if (ds.rows.empty()) throw std::invalid_argument("cannot histogram an empty dataset");
  if (bins < 1) throw std::invalid_argument("bins must be positive");
  for (const auto& r : ds.rows)
    if (!r.label) throw std::invalid_argument("dataset row carries no label");

  std::vector<FeatureHistogram> out;
  for (int f = 0; f < 8; ++f) {
    double lo = ds.rows[0].values[std::size_t(f)], hi = lo;
    for (const auto& r : ds.rows) {
      lo = std::min(lo, r.values[std::size_t(f)]);
      hi = std::max(hi, r.values[std::size_t(f)]);
    }
    const double width = (hi - lo) / double(bins);
    for (auto cls : {Label::TEXT, Label::IMAGE}) {
      bool present = false;
      for (const auto& r : ds.rows) present = present || *r.label == cls;
      if (!present) continue;
      FeatureHistogram h;
      h.feature = f;
      h.cls = cls;
      for (int b = 0; b <= bins; ++b) h.edges.push_back(lo + width * double(b));
      h.edges.back() = hi;  // guard the top edge against accumulation drift
      h.counts.assign(std::size_t(bins), 0);
      for (const auto& r : ds.rows) {
        if (*r.label != cls) continue;
        const double v = r.values[std::size_t(f)];
        long idx = width > 0.0 ? long((v - lo) / width) : 0;
        idx = std::clamp(idx, 0L, long(bins) - 1);
        h.counts[std::size_t(idx)]++;
      }
      out.push_back(std::move(h));
    }
  }
  return out;
}

std::string format_histograms_csv(const std::vector<FeatureHistogram>& histograms) {
  std::string out = "feature,class,bin_lo,bin_hi,count\n";
  for (const auto& h : histograms)
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out += kFeatureNames[std::size_t(h.feature)];
      out += ',';
      out += label_name(h.cls);
      out += ',';
      out += textio::fmt(h.edges[b]);
      out += ',';
      out += textio::fmt(h.edges[b + 1]);
      out += ',';
      out += std::to_string(h.counts[b]);
      out += '\n';
    }
  return out;
}

void write_histograms_csv(const std::string& path,
                          const std::vector<FeatureHistogram>& histograms) {
  textio::write_text_file(path, format_histograms_csv(histograms));
}

std::string format_importance_csv(const std::vector<double>& importance) {
  if (importance.size() != 8) throw std::invalid_argument("expected 8 importance values");
  std::string out = "feature,importance\n";
  for (std::size_t f = 0; f < 8; ++f) {
    out += kFeatureNames[f];
    out += ',';
    out += textio::fmt(importance[f]);
    out += '\n';
  }
  return out;
}

void write_importance_csv(const std::string& path, const std::vector<double>& importance) {
  textio::write_text_file(path, format_importance_csv(importance));
}

namespace {

GrayFrame crop(const GrayFrame& frame, const Rect& r) {
  GrayFrame out(r.width, r.height);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) out.at(x, y) = frame.at(r.x + x, r.y + y);
  return out;
}

Rect clip_to_frame(Rect r, const GrayFrame& frame) {
  const int x0 = std::clamp(r.x, 0, frame.width);
  const int y0 = std::clamp(r.y, 0, frame.height);
  const int x1 = std::clamp(r.x + r.width, x0, frame.width);
  const int y1 = std::clamp(r.y + r.height, y0, frame.height);
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace

PipelineResult run_pipeline(const std::vector<std::string>& frame_paths,
                            const PipelineConfig& cfg) {
  if (frame_paths.empty()) throw std::invalid_argument("no frames to process");
  if (cfg.calibration_frames < 1)
    throw std::invalid_argument("calibration window must cover at least one frame");
  const HaarCascade face_cascade = load_cascade(cfg.face_cascade);
  const HaarCascade eye_cascade = load_cascade(cfg.eye_cascade);

  PipelineResult result;
  bool have_face = false;

  for (std::size_t t = 0; t < frame_paths.size(); ++t) {
    const GrayFrame frame = load_frame(frame_paths[t]);

    const auto faces = detect_objects(frame, face_cascade, cfg.face_params);
    if (!faces.empty()) {
      result.face = faces[0];
      have_face = true;
    }
    if (!have_face) {
      if (long(t) + 1 >= cfg.calibration_frames)
        throw std::runtime_error("no face detected within the first " +
                                 std::to_string(cfg.calibration_frames) + " frames");
      // frames before the first sighting carry invalid observations
      result.left_obs.push_back({long(t), Eye::LEFT, 0, 0, 0, 0, false});
      result.right_obs.push_back({long(t), Eye::RIGHT, 0, 0, 0, 0, false});
      continue;
    }

    const auto [left_region, right_region] = estimate_eye_regions(result.face);
    auto locate = [&](const Rect& region, Eye eye) {
      Rect roi = clip_to_frame(region, frame);
      if (roi.width >= eye_cascade.window_width && roi.height >= eye_cascade.window_height) {
        const auto hits = detect_objects(crop(frame, roi), eye_cascade, cfg.eye_params);
        if (!hits.empty())
          roi = clip_to_frame(
              {roi.x + hits[0].x, roi.y + hits[0].y, hits[0].width, hits[0].height}, frame);
      }
      return detect_pupil(frame, roi, cfg.pupil, long(t), eye);
    };
    result.left_obs.push_back(locate(left_region, Eye::LEFT));
    result.right_obs.push_back(locate(right_region, Eye::RIGHT));
  }
  if (!have_face) throw std::runtime_error("no face detected in any frame");

  SmoothParams smooth = cfg.smooth;
  smooth.fps = cfg.fps;
  result.left = smooth_trace(result.left_obs, smooth);
  result.right = smooth_trace(result.right_obs, smooth);
  result.features = extract_features(result.left, result.right, cfg.features);

  if (!cfg.dump_dir.empty()) {
    fs::create_directories(cfg.dump_dir);
    const fs::path d(cfg.dump_dir);
    write_observations_csv((d / "observations_left.csv").string(), result.left_obs);
    write_observations_csv((d / "observations_right.csv").string(), result.right_obs);
    write_trace_csv((d / "trace_left.csv").string(), result.left);
    write_trace_csv((d / "trace_right.csv").string(), result.right);
  }
  return result;
}

std::vector<std::string> list_frames(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error(dir + " is not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".pgm" || ext == ".png") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::runtime_error(dir + " holds no frames");
  return paths;
}

namespace {

struct ScenePatches {
  Rect left, right;  // sclera patches, frame coordinates
};

ScenePatches scene_patches(const FaceSceneSpec& spec) {
  const auto [left_region, right_region] = estimate_eye_regions(spec.face);
  auto inset = [](const Rect& r) {
    return Rect{r.x + 2, r.y + 2, r.width - 4, r.height - 4};
  };
  return {inset(left_region), inset(right_region)};
}

std::array<double, 2> patch_pupil(const Rect& patch, const FaceSceneSpec& spec) {
  return {double(patch.x) + spec.pupil_rx * double(patch.width),
          double(patch.y) + spec.pupil_ry * double(patch.height)};
}

void fill_rect(GrayFrame& img, const Rect& r, std::uint8_t v) {
  for (int y = r.y; y < r.y + r.height; ++y)
    for (int x = r.x; x < r.x + r.width; ++x) img.at(x, y) = v;
}

void fill_disc(GrayFrame& img, double cx, double cy, double radius, std::uint8_t v) {
  const int x0 = std::max(0, int(std::floor(cx - radius)) - 1);
  const int x1 = std::min(img.width - 1, int(std::ceil(cx + radius)) + 1);
  const int y0 = std::max(0, int(std::floor(cy - radius)) - 1);
  const int y1 = std::min(img.height - 1, int(std::ceil(cy + radius)) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = double(x) - cx, dy = double(y) - cy;
      if (dx * dx + dy * dy <= radius * radius) img.at(x, y) = v;
    }
}

}  // namespace

GrayFrame render_face_scene(const FaceSceneSpec& spec) {
  if (spec.width < 32 || spec.height < 32)
    throw std::invalid_argument("scene too small to render");
  if (spec.face.x < 0 || spec.face.y < 0 || spec.face.x + spec.face.width > spec.width ||
      spec.face.y + spec.face.height > spec.height)
    throw std::invalid_argument("face rect escapes the scene");

  GrayFrame img(spec.width, spec.height, 200);
  fill_rect(img, spec.face, 90);
  const auto patches = scene_patches(spec);
  for (const auto* patch : {&patches.left, &patches.right}) {
    fill_rect(img, *patch, 230);
    const auto [cx, cy] = patch_pupil(*patch, spec);
    fill_disc(img, cx, cy, spec.pupil_radius, 30);
  }

  if (spec.noise_sigma > 0.0) {
    Rng rng(spec.noise_seed);
    for (auto& p : img.pixels) {
      const double v = double(p) + rng.normal(0.0, spec.noise_sigma);
      p = std::uint8_t(std::clamp(v, 0.0, 255.0));
    }
  }
  return img;
}

std::pair<std::array<double, 2>, std::array<double, 2>> scene_pupil_centers(
    const FaceSceneSpec& spec) {
  const auto patches = scene_patches(spec);
  return {patch_pupil(patches.left, spec), patch_pupil(patches.right, spec)};
}

HaarCascade stub_face_cascade() {
  // stage 1: the sclera band is brighter than the window as a whole
  // stage 2: the two patches outshine the skin strip between them, which
  //          rejects off-face windows that pass stage 1 on a single edge
  HaarCascade c;
  c.name = "scene_face";
  c.window_width = 24;
  c.window_height = 24;

  HaarNode band;
  band.rects.push_back({0, 0, 24, 24, -1.0});
  band.rects.push_back({3, 6, 18, 7, 1.0});
  band.threshold = 0.15;
  band.left_val = -1.0;
  band.right_val = 1.0;
  CascadeStage s1;
  s1.threshold = 0.0;
  s1.trees.push_back({{band}});
  c.stages.push_back(s1);

  HaarNode pair;
  pair.rects.push_back({11, 7, 2, 5, 0.0});  // weight recomputed against the gap
  pair.rects.push_back({4, 7, 7, 5, 1.0});
  pair.rects.push_back({13, 7, 7, 5, 1.0});
  pair.threshold = 0.20;
  pair.left_val = -1.0;
  pair.right_val = 1.0;
  CascadeStage s2;
  s2.threshold = 0.0;
  s2.trees.push_back({{pair}});
  c.stages.push_back(s2);
  return c;
}

HaarCascade stub_eye_cascade() {
  // a dark pupil centered on bright sclera drives the value negative
  HaarCascade c;
  c.name = "scene_eye";
  c.window_width = 12;
  c.window_height = 12;
  HaarNode node;
  node.rects.push_back({0, 0, 12, 12, -1.0});
  node.rects.push_back({3, 3, 6, 6, 1.0});
  node.threshold = -0.12;
  node.left_val = 1.0;  // pass on strong negatives
  node.right_val = -1.0;
  CascadeStage stage;
  stage.threshold = 0.0;
  stage.trees.push_back({{node}});
  c.stages.push_back(stage);
  return c;
}

std::pair<GazeTrace, GazeTrace> render_scripted_frames(const SceneScript& script,
                                                       const std::string& dir) {
  if (script.frames < 1) throw std::invalid_argument("script needs at least one frame");
  if (script.fps <= 0) throw std::invalid_argument("script needs a positive frame rate");
  fs::create_directories(dir);

  Rng rng(script.seed);
  GazeTrace left, right;
  left.eye = Eye::LEFT;
  right.eye = Eye::RIGHT;
  left.fps = right.fps = script.fps;

  // dwell-and-hop walk in patch-relative coordinates, kept away from the rim
  // so the full pupil disc stays on sclera
  double rx = rng.uniform(0.3, 0.7), ry = rng.uniform(0.3, 0.7);
  long hold = rng.range(8, 20);
  char name[32];
  for (int t = 0; t < script.frames; ++t) {
    if (hold == 0) {
      rx = rng.uniform(0.3, 0.7);
      ry = rng.uniform(0.3, 0.7);
      hold = rng.range(8, 20);
    }
    --hold;

    FaceSceneSpec spec = script.scene;
    spec.pupil_rx = rx;
    spec.pupil_ry = ry;
    std::snprintf(name, sizeof name, "frame_%04d.pgm", t);
    save_pgm(render_face_scene(spec), (fs::path(dir) / name).string());

    const auto [lc, rc] = scene_pupil_centers(spec);
    left.samples.push_back({long(t), lc[0], lc[1], true});
    right.samples.push_back({long(t), rc[0], rc[1], true});
  }
  return {left, right};
}

PipelineConfig scene_pipeline_config(const std::string& face_cascade_path,
                                     const std::string& eye_cascade_path) {
  PipelineConfig cfg;
  cfg.face_cascade = face_cascade_path;
  cfg.eye_cascade = eye_cascade_path;
  cfg.face_params.min_neighbors = 1;
  cfg.face_params.min_size = 64;  // an eye patch scaled up can mimic a tiny face
  cfg.eye_params.min_neighbors = 1;
  cfg.pupil.pyramid_levels = 0;  // the synthetic eye patches are already small
  cfg.pupil.r_min = 3;
  cfg.pupil.r_max = 7;
  return cfg;
}

}  // namespace gazeforge

#pragma once

// End-user layer: single-vector inference, group-level relative interest,
// feature histograms, and the frames-to-features pipeline.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gazeforge/detect.hpp"
#include "gazeforge/gazefeat.hpp"
#include "gazeforge/learn.hpp"
#include "gazeforge/pupiltrack.hpp"

namespace gazeforge {

struct Inference {
  std::string source;
  Label label = Label::TEXT;
  double score = 0.0;
  std::string group;  // free-form tag, empty when untagged

  bool operator==(const Inference&) const = default;
};

/// Standardize + predict through the stored model.  elapsed_ms, when given,
/// receives the wall time of the scoring call so repeated inferences stay
/// comparable without making Inference itself nondeterministic.
Inference infer(const TrainedModel& model, const FeatureVector& fv,
                const std::string& source = "", const std::string& group = "",
                double* elapsed_ms = nullptr);

void write_inferences_csv(const std::string& path, const std::vector<Inference>& rows);
std::vector<Inference> read_inferences_csv(const std::string& path);

struct RelativeInterest {
  std::string group;
  long n_contents = 0;
  double ri_text = 0.0;   // percent
  double ri_image = 0.0;  // percent
};

/// Share of TEXT vs IMAGE inferences carrying the tag; throws when none do.
RelativeInterest relative_interest(const std::vector<Inference>& inferences,
                                   const std::string& group);
/// One row per distinct tag, in first-appearance order.
std::vector<RelativeInterest> relative_interest_table(
    const std::vector<Inference>& inferences);
std::string format_interest_csv(const std::vector<RelativeInterest>& rows);
void write_interest_csv(const std::string& path, const std::vector<RelativeInterest>& rows);

struct FeatureHistogram {
  int feature = 0;  // column index into kFeatureNames
  Label cls = Label::TEXT;
  std::vector<double> edges;  // bins + 1 ascending edges over the pooled range
  std::vector<long> counts;   // per-bin row counts for this class
};

/// Equal-width histograms per (feature, class) over each feature's pooled
/// min-max across both classes.
std::vector<FeatureHistogram> feature_histograms(const GazeDataset& ds, int bins = 10);
std::string format_histograms_csv(const std::vector<FeatureHistogram>& histograms);
void write_histograms_csv(const std::string& path,
                          const std::vector<FeatureHistogram>& histograms);

std::string format_importance_csv(const std::vector<double>& importance);
void write_importance_csv(const std::string& path, const std::vector<double>& importance);

struct PipelineConfig {
  std::string face_cascade;
  std::string eye_cascade;
  DetectParams face_params{1.1, 1, 0, std::numeric_limits<int>::max()};
  DetectParams eye_params{1.1, 1, 0, std::numeric_limits<int>::max()};
  PupilConfig pupil;
  SmoothParams smooth;
  FeatureConfig features;
  double fps = 30.0;
  int calibration_frames = 30;  // a face must show up within this prefix
  std::string dump_dir;         // when set, intermediate CSVs are written here
};

struct PipelineResult {
  Rect face;  // face rectangle in effect on the last frame
  std::vector<PupilObservation> left_obs;
  std::vector<PupilObservation> right_obs;
  GazeTrace left;
  GazeTrace right;
  FeatureVector features;  // unlabeled
};

/// Frames to one feature vector: per frame detect the face (reusing the last
/// known face when a frame misses), cut eye regions, refine them with the eye
/// cascade when it fires, localize pupils, then smooth per eye and extract
/// features.  Throws when no face appears inside the calibration window or a
/// frame cannot be read.
PipelineResult run_pipeline(const std::vector<std::string>& frame_paths,
                            const PipelineConfig& cfg);

/// PGM/PNG files directly inside dir, sorted by name.
std::vector<std::string> list_frames(const std::string& dir);

// Synthetic scene support: a flat backdrop, a dark face square whose eye
// regions hold bright sclera patches with dark pupil discs.  The matching
// stub cascades key on exactly these contrasts, giving the pipeline an
// end-to-end drill with known ground truth.
struct FaceSceneSpec {
  int width = 320;
  int height = 240;
  Rect face{112, 72, 96, 96};
  double pupil_rx = 0.5;  // pupil center within each sclera patch, 0..1
  double pupil_ry = 0.5;
  double pupil_radius = 4.0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
};

GrayFrame render_face_scene(const FaceSceneSpec& spec);
/// Pupil centers of the two sclera patches in frame coordinates for a spec,
/// left region first.
std::pair<std::array<double, 2>, std::array<double, 2>> scene_pupil_centers(
    const FaceSceneSpec& spec);

HaarCascade stub_face_cascade();
HaarCascade stub_eye_cascade();

struct SceneScript {
  int frames = 90;
  double fps = 30.0;
  std::uint64_t seed = 11;
  FaceSceneSpec scene;
};

/// Renders frame_%04d.pgm into dir following a seeded dwell-and-hop pupil
/// walk; returns the scripted truth as left/right traces in frame
/// coordinates.
std::pair<GazeTrace, GazeTrace> render_scripted_frames(const SceneScript& script,
                                                       const std::string& dir);

/// Pipeline settings matched to the synthetic scene scale.
PipelineConfig scene_pipeline_config(const std::string& face_cascade_path,
                                     const std::string& eye_cascade_path);

}  // namespace gazeforge

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gazeforge/detect.hpp"
#include "gazeforge/imaging.hpp"

namespace gazeforge {

enum class Eye { LEFT, RIGHT };

const char* eye_name(Eye eye);
Eye eye_from(const std::string& name);

struct CircleCandidate {
  int cx = 0;
  int cy = 0;
  int r = 0;
  int votes = 0;
  bool operator==(const CircleCandidate&) const = default;
};

/// Circle Hough transform.  Sobel gradient magnitude >= edge_threshold marks
/// edge pixels; each votes for every center at every radius in [r_min, r_max].
/// Cells with votes >= vote_ratio * circumference survive, then a local
/// maximum filter (+-2 px center, +-1 radius) thins them.  Strongest first.
std::vector<CircleCandidate> hough_circles(const GrayFrame& img, int r_min, int r_max,
                                           double edge_threshold, double vote_ratio);

struct PupilObservation {
  long frame_index = 0;
  Eye eye = Eye::LEFT;
  double x = 0.0;     // full-frame coordinates
  double y = 0.0;
  double radius = 0.0;
  int votes = 0;
  bool valid = false;
};

struct PupilConfig {
  bool equalize = true;
  int threshold = 200;     // inverted-threshold cutoff: keeps pixels darker than 255-t
  int pyramid_levels = 1;  // downscale steps before the Hough transform
  int r_min = 6;           // radius bounds at the downscaled resolution
  int r_max = 25;
  double edge_threshold = 120.0;
  double vote_ratio = 0.35;
};

/// Pupil localization inside one eye region: equalize, threshold-invert,
/// pyramid downscale, Hough, then map the strongest circle back to full-frame
/// coordinates.  No surviving circle gives valid == false.
PupilObservation detect_pupil(const GrayFrame& frame, const Rect& eye_region,
                              const PupilConfig& cfg, long frame_index = 0,
                              Eye eye = Eye::LEFT);

// Constant-velocity Kalman filter on (px, py, vx, vy), dt of one frame.
// Process noise is the white-acceleration model scaled by q; measurement
// noise is r * identity on the observed position.
struct KalmanState {
  std::array<double, 4> x{};    // px, py, vx, vy
  std::array<double, 16> p{};   // covariance, row major
  double q = 1e-2;
  double r = 4.0;
};

KalmanState kalman_init(double px, double py, double q = 1e-2, double r = 4.0,
                        double p0 = 100.0);

/// One predict step plus, when a measurement is present, one update step.
/// Returns the new state and the posterior position estimate.
std::pair<KalmanState, std::array<double, 2>> kalman_step(
    const KalmanState& state, const std::optional<std::array<double, 2>>& measurement);

struct TraceSample {
  long frame_index = 0;
  double x = 0.0;
  double y = 0.0;
  bool valid = false;
};

struct GazeTrace {
  Eye eye = Eye::LEFT;
  double fps = 30.0;
  std::vector<TraceSample> samples;
};

struct SmoothParams {
  double q = 1e-2;
  double r = 4.0;
  int max_gap = 10;  // coast through up to this many missing samples
  double fps = 30.0;
};

/// Offline smoothing of a single-eye observation sequence.  Short dropout
/// runs are bridged by prediction; anything longer is emitted invalid (the
/// last good position is carried so coordinates stay finite) and the filter
/// restarts at the next hit.  Throws when no observation is valid.
GazeTrace smooth_trace(const std::vector<PupilObservation>& observations,
                       const SmoothParams& params = {});

void write_observations_csv(const std::string& path,
                            const std::vector<PupilObservation>& observations);
std::vector<PupilObservation> read_observations_csv(const std::string& path);

void write_trace_csv(const std::string& path, const GazeTrace& trace);
GazeTrace read_trace_csv(const std::string& path, Eye eye = Eye::LEFT, double fps = 30.0);

}  // namespace gazeforge

#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gazeforge/imaging.hpp"

namespace gazeforge {

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  bool operator==(const Rect&) const = default;
};

struct HaarRect {
  int x = 0, y = 0, w = 0, h = 0;
  double weight = 0.0;
};

// One decision node of a weak classifier.  A child index < 0 means that side
// is a leaf carrying the stored value; otherwise it points into the tree's
// node vector (always forward, so evaluation terminates).
struct HaarNode {
  std::vector<HaarRect> rects;  // 2 or 3 upright rectangles
  double threshold = 0.0;
  int left_child = -1;
  int right_child = -1;
  double left_val = 0.0;
  double right_val = 0.0;
};

struct WeakClassifier {
  std::vector<HaarNode> nodes;  // node 0 is the root
};

struct CascadeStage {
  double threshold = 0.0;
  std::vector<WeakClassifier> trees;
};

struct HaarCascade {
  std::string name = "cascade";
  int window_width = 0;   // base detection window
  int window_height = 0;
  std::vector<CascadeStage> stages;
};

/// Parses the classic OpenCV haar cascade XML (type_id "opencv-haar-classifier",
/// stump or tree weak classifiers).  Tilted features are rejected.
HaarCascade parse_cascade(const std::string& xml_text);
HaarCascade load_cascade(const std::string& path);
std::string serialize_cascade(const HaarCascade& cascade);
void save_cascade(const HaarCascade& cascade, const std::string& path);

/// Runs every stage on one window.  Feature sums are normalized by the window
/// standard deviation measured over the slightly inset central rectangle, the
/// same contrast normalization the stock cascades were trained with.
bool evaluate_window(const HaarCascade& cascade, const IntegralImage& ii, const Rect& window);

struct DetectParams {
  double scale_factor = 1.1;
  int min_neighbors = 3;
  int min_size = 0;  // smallest admitted window edge, px
  int max_size = std::numeric_limits<int>::max();
};

/// Every candidate window of the multi-scale scan, in scan order: scales grow
/// geometrically from the base window, stride is round(scale) clamped to >= 1.
std::vector<Rect> scan_windows(int frame_width, int frame_height, int base_width,
                               int base_height, const DetectParams& params);

/// Full detector: scan, evaluate, then neighbor grouping.  min_neighbors == 0
/// returns the raw passing windows in scan order.
std::vector<Rect> detect_objects(const GrayFrame& frame, const HaarCascade& cascade,
                                 const DetectParams& params);

/// Clusters similar rectangles; clusters with at least min_neighbors members
/// are averaged into one rectangle.  Results are ordered by cluster size
/// (largest first).  min_neighbors == 0 returns the input unchanged.
std::vector<Rect> group_rectangles(const std::vector<Rect>& rects, int min_neighbors);
std::vector<std::pair<Rect, int>> group_rectangles_sized(const std::vector<Rect>& rects,
                                                         int min_neighbors);

/// Fixed-fraction eye windows inside a detected face: each is 35% x 30% of the
/// face, inset 13% from the respective side and 25% from the top.
std::pair<Rect, Rect> estimate_eye_regions(const Rect& face);

}  // namespace gazeforge

#pragma once

// Shared fixtures for the detector tests: random stub cascades plus an
// independent reference detector that works straight off the pixels, no
// integral images.  The reference spells out the same window arithmetic the
// production code must honor, so any disagreement localizes a bug.

#include <cmath>
#include <vector>

#include "gazeforge/detect.hpp"
#include "gazeforge/imaging.hpp"
#include "gazeforge/rng.hpp"

namespace gftest {

using namespace gazeforge;

inline HaarRect random_haar_rect(Rng& rng, int base_w, int base_h) {
  HaarRect r;
  r.w = 1 + int(rng.below(std::uint64_t(base_w - 1)));
  r.h = 1 + int(rng.below(std::uint64_t(base_h - 1)));
  r.x = int(rng.below(std::uint64_t(base_w - r.w + 1)));
  r.y = int(rng.below(std::uint64_t(base_h - r.h + 1)));
  r.weight = rng.uniform(-3.0, 3.0);
  if (std::abs(r.weight) < 0.1) r.weight = 0.5;
  return r;
}

inline HaarNode random_haar_node(Rng& rng, int base_w, int base_h) {
  HaarNode n;
  const int nrects = 2 + int(rng.below(2));
  for (int i = 0; i < nrects; ++i) n.rects.push_back(random_haar_rect(rng, base_w, base_h));
  n.threshold = rng.normal(0.0, 0.05);
  n.left_val = rng.uniform() < 0.5 ? -1.0 : 1.0;
  n.right_val = -n.left_val;
  return n;
}

// Mix of stump and depth-2 weak classifiers, stage thresholds biased low so a
// healthy share of random windows passes.
inline HaarCascade random_stub_cascade(Rng& rng, int base_w = 12, int base_h = 12) {
  HaarCascade c;
  c.name = "stub";
  c.window_width = base_w;
  c.window_height = base_h;
  const int n_stages = 1 + int(rng.below(2));
  for (int s = 0; s < n_stages; ++s) {
    CascadeStage stage;
    const int n_trees = 1 + int(rng.below(3));
    for (int t = 0; t < n_trees; ++t) {
      WeakClassifier weak;
      if (rng.uniform() < 0.5) {
        weak.nodes.push_back(random_haar_node(rng, base_w, base_h));
      } else {
        HaarNode root = random_haar_node(rng, base_w, base_h);
        root.left_child = 1;
        root.right_child = 2;
        root.left_val = root.right_val = 0.0;  // unused once children exist
        weak.nodes.push_back(root);
        weak.nodes.push_back(random_haar_node(rng, base_w, base_h));
        weak.nodes.push_back(random_haar_node(rng, base_w, base_h));
      }
      stage.trees.push_back(weak);
    }
    stage.threshold = rng.uniform(-double(n_trees), 0.25 * n_trees);
    c.stages.push_back(stage);
  }
  return c;
}

inline double pixel_rect_sum(const GrayFrame& f, int x, int y, int w, int h, bool squared) {
  const int x0 = std::max(x, 0), y0 = std::max(y, 0);
  const int x1 = std::min(x + w, f.width), y1 = std::min(y + h, f.height);
  double s = 0;
  for (int yy = y0; yy < y1; ++yy)
    for (int xx = x0; xx < x1; ++xx) {
      const double v = f.at(xx, yy);
      s += squared ? v * v : v;
    }
  return s;
}

inline double clipped_area(const GrayFrame& f, int x, int y, int w, int h) {
  const int x0 = std::max(x, 0), y0 = std::max(y, 0);
  const int x1 = std::min(x + w, f.width), y1 = std::min(y + h, f.height);
  return double(std::max(0, x1 - x0)) * double(std::max(0, y1 - y0));
}

inline bool reference_window(const HaarCascade& c, const GrayFrame& f, const Rect& win) {
  const double sx = double(win.width) / c.window_width;
  const double sy = double(win.height) / c.window_height;
  const int ex = win.x + int(std::lround(sx));
  const int ey = win.y + int(std::lround(sy));
  const int ew = int(std::lround((c.window_width - 2) * sx));
  const int eh = int(std::lround((c.window_height - 2) * sy));
  const double area = clipped_area(f, ex, ey, ew, eh);
  const double inv_area = 1.0 / area;
  const double mean = pixel_rect_sum(f, ex, ey, ew, eh, false) * inv_area;
  const double var = pixel_rect_sum(f, ex, ey, ew, eh, true) * inv_area - mean * mean;
  const double var_norm = std::sqrt(std::max(var, 1.0));

  for (const auto& stage : c.stages) {
    double stage_sum = 0;
    for (const auto& tree : stage.trees) {
      int idx = 0;
      for (;;) {
        const HaarNode& node = tree.nodes[std::size_t(idx)];
        double value = 0, correction = 0;
        double area0 = 0;
        for (std::size_t k = 0; k < node.rects.size(); ++k) {
          const auto& r = node.rects[k];
          const int rx = win.x + int(std::lround(r.x * sx));
          const int ry = win.y + int(std::lround(r.y * sy));
          const int rw = int(std::lround(r.w * sx));
          const int rh = int(std::lround(r.h * sy));
          if (k == 0) {
            area0 = clipped_area(f, rx, ry, rw, rh);
          } else {
            const double wk = r.weight * inv_area;
            correction += wk * clipped_area(f, rx, ry, rw, rh);
            value += wk * pixel_rect_sum(f, rx, ry, rw, rh, false);
          }
        }
        if (area0 > 0) {
          const auto& r = node.rects[0];
          value += (-correction / area0) *
                   pixel_rect_sum(f, win.x + int(std::lround(r.x * sx)),
                                  win.y + int(std::lround(r.y * sy)),
                                  int(std::lround(r.w * sx)), int(std::lround(r.h * sy)), false);
        }
        const bool go_left = value < node.threshold * var_norm;
        const int child = go_left ? node.left_child : node.right_child;
        if (child < 0) {
          stage_sum += go_left ? node.left_val : node.right_val;
          break;
        }
        idx = child;
      }
    }
    if (stage_sum < stage.threshold) return false;
  }
  return true;
}

// Windows an exhaustive scan accepts, enumerated with plain loops.
inline std::vector<Rect> reference_detect(const HaarCascade& c, const GrayFrame& f,
                                          const DetectParams& p) {
  std::vector<Rect> out;
  for (double scale = 1.0;; scale *= p.scale_factor) {
    const int w = int(std::lround(c.window_width * scale));
    const int h = int(std::lround(c.window_height * scale));
    if (w > f.width || h > f.height) break;
    if (std::max(w, h) > p.max_size) break;
    if (std::min(w, h) < p.min_size) continue;
    const int stride = std::max(1, int(std::lround(scale)));
    for (int y = 0; y + h <= f.height; y += stride)
      for (int x = 0; x + w <= f.width; x += stride)
        if (reference_window(c, f, {x, y, w, h})) out.push_back({x, y, w, h});
  }
  return out;
}

inline GrayFrame noise_frame(int w, int h, std::uint64_t seed, int lo = 0, int hi = 255) {
  GrayFrame img(w, h);
  Rng rng(seed);
  for (auto& p : img.pixels) p = std::uint8_t(lo + long(rng.below(std::uint64_t(hi - lo + 1))));
  return img;
}

}  // namespace gftest

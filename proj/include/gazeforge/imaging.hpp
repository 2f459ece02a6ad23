#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gazeforge {

/// Single-channel 8-bit image, row major.
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayFrame() = default;
  GrayFrame(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill) {}

  std::uint8_t at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  bool empty() const { return width <= 0 || height <= 0; }

  bool operator==(const GrayFrame&) const = default;
};

/// Loads a PGM (binary P5) or 8-bit grayscale PNG, chosen by content.
GrayFrame load_frame(const std::string& path);
GrayFrame parse_pgm(const std::vector<std::uint8_t>& bytes);
GrayFrame parse_png(const std::vector<std::uint8_t>& bytes);
void save_pgm(const GrayFrame& img, const std::string& path);

// Summed-area tables over pixel values and squared values, so any axis-aligned
// rectangle sum costs four lookups.  Grid entry (x,y) holds the sum over
// [0,x) x [0,y); the grid is (width+1) x (height+1).
class IntegralImage {
 public:
  IntegralImage() = default;
  explicit IntegralImage(const GrayFrame& img);

  int width() const { return w_; }
  int height() const { return h_; }

  std::uint64_t entry(int x, int y) const { return sum_[std::size_t(y) * (w_ + 1) + x]; }
  std::uint64_t sq_entry(int x, int y) const { return sq_[std::size_t(y) * (w_ + 1) + x]; }

  std::uint64_t sum(int x, int y, int w, int h) const {
    return entry(x + w, y + h) + entry(x, y) - entry(x + w, y) - entry(x, y + h);
  }
  std::uint64_t sq_sum(int x, int y, int w, int h) const {
    return sq_entry(x + w, y + h) + sq_entry(x, y) - sq_entry(x + w, y) - sq_entry(x, y + h);
  }

 private:
  int w_ = 0, h_ = 0;
  std::vector<std::uint64_t> sum_, sq_;
};

/// Global histogram equalization.  A constant image comes back unchanged.
GrayFrame equalize_histogram(const GrayFrame& img);

/// out = 255 where (255 - in) >= threshold, else 0.  Dark input turns white.
GrayFrame threshold_invert(const GrayFrame& img, int threshold);

/// One level of a Gaussian pyramid: 5-tap binomial blur [1 4 6 4 1] in both
/// axes (reflect-101 borders), then keep even-indexed rows/columns.
/// Output is ceil(w/2) x ceil(h/2).
GrayFrame pyramid_down(const GrayFrame& img);

struct SyntheticEyeSpec {
  int width = 64;
  int height = 64;
  double center_x = 32.0;
  double center_y = 32.0;
  double radius = 10.0;
  std::uint8_t sclera = 200;
  std::uint8_t iris = 60;
  double occlusion = 0.0;    // fraction of the iris height hidden by the upper lid
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Flat sclera background, dark iris disc, optional lid band and Gaussian noise.
GrayFrame render_synthetic_eye(const SyntheticEyeSpec& spec);

}  // namespace gazeforge

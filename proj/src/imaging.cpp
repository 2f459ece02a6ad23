#include "gazeforge/imaging.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gazeforge/rng.hpp"

namespace gazeforge {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

// Next whitespace-delimited token after '#' comments, PGM style.
std::string pgm_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  while (pos < b.size()) {
    if (std::isspace(b[pos])) {
      ++pos;
    } else if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') ++pos;
  if (start == pos) throw std::runtime_error("pgm: truncated header");
  return std::string(b.begin() + start, b.begin() + pos);
}

int parse_dim(const std::string& tok, const char* what) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(tok, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("pgm: bad ") + what);
  }
  if (used != tok.size() || v <= 0 || v > 1 << 20)
    throw std::runtime_error(std::string("pgm: bad ") + what);
  return int(v);
}

}  // namespace

GrayFrame parse_pgm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (pgm_token(bytes, pos) != "P5") throw std::runtime_error("pgm: not binary P5");
  const int w = parse_dim(pgm_token(bytes, pos), "width");
  const int h = parse_dim(pgm_token(bytes, pos), "height");
  const int maxval = parse_dim(pgm_token(bytes, pos), "maxval");
  if (maxval != 255) throw std::runtime_error("pgm: only maxval 255 supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw std::runtime_error("pgm: missing header terminator");
  ++pos;  // single whitespace byte, then raster
  const std::size_t need = std::size_t(w) * std::size_t(h);
  if (bytes.size() - pos != need) throw std::runtime_error("pgm: payload size mismatch");
  GrayFrame img(w, h);
  std::memcpy(img.pixels.data(), bytes.data() + pos, need);
  return img;
}

void save_pgm(const GrayFrame& img, const std::string& path) {
  if (img.empty()) throw std::runtime_error("pgm: refusing to write empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

namespace {

std::uint32_t be32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 |
         std::uint32_t(p[2]) << 8 | std::uint32_t(p[3]);
}

std::vector<std::uint8_t> inflate_all(const std::vector<std::uint8_t>& in,
                                      std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf out_len = uLongf(expected);
  const int rc = uncompress(out.data(), &out_len, in.data(), uLong(in.size()));
  if (rc != Z_OK || out_len != expected)
    throw std::runtime_error("png: corrupt compressed stream");
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

}  // namespace

// Enough PNG to round-trip our own captures: 8-bit grayscale (color type 0),
// no interlace, standard filters.  Anything else is rejected loudly.
GrayFrame parse_png(const std::vector<std::uint8_t>& bytes) {
  static const std::uint8_t magic[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), magic, 8) != 0)
    throw std::runtime_error("png: bad signature");

  int w = 0, h = 0;
  bool seen_ihdr = false, seen_iend = false;
  std::vector<std::uint8_t> idat;

  std::size_t pos = 8;
  while (pos + 8 <= bytes.size() && !seen_iend) {
    const std::uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw std::runtime_error("png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* data = &bytes[pos + 8];
    const std::uint32_t stored_crc = be32(&bytes[pos + 8 + len]);
    std::uint32_t crc = std::uint32_t(crc32(0L, Z_NULL, 0));
    crc = std::uint32_t(crc32(crc, &bytes[pos + 4], len + 4));
    if (crc != stored_crc) throw std::runtime_error("png: chunk crc mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw std::runtime_error("png: bad IHDR");
      w = int(be32(data));
      h = int(be32(data + 4));
      const int bit_depth = data[8], color_type = data[9], interlace = data[12];
      if (w <= 0 || h <= 0) throw std::runtime_error("png: bad dimensions");
      if (bit_depth != 8 || color_type != 0)
        throw std::runtime_error("png: only 8-bit grayscale supported");
      if (interlace != 0) throw std::runtime_error("png: interlace not supported");
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || !seen_iend || idat.empty())
    throw std::runtime_error("png: missing required chunks");

  const std::size_t stride = std::size_t(w);
  const auto raw = inflate_all(idat, (stride + 1) * std::size_t(h));

  GrayFrame img(w, h);
  std::vector<std::uint8_t> prev(stride, 0);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[std::size_t(y) * (stride + 1)];
    const std::uint8_t* src = &raw[std::size_t(y) * (stride + 1) + 1];
    std::uint8_t* dst = &img.pixels[std::size_t(y) * stride];
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x > 0 ? dst[x - 1] : 0;
      const int b = prev[x];
      const int c = x > 0 ? prev[x - 1] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw std::runtime_error("png: unknown filter type");
      }
      dst[x] = std::uint8_t(v & 0xff);
    }
    std::memcpy(prev.data(), dst, stride);
  }
  return img;
}

GrayFrame load_frame(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return parse_pgm(bytes);
  if (bytes.size() >= 8 && bytes[0] == 137 && bytes[1] == 'P') return parse_png(bytes);
  throw std::runtime_error(path + ": not a P5 PGM or PNG");
}

IntegralImage::IntegralImage(const GrayFrame& img) : w_(img.width), h_(img.height) {
  if (img.empty()) throw std::invalid_argument("integral image of empty frame");
  const std::size_t gw = std::size_t(w_) + 1;
  sum_.assign(gw * (h_ + 1), 0);
  sq_.assign(gw * (h_ + 1), 0);
  for (int y = 0; y < h_; ++y) {
    std::uint64_t row = 0, row_sq = 0;
    for (int x = 0; x < w_; ++x) {
      const std::uint64_t v = img.at(x, y);
      row += v;
      row_sq += v * v;
      sum_[(y + 1) * gw + (x + 1)] = sum_[y * gw + (x + 1)] + row;
      sq_[(y + 1) * gw + (x + 1)] = sq_[y * gw + (x + 1)] + row_sq;
    }
  }
}

GrayFrame equalize_histogram(const GrayFrame& img) {
  if (img.empty()) throw std::invalid_argument("equalize_histogram: empty frame");
  std::array<std::uint64_t, 256> hist{};
  for (auto v : img.pixels) ++hist[v];

  std::array<std::uint64_t, 256> cdf{};
  std::uint64_t run = 0;
  for (int v = 0; v < 256; ++v) {
    run += hist[v];
    cdf[v] = run;
  }
  std::uint64_t cdf_min = 0;
  for (int v = 0; v < 256; ++v) {
    if (hist[v]) {
      cdf_min = cdf[v];
      break;
    }
  }
  const std::uint64_t n = img.pixels.size();
  if (n == cdf_min) return img;  // constant image, mapping would divide by zero

  std::array<std::uint8_t, 256> lut{};
  const double denom = double(n - cdf_min);
  for (int v = 0; v < 256; ++v) {
    const double t = double(cdf[v] - std::min(cdf[v], cdf_min)) / denom * 255.0;
    lut[v] = std::uint8_t(std::lround(std::clamp(t, 0.0, 255.0)));
  }
  GrayFrame out(img.width, img.height);
  for (std::size_t i = 0; i < n; ++i) out.pixels[i] = lut[img.pixels[i]];
  return out;
}

GrayFrame threshold_invert(const GrayFrame& img, int threshold) {
  if (img.empty()) throw std::invalid_argument("threshold_invert: empty frame");
  if (threshold < 0 || threshold > 255)
    throw std::invalid_argument("threshold_invert: threshold out of [0,255]");
  GrayFrame out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = (255 - img.pixels[i]) >= threshold ? 255 : 0;
  return out;
}

namespace {

// reflect-101 index: ...2 1 | 0 1 2 ... n-1 | n-2 n-3...
int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

GrayFrame pyramid_down(const GrayFrame& img) {
  if (img.empty()) throw std::invalid_argument("pyramid_down: empty frame");
  const int w = img.width, h = img.height;
  const int ow = (w + 1) / 2, oh = (h + 1) / 2;
  static const int k[5] = {1, 4, 6, 4, 1};

  // Horizontal pass at full height, sampled only at even x.  All integer, one
  // rounded division at the very end so the kernel separates exactly.
  std::vector<std::uint32_t> tmp(std::size_t(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int ox = 0; ox < ow; ++ox) {
      const int cx = 2 * ox;
      std::uint32_t acc = 0;
      for (int t = -2; t <= 2; ++t) acc += std::uint32_t(k[t + 2]) * img.at(mirror(cx + t, w), y);
      tmp[std::size_t(y) * ow + ox] = acc;
    }

  GrayFrame out(ow, oh);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const int cy = 2 * oy;
      std::uint32_t acc = 0;
      for (int t = -2; t <= 2; ++t)
        acc += std::uint32_t(k[t + 2]) * tmp[std::size_t(mirror(cy + t, h)) * ow + ox];
      out.at(ox, oy) = std::uint8_t((acc + 128) / 256);
    }
  return out;
}

GrayFrame render_synthetic_eye(const SyntheticEyeSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0)
    throw std::invalid_argument("render_synthetic_eye: bad dimensions");
  if (spec.radius <= 0) throw std::invalid_argument("render_synthetic_eye: bad radius");
  if (spec.occlusion < 0 || spec.occlusion > 1)
    throw std::invalid_argument("render_synthetic_eye: occlusion out of [0,1]");

  GrayFrame img(spec.width, spec.height, spec.sclera);
  const double r2 = spec.radius * spec.radius;
  // Upper lid hides rows above this line.
  const double lid_y = spec.center_y - spec.radius + spec.occlusion * 2.0 * spec.radius;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const double dx = x - spec.center_x, dy = y - spec.center_y;
      if (dx * dx + dy * dy <= r2 && double(y) >= lid_y) img.at(x, y) = spec.iris;
    }

  if (spec.noise_sigma > 0) {
    Rng rng(spec.seed);
    for (auto& p : img.pixels) {
      const double v = double(p) + rng.normal(0.0, spec.noise_sigma);
      p = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

}  // namespace gazeforge

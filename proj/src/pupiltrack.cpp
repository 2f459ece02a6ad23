#include "gazeforge/pupiltrack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "text_util.hpp"

namespace gazeforge {

const char* eye_name(Eye eye) { return eye == Eye::LEFT ? "left" : "right"; }

Eye eye_from(const std::string& name) {
  if (name == "left") return Eye::LEFT;
  if (name == "right") return Eye::RIGHT;
  throw std::runtime_error("unknown eye '" + name + "'");
}

namespace {

// Integer perimeter points of a circle of radius r around the origin,
// midpoint algorithm mirrored through all octants.
std::vector<std::pair<int, int>> circle_offsets(int r) {
  std::set<std::pair<int, int>> pts;
  int x = r, y = 0;
  int err = 1 - r;
  while (x >= y) {
    for (const auto& [a, b] : {std::pair{x, y}, {y, x}}) {
      pts.insert({a, b});
      pts.insert({-a, b});
      pts.insert({a, -b});
      pts.insert({-a, -b});
    }
    ++y;
    if (err < 0) {
      err += 2 * y + 1;
    } else {
      --x;
      err += 2 * (y - x) + 1;
    }
  }
  return {pts.begin(), pts.end()};
}

}  // namespace

std::vector<CircleCandidate> hough_circles(const GrayFrame& img, int r_min, int r_max,
                                           double edge_threshold, double vote_ratio) {
  if (img.empty()) throw std::invalid_argument("hough_circles: empty image");
  if (r_min < 1 || r_max < r_min) throw std::invalid_argument("hough_circles: bad radius range");
  if (vote_ratio <= 0.0 || vote_ratio > 1.0)
    throw std::invalid_argument("hough_circles: vote_ratio must be in (0,1]");
  if (edge_threshold < 0.0) throw std::invalid_argument("hough_circles: negative edge threshold");

  const int w = img.width, h = img.height;

  std::vector<std::pair<int, int>> edges;
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      const int gx = -img.at(x - 1, y - 1) + img.at(x + 1, y - 1) - 2 * img.at(x - 1, y) +
                     2 * img.at(x + 1, y) - img.at(x - 1, y + 1) + img.at(x + 1, y + 1);
      const int gy = -img.at(x - 1, y - 1) - 2 * img.at(x, y - 1) - img.at(x + 1, y - 1) +
                     img.at(x - 1, y + 1) + 2 * img.at(x, y + 1) + img.at(x + 1, y + 1);
      if (std::sqrt(double(gx) * gx + double(gy) * gy) >= edge_threshold)
        edges.emplace_back(x, y);
    }

  const int n_radii = r_max - r_min + 1;
  std::vector<std::vector<int>> acc;
  acc.resize(std::size_t(n_radii));
  for (int ri = 0; ri < n_radii; ++ri) {
    acc[std::size_t(ri)].assign(std::size_t(w) * h, 0);
    auto& a = acc[std::size_t(ri)];
    for (const auto& off : circle_offsets(r_min + ri))
      for (const auto& [ex, ey] : edges) {
        const int cx = ex + off.first, cy = ey + off.second;
        if (cx >= 0 && cx < w && cy >= 0 && cy < h) ++a[std::size_t(cy) * w + cx];
      }
  }

  std::vector<CircleCandidate> candidates;
  for (int ri = 0; ri < n_radii; ++ri) {
    const int r = r_min + ri;
    const double needed = vote_ratio * 2.0 * std::numbers::pi * r;
    const auto& a = acc[std::size_t(ri)];
    for (int cy = 0; cy < h; ++cy)
      for (int cx = 0; cx < w; ++cx) {
        const int v = a[std::size_t(cy) * w + cx];
        if (v > 0 && double(v) >= needed) candidates.push_back({cx, cy, r, v});
      }
  }

  // Local-maximum filter over a +-2 px, +-1 radius neighborhood.  Vote ties
  // break toward the smaller (r, cy, cx), which keeps the survivor set stable
  // under image translation.
  std::vector<CircleCandidate> out;
  for (const auto& c : candidates) {
    bool best = true;
    for (int r2 = std::max(r_min, c.r - 1); best && r2 <= std::min(r_max, c.r + 1); ++r2) {
      const auto& a = acc[std::size_t(r2 - r_min)];
      for (int dy = -2; best && dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const int nx = c.cx + dx, ny = c.cy + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const int v2 = a[std::size_t(ny) * w + nx];
          if (v2 > c.votes ||
              (v2 == c.votes &&
               std::tuple(r2, ny, nx) < std::tuple(c.r, c.cy, c.cx))) {
            best = false;
            break;
          }
        }
    }
    if (best) out.push_back(c);
  }

  std::sort(out.begin(), out.end(), [](const CircleCandidate& a, const CircleCandidate& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    return std::tuple(a.r, a.cy, a.cx) < std::tuple(b.r, b.cy, b.cx);
  });
  return out;
}

PupilObservation detect_pupil(const GrayFrame& frame, const Rect& eye_region,
                              const PupilConfig& cfg, long frame_index, Eye eye) {
  if (eye_region.width <= 0 || eye_region.height <= 0 || eye_region.x < 0 ||
      eye_region.y < 0 || eye_region.x + eye_region.width > frame.width ||
      eye_region.y + eye_region.height > frame.height)
    throw std::invalid_argument("detect_pupil: eye region outside frame");
  if (cfg.pyramid_levels < 0) throw std::invalid_argument("detect_pupil: negative pyramid levels");
  if (cfg.r_min < 1) throw std::invalid_argument("detect_pupil: r_min must be >= 1");

  PupilObservation obs;
  obs.frame_index = frame_index;
  obs.eye = eye;
  obs.x = eye_region.x + eye_region.width / 2.0;
  obs.y = eye_region.y + eye_region.height / 2.0;

  GrayFrame roi(eye_region.width, eye_region.height);
  for (int y = 0; y < roi.height; ++y)
    for (int x = 0; x < roi.width; ++x)
      roi.at(x, y) = frame.at(eye_region.x + x, eye_region.y + y);

  if (cfg.equalize) roi = equalize_histogram(roi);
  roi = threshold_invert(roi, cfg.threshold);
  for (int level = 0; level < cfg.pyramid_levels; ++level) {
    if (roi.width < 6 || roi.height < 6) return obs;  // nothing left to search
    roi = pyramid_down(roi);
  }
  if (roi.width < 3 || roi.height < 3) return obs;

  const int r_cap = std::min(roi.width, roi.height) / 2;
  const int r_max = std::min(cfg.r_max, r_cap);
  if (cfg.r_min > r_max) return obs;

  const auto circles = hough_circles(roi, cfg.r_min, r_max, cfg.edge_threshold, cfg.vote_ratio);
  if (circles.empty()) return obs;

  const double up = double(1 << cfg.pyramid_levels);
  obs.x = eye_region.x + circles[0].cx * up;
  obs.y = eye_region.y + circles[0].cy * up;
  obs.radius = circles[0].r * up;
  obs.votes = circles[0].votes;
  obs.valid = true;
  return obs;
}

namespace {

using Mat4 = std::array<double, 16>;
using Vec4 = std::array<double, 4>;

Mat4 mul(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) {
      const double aik = a[std::size_t(i * 4 + k)];
      if (aik == 0.0) continue;
      for (int j = 0; j < 4; ++j) c[std::size_t(i * 4 + j)] += aik * b[std::size_t(k * 4 + j)];
    }
  return c;
}

Mat4 transpose(const Mat4& a) {
  Mat4 t{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t[std::size_t(j * 4 + i)] = a[std::size_t(i * 4 + j)];
  return t;
}

Vec4 mulv(const Mat4& a, const Vec4& v) {
  Vec4 out{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out[std::size_t(i)] += a[std::size_t(i * 4 + j)] * v[std::size_t(j)];
  return out;
}

constexpr Mat4 kTransition = {1, 0, 1, 0,   // px += vx
                              0, 1, 0, 1,   // py += vy
                              0, 0, 1, 0,
                              0, 0, 0, 1};

Mat4 process_noise(double q) {
  Mat4 m{};
  // white-acceleration model, dt = 1: [[1/4, 1/2], [1/2, 1]] per axis
  m[0] = m[5] = 0.25 * q;
  m[2] = m[7] = m[8] = m[13] = 0.5 * q;
  m[10] = m[15] = q;
  return m;
}

}  // namespace

KalmanState kalman_init(double px, double py, double q, double r, double p0) {
  if (!std::isfinite(px) || !std::isfinite(py))
    throw std::invalid_argument("kalman_init: non-finite position");
  if (q <= 0 || r <= 0 || p0 <= 0)
    throw std::invalid_argument("kalman_init: noise terms must be positive");
  KalmanState s;
  s.x = {px, py, 0.0, 0.0};
  s.q = q;
  s.r = r;
  for (int i = 0; i < 4; ++i) s.p[std::size_t(i * 4 + i)] = p0;
  return s;
}

std::pair<KalmanState, std::array<double, 2>> kalman_step(
    const KalmanState& state, const std::optional<std::array<double, 2>>& measurement) {
  KalmanState s = state;

  // predict
  s.x = mulv(kTransition, s.x);
  s.p = mul(mul(kTransition, s.p), transpose(kTransition));
  const Mat4 q = process_noise(s.q);
  for (std::size_t i = 0; i < 16; ++i) s.p[i] += q[i];

  if (measurement) {
    const auto& z = *measurement;
    if (!std::isfinite(z[0]) || !std::isfinite(z[1]))
      throw std::invalid_argument("kalman_step: non-finite measurement");

    // S = HPH' + R is the top-left 2x2 of P plus r on the diagonal
    const double s00 = s.p[0] + s.r, s01 = s.p[1];
    const double s10 = s.p[4], s11 = s.p[5] + s.r;
    const double det = s00 * s11 - s01 * s10;
    if (det == 0.0) throw std::runtime_error("kalman_step: singular innovation covariance");
    const double i00 = s11 / det, i01 = -s01 / det, i10 = -s10 / det, i11 = s00 / det;

    // K = P H' S^-1, a 4x2 built from the first two columns of P
    double k[4][2];
    for (int i = 0; i < 4; ++i) {
      const double p0 = s.p[std::size_t(i * 4)], p1 = s.p[std::size_t(i * 4 + 1)];
      k[i][0] = p0 * i00 + p1 * i10;
      k[i][1] = p0 * i01 + p1 * i11;
    }

    const double ry = z[0] - s.x[0], rz = z[1] - s.x[1];
    for (int i = 0; i < 4; ++i) s.x[std::size_t(i)] += k[i][0] * ry + k[i][1] * rz;

    // P = (I - KH) P; KH only touches the first two columns of the update
    Mat4 np{};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double v = s.p[std::size_t(i * 4 + j)];
        v -= k[i][0] * s.p[std::size_t(0 * 4 + j)] + k[i][1] * s.p[std::size_t(1 * 4 + j)];
        np[std::size_t(i * 4 + j)] = v;
      }
    // numerical hygiene: covariance stays symmetric
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        const double m = 0.5 * (np[std::size_t(i * 4 + j)] + np[std::size_t(j * 4 + i)]);
        np[std::size_t(i * 4 + j)] = np[std::size_t(j * 4 + i)] = m;
      }
    s.p = np;
  }
  return {s, {s.x[0], s.x[1]}};
}

GazeTrace smooth_trace(const std::vector<PupilObservation>& observations,
                       const SmoothParams& params) {
  if (observations.empty()) throw std::invalid_argument("smooth_trace: no observations");
  if (params.max_gap < 0) throw std::invalid_argument("smooth_trace: negative max_gap");
  for (std::size_t i = 1; i < observations.size(); ++i) {
    if (observations[i].frame_index <= observations[i - 1].frame_index)
      throw std::invalid_argument("smooth_trace: frame indices must increase");
    if (observations[i].eye != observations[0].eye)
      throw std::invalid_argument("smooth_trace: mixed eyes in one trace");
  }

  std::size_t first = 0;
  while (first < observations.size() && !observations[first].valid) ++first;
  if (first == observations.size())
    throw std::runtime_error("smooth_trace: no valid observation in trace");

  GazeTrace trace;
  trace.eye = observations[0].eye;
  trace.fps = params.fps;
  trace.samples.resize(observations.size());

  // leading dropouts pin to the first fix, marked invalid
  for (std::size_t i = 0; i < first; ++i)
    trace.samples[i] = {observations[i].frame_index, observations[first].x,
                        observations[first].y, false};

  KalmanState state = kalman_init(observations[first].x, observations[first].y, params.q,
                                  params.r);
  trace.samples[first] = {observations[first].frame_index, observations[first].x,
                          observations[first].y, true};
  double last_x = observations[first].x, last_y = observations[first].y;

  std::size_t i = first + 1;
  while (i < observations.size()) {
    if (observations[i].valid) {
      auto [next, pos] = kalman_step(state, std::array<double, 2>{observations[i].x,
                                                                  observations[i].y});
      state = next;
      last_x = pos[0];
      last_y = pos[1];
      trace.samples[i] = {observations[i].frame_index, pos[0], pos[1], true};
      ++i;
      continue;
    }

    std::size_t run_end = i;
    while (run_end < observations.size() && !observations[run_end].valid) ++run_end;
    const std::size_t run = run_end - i;

    if (run <= std::size_t(params.max_gap)) {
      // bridge the gap on the motion model alone
      for (; i < run_end; ++i) {
        auto [next, pos] = kalman_step(state, std::nullopt);
        state = next;
        last_x = pos[0];
        last_y = pos[1];
        trace.samples[i] = {observations[i].frame_index, pos[0], pos[1], true};
      }
    } else {
      // too long to trust the model: emit invalid, then restart at the next fix
      for (; i < run_end; ++i)
        trace.samples[i] = {observations[i].frame_index, last_x, last_y, false};
      if (run_end < observations.size()) {
        state = kalman_init(observations[run_end].x, observations[run_end].y, params.q,
                            params.r);
        last_x = observations[run_end].x;
        last_y = observations[run_end].y;
        trace.samples[run_end] = {observations[run_end].frame_index, last_x, last_y, true};
        i = run_end + 1;
      }
    }
  }
  return trace;
}

void write_observations_csv(const std::string& path,
                            const std::vector<PupilObservation>& observations) {
  std::ostringstream os;
  os << "frame,eye,x,y,radius,votes,valid\n";
  for (const auto& o : observations)
    os << o.frame_index << ',' << eye_name(o.eye) << ',' << textio::fmt(o.x) << ','
       << textio::fmt(o.y) << ',' << textio::fmt(o.radius) << ',' << o.votes << ','
       << (o.valid ? 1 : 0) << '\n';
  textio::write_text_file(path, os.str());
}

std::vector<PupilObservation> read_observations_csv(const std::string& path) {
  const auto lines = textio::read_lines(path);
  if (lines.empty() || lines[0] != "frame,eye,x,y,radius,votes,valid")
    throw std::runtime_error(path + ": missing observation header");
  std::vector<PupilObservation> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = textio::split(lines[i]);
    if (f.size() != 7) throw std::runtime_error(path + ": bad observation row");
    PupilObservation o;
    o.frame_index = textio::to_long(f[0], "frame");
    o.eye = eye_from(f[1]);
    o.x = textio::to_double(f[2], "x");
    o.y = textio::to_double(f[3], "y");
    o.radius = textio::to_double(f[4], "radius");
    o.votes = int(textio::to_long(f[5], "votes"));
    const long v = textio::to_long(f[6], "valid");
    if (v != 0 && v != 1) throw std::runtime_error(path + ": valid must be 0 or 1");
    o.valid = v == 1;
    out.push_back(o);
  }
  return out;
}

void write_trace_csv(const std::string& path, const GazeTrace& trace) {
  std::ostringstream os;
  os << "frame,x,y,valid\n";
  for (const auto& s : trace.samples)
    os << s.frame_index << ',' << textio::fmt(s.x) << ',' << textio::fmt(s.y) << ','
       << (s.valid ? 1 : 0) << '\n';
  textio::write_text_file(path, os.str());
}

GazeTrace read_trace_csv(const std::string& path, Eye eye, double fps) {
  const auto lines = textio::read_lines(path);
  if (lines.empty() || lines[0] != "frame,x,y,valid")
    throw std::runtime_error(path + ": missing trace header");
  GazeTrace trace;
  trace.eye = eye;
  trace.fps = fps;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = textio::split(lines[i]);
    if (f.size() != 4) throw std::runtime_error(path + ": bad trace row");
    TraceSample s;
    s.frame_index = textio::to_long(f[0], "frame");
    s.x = textio::to_double(f[1], "x");
    s.y = textio::to_double(f[2], "y");
    const long v = textio::to_long(f[3], "valid");
    if (v != 0 && v != 1) throw std::runtime_error(path + ": valid must be 0 or 1");
    s.valid = v == 1;
    trace.samples.push_back(s);
  }
  return trace;
}

}  // namespace gazeforge

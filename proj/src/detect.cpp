#include "gazeforge/detect.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "xml_mini.hpp"

namespace gazeforge {

namespace {

constexpr const char* kTypeId = "opencv-haar-classifier";

double parse_num(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v))
      throw std::runtime_error("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("cascade: bad ") + what + " '" + s + "'");
  }
}

int parse_int(const std::string& s, const char* what) {
  const double v = parse_num(s, what);
  if (v != std::floor(v)) throw std::runtime_error(std::string("cascade: non-integer ") + what);
  return int(v);
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

HaarNode parse_node(const xml::Node& n, int base_w, int base_h, int self_index,
                    int node_count) {
  HaarNode out;
  const auto* feature = n.child("feature");
  if (!feature) throw std::runtime_error("cascade: node without <feature>");
  const auto* rects = feature->child("rects");
  if (!rects) throw std::runtime_error("cascade: feature without <rects>");
  for (const auto* r : rects->all("_")) {
    std::istringstream is(r->trimmed());
    std::string sx, sy, sw, sh, swt, extra;
    if (!(is >> sx >> sy >> sw >> sh >> swt) || (is >> extra))
      throw std::runtime_error("cascade: rect needs 'x y w h weight'");
    HaarRect hr;
    hr.x = parse_int(sx, "rect x");
    hr.y = parse_int(sy, "rect y");
    hr.w = parse_int(sw, "rect w");
    hr.h = parse_int(sh, "rect h");
    hr.weight = parse_num(swt, "rect weight");
    if (hr.w < 1 || hr.h < 1 || hr.x < 0 || hr.y < 0 || hr.x + hr.w > base_w ||
        hr.y + hr.h > base_h)
      throw std::runtime_error("cascade: rect outside base window");
    out.rects.push_back(hr);
  }
  if (out.rects.size() < 2 || out.rects.size() > 3)
    throw std::runtime_error("cascade: feature needs 2 or 3 rects");
  if (const auto* tilted = feature->child("tilted"); tilted && parse_int(tilted->trimmed(), "tilted") != 0)
    throw std::runtime_error("cascade: tilted features are not supported");

  const auto* thr = n.child("threshold");
  if (!thr) throw std::runtime_error("cascade: node without <threshold>");
  out.threshold = parse_num(thr->trimmed(), "threshold");

  auto side = [&](const char* val_tag, const char* node_tag, int& child, double& val) {
    const auto* v = n.child(val_tag);
    const auto* c = n.child(node_tag);
    if (!!v == !!c)
      throw std::runtime_error(std::string("cascade: node needs exactly one of <") + val_tag +
                               "> or <" + node_tag + ">");
    if (v) {
      val = parse_num(v->trimmed(), val_tag);
    } else {
      child = parse_int(c->trimmed(), node_tag);
      // forward links only, so a walk from the root always terminates
      if (child <= self_index || child >= node_count)
        throw std::runtime_error("cascade: child node index out of range");
    }
  };
  side("left_val", "left_node", out.left_child, out.left_val);
  side("right_val", "right_node", out.right_child, out.right_val);
  return out;
}

}  // namespace

HaarCascade parse_cascade(const std::string& xml_text) {
  const xml::Node root = xml::parse(xml_text);
  if (root.tag != "opencv_storage")
    throw std::runtime_error("cascade: root element must be <opencv_storage>");

  const xml::Node* body = nullptr;
  for (const auto& c : root.children) {
    const auto* t = c.attr("type_id");
    if (t && *t == kTypeId) {
      body = &c;
      break;
    }
  }
  if (!body) throw std::runtime_error("cascade: no element with type_id '" + std::string(kTypeId) + "'");

  HaarCascade cascade;
  cascade.name = body->tag;

  const auto* size = body->child("size");
  if (!size) throw std::runtime_error("cascade: missing <size>");
  {
    std::istringstream is(size->trimmed());
    std::string sw, sh, extra;
    if (!(is >> sw >> sh) || (is >> extra)) throw std::runtime_error("cascade: <size> needs 'w h'");
    cascade.window_width = parse_int(sw, "window width");
    cascade.window_height = parse_int(sh, "window height");
    if (cascade.window_width < 4 || cascade.window_height < 4)
      throw std::runtime_error("cascade: base window too small");
  }

  const auto* stages = body->child("stages");
  if (!stages || stages->all("_").empty())
    throw std::runtime_error("cascade: needs at least one stage");
  for (const auto* st : stages->all("_")) {
    CascadeStage stage;
    const auto* thr = st->child("stage_threshold");
    if (!thr) throw std::runtime_error("cascade: stage without <stage_threshold>");
    stage.threshold = parse_num(thr->trimmed(), "stage_threshold");
    const auto* trees = st->child("trees");
    if (!trees || trees->all("_").empty())
      throw std::runtime_error("cascade: stage without trees");
    for (const auto* tr : trees->all("_")) {
      WeakClassifier weak;
      const auto nodes = tr->all("_");
      if (nodes.empty()) throw std::runtime_error("cascade: empty weak classifier");
      for (std::size_t i = 0; i < nodes.size(); ++i)
        weak.nodes.push_back(parse_node(*nodes[i], cascade.window_width,
                                        cascade.window_height, int(i), int(nodes.size())));
      stage.trees.push_back(std::move(weak));
    }
    cascade.stages.push_back(std::move(stage));
  }
  return cascade;
}

HaarCascade load_cascade(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_cascade(ss.str());
}

std::string serialize_cascade(const HaarCascade& cascade) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?>\n<opencv_storage>\n";
  os << "<" << cascade.name << " type_id=\"" << kTypeId << "\">\n";
  os << "  <size>" << cascade.window_width << " " << cascade.window_height << "</size>\n";
  os << "  <stages>\n";
  for (const auto& stage : cascade.stages) {
    os << "    <_>\n      <trees>\n";
    for (const auto& tree : stage.trees) {
      os << "        <_>\n";
      for (const auto& node : tree.nodes) {
        os << "          <_>\n            <feature>\n              <rects>\n";
        for (const auto& r : node.rects)
          os << "                <_>" << r.x << " " << r.y << " " << r.w << " " << r.h << " "
             << fmt(r.weight) << "</_>\n";
        os << "              </rects>\n              <tilted>0</tilted>\n"
           << "            </feature>\n";
        os << "            <threshold>" << fmt(node.threshold) << "</threshold>\n";
        if (node.left_child >= 0)
          os << "            <left_node>" << node.left_child << "</left_node>\n";
        else
          os << "            <left_val>" << fmt(node.left_val) << "</left_val>\n";
        if (node.right_child >= 0)
          os << "            <right_node>" << node.right_child << "</right_node>\n";
        else
          os << "            <right_val>" << fmt(node.right_val) << "</right_val>\n";
        os << "          </_>\n";
      }
      os << "        </_>\n";
    }
    os << "      </trees>\n";
    os << "      <stage_threshold>" << fmt(stage.threshold) << "</stage_threshold>\n";
    os << "    </_>\n";
  }
  os << "  </stages>\n</" << cascade.name << ">\n</opencv_storage>\n";
  return os.str();
}

void save_cascade(const HaarCascade& cascade, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize_cascade(cascade);
}

namespace {

struct ClampedRect {
  int x, y, w, h;
};

ClampedRect clamp_to(const IntegralImage& ii, int x, int y, int w, int h) {
  // Rounded feature rects can overhang the window by a pixel at the image
  // border; clip to the frame so the table lookup stays in range.
  const int x0 = std::clamp(x, 0, ii.width());
  const int y0 = std::clamp(y, 0, ii.height());
  const int x1 = std::clamp(x + w, x0, ii.width());
  const int y1 = std::clamp(y + h, y0, ii.height());
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace

bool evaluate_window(const HaarCascade& cascade, const IntegralImage& ii, const Rect& window) {
  if (cascade.window_width <= 0 || cascade.window_height <= 0 || cascade.stages.empty())
    throw std::invalid_argument("evaluate_window: empty cascade");
  if (window.width <= 0 || window.height <= 0 || window.x < 0 || window.y < 0 ||
      window.x + window.width > ii.width() || window.y + window.height > ii.height())
    throw std::invalid_argument("evaluate_window: window outside frame");

  const double sx = double(window.width) / cascade.window_width;
  const double sy = double(window.height) / cascade.window_height;

  // Contrast normalization over the central rect inset by one base pixel.
  const auto eq = clamp_to(ii, window.x + int(std::lround(sx)), window.y + int(std::lround(sy)),
                           int(std::lround((cascade.window_width - 2) * sx)),
                           int(std::lround((cascade.window_height - 2) * sy)));
  if (eq.w <= 0 || eq.h <= 0) throw std::invalid_argument("evaluate_window: window too small");
  const double inv_area = 1.0 / (double(eq.w) * double(eq.h));
  const double mean = double(ii.sum(eq.x, eq.y, eq.w, eq.h)) * inv_area;
  const double var = double(ii.sq_sum(eq.x, eq.y, eq.w, eq.h)) * inv_area - mean * mean;
  const double var_norm = std::sqrt(std::max(var, 1.0));

  for (const auto& stage : cascade.stages) {
    double stage_sum = 0.0;
    for (const auto& tree : stage.trees) {
      int idx = 0;
      for (;;) {
        const HaarNode& node = tree.nodes[std::size_t(idx)];

        // Scale rects into the window; rect 0's weight is recomputed so the
        // weighted areas cancel and the feature is zero on flat patches.
        ClampedRect scaled[3]{};
        double weights[3] = {0, 0, 0};
        double correction = 0.0;
        for (std::size_t k = 0; k < node.rects.size(); ++k) {
          const HaarRect& r = node.rects[k];
          scaled[k] = clamp_to(ii, window.x + int(std::lround(r.x * sx)),
                               window.y + int(std::lround(r.y * sy)),
                               int(std::lround(r.w * sx)), int(std::lround(r.h * sy)));
          if (k > 0) {
            weights[k] = r.weight * inv_area;
            correction += weights[k] * double(scaled[k].w) * double(scaled[k].h);
          }
        }
        const double area0 = double(scaled[0].w) * double(scaled[0].h);
        weights[0] = area0 > 0 ? -correction / area0 : 0.0;

        double value = 0.0;
        for (std::size_t k = 0; k < node.rects.size(); ++k)
          value += weights[k] *
                   double(ii.sum(scaled[k].x, scaled[k].y, scaled[k].w, scaled[k].h));

        if (value < node.threshold * var_norm) {
          if (node.left_child < 0) {
            stage_sum += node.left_val;
            break;
          }
          idx = node.left_child;
        } else {
          if (node.right_child < 0) {
            stage_sum += node.right_val;
            break;
          }
          idx = node.right_child;
        }
      }
    }
    if (stage_sum < stage.threshold) return false;
  }
  return true;
}

std::vector<Rect> scan_windows(int frame_width, int frame_height, int base_width,
                               int base_height, const DetectParams& params) {
  if (params.scale_factor <= 1.0)
    throw std::invalid_argument("scan_windows: scale_factor must be > 1");
  if (base_width <= 0 || base_height <= 0)
    throw std::invalid_argument("scan_windows: bad base window");
  std::vector<Rect> out;
  for (double scale = 1.0;; scale *= params.scale_factor) {
    const int w = int(std::lround(base_width * scale));
    const int h = int(std::lround(base_height * scale));
    if (w > frame_width || h > frame_height) break;
    if (std::max(w, h) > params.max_size) break;
    if (std::min(w, h) < params.min_size) continue;
    const int stride = std::max(1, int(std::lround(scale)));
    for (int y = 0; y + h <= frame_height; y += stride)
      for (int x = 0; x + w <= frame_width; x += stride) out.push_back({x, y, w, h});
  }
  return out;
}

std::vector<Rect> detect_objects(const GrayFrame& frame, const HaarCascade& cascade,
                                 const DetectParams& params) {
  if (frame.empty()) throw std::invalid_argument("detect_objects: empty frame");
  const IntegralImage ii(frame);
  std::vector<Rect> hits;
  for (const Rect& w : scan_windows(frame.width, frame.height, cascade.window_width,
                                    cascade.window_height, params))
    if (evaluate_window(cascade, ii, w)) hits.push_back(w);
  if (params.min_neighbors <= 0) return hits;
  return group_rectangles(hits, params.min_neighbors);
}

namespace {

bool similar(const Rect& a, const Rect& b) {
  const double delta = 0.2 * (a.width + a.height + b.width + b.height) / 4.0;
  return std::abs(a.x - b.x) <= delta && std::abs(a.y - b.y) <= delta &&
         std::abs((a.x + a.width) - (b.x + b.width)) <= delta &&
         std::abs((a.y + a.height) - (b.y + b.height)) <= delta;
}

}  // namespace

std::vector<std::pair<Rect, int>> group_rectangles_sized(const std::vector<Rect>& rects,
                                                         int min_neighbors) {
  if (min_neighbors <= 0) {
    std::vector<std::pair<Rect, int>> out;
    for (const auto& r : rects) out.emplace_back(r, 1);
    return out;
  }

  const std::size_t n = rects.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (similar(rects[i], rects[j])) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  struct Acc {
    long long x = 0, y = 0, w = 0, h = 0;
    int count = 0;
  };
  std::vector<Acc> acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    Acc& a = acc[find(i)];
    a.x += rects[i].x;
    a.y += rects[i].y;
    a.w += rects[i].width;
    a.h += rects[i].height;
    ++a.count;
  }

  std::vector<std::pair<Rect, int>> out;
  for (const Acc& a : acc) {
    if (a.count < min_neighbors || a.count == 0) continue;
    Rect r;
    r.x = int(std::llround(double(a.x) / a.count));
    r.y = int(std::llround(double(a.y) / a.count));
    r.width = int(std::llround(double(a.w) / a.count));
    r.height = int(std::llround(double(a.h) / a.count));
    out.emplace_back(r, a.count);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return std::tie(a.first.y, a.first.x, a.first.width, a.first.height) <
           std::tie(b.first.y, b.first.x, b.first.width, b.first.height);
  });
  return out;
}

std::vector<Rect> group_rectangles(const std::vector<Rect>& rects, int min_neighbors) {
  if (min_neighbors <= 0) return rects;
  std::vector<Rect> out;
  for (const auto& rn : group_rectangles_sized(rects, min_neighbors)) out.push_back(rn.first);
  return out;
}

std::pair<Rect, Rect> estimate_eye_regions(const Rect& face) {
  if (face.width <= 0 || face.height <= 0)
    throw std::invalid_argument("estimate_eye_regions: empty face rect");
  const int inset_x = int(std::lround(0.13 * face.width));
  const int top = int(std::lround(0.25 * face.height));
  const int w = int(std::lround(0.35 * face.width));
  const int h = int(std::lround(0.30 * face.height));

  auto clip = [&](Rect r) {
    const int x0 = std::clamp(r.x, face.x, face.x + face.width);
    const int y0 = std::clamp(r.y, face.y, face.y + face.height);
    const int x1 = std::clamp(r.x + r.width, x0, face.x + face.width);
    const int y1 = std::clamp(r.y + r.height, y0, face.y + face.height);
    return Rect{x0, y0, x1 - x0, y1 - y0};
  };
  const Rect left = clip({face.x + inset_x, face.y + top, w, h});
  const Rect right = clip({face.x + face.width - inset_x - w, face.y + top, w, h});
  return {left, right};
}

}  // namespace gazeforge

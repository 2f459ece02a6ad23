#include "gazeforge/gazefeat.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gazeforge/rng.hpp"
#include "text_util.hpp"

namespace gazeforge {

const char* label_name(Label label) { return label == Label::TEXT ? "TEXT" : "IMAGE"; }

Label label_from(const std::string& name) {
  if (name == "TEXT") return Label::TEXT;
  if (name == "IMAGE") return Label::IMAGE;
  throw std::runtime_error("unknown label '" + name + "' (expected TEXT or IMAGE)");
}

const char* trace_kind_name(TraceKind kind) {
  return kind == TraceKind::READING ? "reading" : "viewing";
}

TraceKind trace_kind_from(const std::string& name) {
  if (name == "reading") return TraceKind::READING;
  if (name == "viewing") return TraceKind::VIEWING;
  throw std::runtime_error("unknown trace kind '" + name + "'");
}

std::vector<FixationEvent> segment_fixations(const GazeTrace& trace,
                                             const FixationConfig& cfg) {
  if (cfg.dispersion_threshold < 0) throw std::invalid_argument("negative dispersion threshold");
  if (cfg.min_duration_ms < 0) throw std::invalid_argument("negative fixation duration");
  if (cfg.fps <= 0) throw std::invalid_argument("fps must be positive");
  const std::size_t min_samples =
      std::max<std::size_t>(1, std::size_t(std::ceil(cfg.min_duration_ms * cfg.fps / 1000.0)));

  const auto& s = trace.samples;
  std::vector<FixationEvent> events;

  std::size_t run_start = 0;
  while (run_start < s.size()) {
    if (!s[run_start].valid) {
      ++run_start;
      continue;
    }
    std::size_t run_end = run_start;
    while (run_end < s.size() && s[run_end].valid) ++run_end;

    std::size_t i = run_start;
    while (i < run_end) {
      double min_x = s[i].x, max_x = s[i].x, min_y = s[i].y, max_y = s[i].y;
      std::size_t j = i + 1;
      while (j < run_end) {
        const double nx_min = std::min(min_x, s[j].x), nx_max = std::max(max_x, s[j].x);
        const double ny_min = std::min(min_y, s[j].y), ny_max = std::max(max_y, s[j].y);
        if ((nx_max - nx_min) + (ny_max - ny_min) > cfg.dispersion_threshold) break;
        min_x = nx_min;
        max_x = nx_max;
        min_y = ny_min;
        max_y = ny_max;
        ++j;
      }
      if (j - i >= min_samples) {
        FixationEvent e;
        e.start_index = i;
        e.end_index = j - 1;
        e.point_count = int(j - i);
        double sx = 0, sy = 0;
        for (std::size_t k = i; k < j; ++k) {
          sx += s[k].x;
          sy += s[k].y;
        }
        e.centroid_x = sx / double(j - i);
        e.centroid_y = sy / double(j - i);
        e.dispersion = (max_x - min_x) + (max_y - min_y);
        events.push_back(e);
        i = j;
      } else {
        ++i;
      }
    }
    run_start = run_end;
  }
  return events;
}

FixationStats fixation_count_stats(const std::vector<FixationEvent>& events) {
  FixationStats stats;
  if (events.empty()) return stats;
  long total = 0;
  stats.max_count = events[0].point_count;
  stats.min_count = events[0].point_count;
  for (const auto& e : events) {
    stats.max_count = std::max(stats.max_count, e.point_count);
    stats.min_count = std::min(stats.min_count, e.point_count);
    total += e.point_count;
  }
  stats.avg_count = double(total) / double(events.size());
  return stats;
}

double movement_ratio(const GazeTrace& trace, double motion_threshold, MrScope scope,
                      const std::vector<FixationEvent>* fixations) {
  if (motion_threshold < 0) throw std::invalid_argument("negative motion threshold");

  std::size_t n_valid = 0;
  for (const auto& s : trace.samples)
    if (s.valid) ++n_valid;
  if (n_valid < 2) throw std::invalid_argument("movement_ratio: fewer than 2 valid samples");

  std::vector<FixationEvent> own;
  if (scope == MrScope::SACCADES_ONLY && !fixations) {
    own = segment_fixations(trace);
    fixations = &own;
  }
  // A step is "inside" an event when both its endpoints are.
  auto inside_fixation = [&](std::size_t i) {
    for (const auto& e : *fixations)
      if (e.start_index <= i - 1 && i <= e.end_index) return true;
    return false;
  };

  long horizontal = 0, vertical = 0;
  const auto& s = trace.samples;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!s[i - 1].valid || !s[i].valid) continue;
    if (scope == MrScope::SACCADES_ONLY && inside_fixation(i)) continue;
    const double dx = std::abs(s[i].x - s[i - 1].x);
    const double dy = std::abs(s[i].y - s[i - 1].y);
    if (std::max(dx, dy) < motion_threshold) continue;
    if (dx >= dy)
      ++horizontal;
    else
      ++vertical;
  }
  return double(horizontal) / double(std::max(vertical, 1L));
}

FeatureVector extract_features(const GazeTrace& left, const GazeTrace& right,
                               const FeatureConfig& cfg) {
  const auto fix_l = segment_fixations(left, cfg.fixation);
  const auto fix_r = segment_fixations(right, cfg.fixation);
  const auto st_l = fixation_count_stats(fix_l);
  const auto st_r = fixation_count_stats(fix_r);

  FeatureVector v;
  v[0] = st_r.max_count;
  v[1] = st_l.max_count;
  v[2] = st_r.min_count;
  v[3] = st_l.min_count;
  v[4] = st_r.avg_count;
  v[5] = st_l.avg_count;
  v[6] = movement_ratio(right, cfg.motion_threshold, cfg.mr_scope, &fix_r);
  v[7] = movement_ratio(left, cfg.motion_threshold, cfg.mr_scope, &fix_l);
  return v;
}

namespace {

std::string dataset_header() {
  std::string h;
  for (const auto* name : kFeatureNames) {
    h += name;
    h += ',';
  }
  return h + "Label";
}

}  // namespace

void write_dataset(const GazeDataset& dataset, const std::string& path) {
  std::ostringstream os;
  os << dataset_header() << '\n';
  for (const auto& row : dataset.rows) {
    if (!row.label) throw std::runtime_error("write_dataset: unlabeled row");
    for (const auto v : row.values) os << textio::fmt(v) << ',';
    os << label_name(*row.label) << '\n';
  }
  textio::write_text_file(path, os.str());
}

GazeDataset read_dataset(const std::string& path) {
  const auto lines = textio::read_lines(path);
  if (lines.empty() || lines[0] != dataset_header())
    throw std::runtime_error(path + ": missing dataset header '" + dataset_header() + "'");
  GazeDataset ds;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = textio::split(lines[i]);
    if (f.size() != 9)
      throw std::runtime_error(path + ": row " + std::to_string(i) + " needs 9 fields");
    FeatureVector row;
    for (std::size_t k = 0; k < 8; ++k) row[k] = textio::to_double(f[k], kFeatureNames[k]);
    row.label = label_from(f[8]);
    ds.rows.push_back(row);
  }
  return ds;
}

namespace {

struct BasePath {
  std::vector<double> x, y;
};

BasePath reading_path(std::size_t n, double fps, double style, Rng& rng) {
  BasePath path;
  path.x.reserve(n);
  path.y.reserve(n);

  // per-trace reading style: dwell band (seconds), line length, skim tendency
  const double dwell_lo_s = rng.uniform(0.20, 0.26);
  const double dwell_hi_s = rng.uniform(0.30, 0.40);
  const long words_per_line = 12 + long(rng.below(8));
  const double short_word_p = 0.05 + 0.90 * style;
  const double line_height = 28.0;

  double x = 80.0, y = 60.0;
  long word = 0;
  while (path.x.size() < n) {
    const long dwell = std::max(1L, std::lround(rng.uniform(dwell_lo_s, dwell_hi_s) * fps));
    for (long d = 0; d < dwell && path.x.size() < n; ++d) {
      path.x.push_back(x);
      path.y.push_back(y);
    }
    ++word;
    if (word % words_per_line == 0) {
      x = 80.0;  // sweep back for the next line
      y += line_height;
    } else if (rng.uniform() < short_word_p) {
      x += rng.uniform(5.0, 7.5);  // short word, barely a hop
    } else {
      x += rng.uniform(22.0, 30.0);
    }
  }
  return path;
}

BasePath viewing_path(std::size_t n, double fps, double style, Rng& rng) {
  BasePath path;
  path.x.reserve(n);
  path.y.reserve(n);

  const long clusters = 5 + long(rng.below(11));
  const double dwell_hi_s = 0.55 + 2.10 * style;  // per-scene attention span
  std::vector<double> cx, cy;
  cx.resize(std::size_t(clusters));
  cy.resize(std::size_t(clusters));
  for (long k = 0; k < clusters; ++k) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double px = rng.uniform(150.0, 1000.0);
      const double py = rng.uniform(100.0, 600.0);
      bool clear = true;
      for (long j = 0; j < k; ++j)
        if (std::hypot(px - cx[std::size_t(j)], py - cy[std::size_t(j)]) < 60.0) {
          clear = false;
          break;
        }
      cx[std::size_t(k)] = px;
      cy[std::size_t(k)] = py;
      if (clear) break;
    }
  }

  long cur = long(rng.below(std::uint64_t(clusters)));
  while (path.x.size() < n) {
    const long dwell = std::max(1L, std::lround(rng.uniform(0.50, dwell_hi_s) * fps));
    for (long d = 0; d < dwell && path.x.size() < n; ++d) {
      path.x.push_back(cx[std::size_t(cur)]);
      path.y.push_back(cy[std::size_t(cur)]);
    }
    long next = clusters > 1 ? long(rng.below(std::uint64_t(clusters - 1))) : 0;
    if (next >= cur && clusters > 1) ++next;
    const long hops = rng.range(1, 2);
    for (long hseg = 1; hseg <= hops && path.x.size() < n; ++hseg) {
      const double t = double(hseg) / double(hops + 1);
      path.x.push_back(cx[std::size_t(cur)] + t * (cx[std::size_t(next)] - cx[std::size_t(cur)]));
      path.y.push_back(cy[std::size_t(cur)] + t * (cy[std::size_t(next)] - cy[std::size_t(cur)]));
    }
    cur = next;
  }
  return path;
}

}  // namespace

std::pair<GazeTrace, GazeTrace> synth_trace(const SynthTraceConfig& cfg) {
  if (cfg.duration_s <= 0 || cfg.fps <= 0)
    throw std::invalid_argument("synth_trace: duration and fps must be positive");
  if (cfg.blink_rate_hz < 0) throw std::invalid_argument("synth_trace: negative blink rate");
  const std::size_t n = std::size_t(std::llround(cfg.duration_s * cfg.fps));
  if (n < 30) throw std::invalid_argument("synth_trace: trace too short to be useful");

  // distinct streams per activity so the same seed never aliases across kinds
  Rng rng = Rng(cfg.seed).fork(cfg.kind == TraceKind::READING ? 11 : 22);
  // one style scalar per seed, shared by both activities: unhurried subjects
  // dwell longer on scenes and glide across short words when reading
  const double style = Rng(cfg.seed).fork(33).uniform();

  const BasePath base = cfg.kind == TraceKind::READING
                            ? reading_path(n, cfg.fps, style, rng)
                            : viewing_path(n, cfg.fps, style, rng);

  // per-trace jitter scales; viewing noise leans vertical, reading is tight
  double sigma_x, sigma_y;
  if (cfg.kind == TraceKind::READING) {
    sigma_x = sigma_y = rng.uniform(0.40, 0.65);
  } else {
    sigma_x = rng.uniform(0.45, 0.60);
    sigma_y = rng.uniform(0.75, 1.10);
  }

  // binocular blink mask
  std::vector<bool> valid(n, true);
  const double p_blink = cfg.blink_rate_hz / cfg.fps;
  for (std::size_t t = 0; t < n; ++t)
    if (rng.uniform() < p_blink) {
      const long len = rng.range(2, 4);
      for (long d = 0; d < len && t + std::size_t(d) < n; ++d) valid[t + std::size_t(d)] = false;
      t += std::size_t(len);
    }

  GazeTrace left, right;
  left.eye = Eye::LEFT;
  right.eye = Eye::RIGHT;
  left.fps = right.fps = cfg.fps;
  left.samples.reserve(n);
  right.samples.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double lx = base.x[t] + rng.normal(0.0, sigma_x);
    const double ly = base.y[t] + rng.normal(0.0, sigma_y);
    const double rx = base.x[t] + rng.normal(0.0, sigma_x);
    const double ry = base.y[t] + rng.normal(0.0, sigma_y);
    left.samples.push_back({long(t), lx, ly, valid[t]});
    right.samples.push_back({long(t), rx, ry, valid[t]});
  }
  return {left, right};
}

GazeDataset synth_dataset(int per_class, std::uint64_t seed, double duration_s, double fps) {
  if (per_class < 1) throw std::invalid_argument("synth_dataset: per_class must be positive");
  GazeDataset ds;
  ds.source = "synth";
  ds.seed = seed;
  ds.rows.reserve(std::size_t(per_class) * 2);
  for (int i = 0; i < per_class; ++i) {
    for (auto kind : {TraceKind::READING, TraceKind::VIEWING}) {
      SynthTraceConfig cfg;
      cfg.kind = kind;
      cfg.duration_s = duration_s;
      cfg.fps = fps;
      cfg.seed = seed + std::uint64_t(i);
      const auto [left, right] = synth_trace(cfg);
      FeatureVector fv = extract_features(left, right);
      fv.label = kind == TraceKind::READING ? Label::TEXT : Label::IMAGE;
      ds.rows.push_back(fv);
    }
  }
  return ds;
}

}  // namespace gazeforge

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gazeforge/gazefeat.hpp"
#include "gazeforge/rng.hpp"
#include "sample_rows.hpp"

using namespace gazeforge;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto d = fs::temp_directory_path() / "gf_gazefeat_test";
  fs::create_directories(d);
  return d;
}

GazeTrace trace_of(const std::vector<std::pair<double, double>>& pts) {
  GazeTrace t;
  t.samples.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    t.samples.push_back({long(i), pts[i].first, pts[i].second, true});
  return t;
}

GazeTrace repeat_point(double x, double y, int n) {
  return trace_of(std::vector<std::pair<double, double>>(std::size_t(n), {x, y}));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void check_event_invariants(const std::vector<FixationEvent>& events, const GazeTrace& trace,
                            const FixationConfig& cfg) {
  const std::size_t min_samples =
      std::size_t(std::ceil(cfg.min_duration_ms * cfg.fps / 1000.0));
  std::size_t prev_end = 0;
  bool first = true;
  for (const auto& e : events) {
    CHECK(e.point_count == int(e.end_index - e.start_index + 1));
    CHECK(std::size_t(e.point_count) >= min_samples);
    CHECK(e.dispersion <= cfg.dispersion_threshold);
    CHECK(e.end_index < trace.samples.size());
    if (!first) CHECK(e.start_index > prev_end);
    prev_end = e.end_index;
    first = false;
    for (std::size_t i = e.start_index; i <= e.end_index; ++i)
      CHECK(trace.samples[i].valid);
  }
}

}  // namespace

TEST_CASE("seven identical points form one fixation, five do not") {
  const auto seven = segment_fixations(repeat_point(3.0, 4.0, 7));
  REQUIRE(seven.size() == 1);
  CHECK(seven[0].point_count == 7);
  CHECK(seven[0].start_index == 0);
  CHECK(seven[0].end_index == 6);
  CHECK(seven[0].centroid_x == doctest::Approx(3.0));
  CHECK(seven[0].centroid_y == doctest::Approx(4.0));
  CHECK(seven[0].dispersion == 0.0);

  CHECK(segment_fixations(repeat_point(3.0, 4.0, 5)).empty());
  // 6 samples at 30 fps is exactly the 200 ms floor
  CHECK(segment_fixations(repeat_point(3.0, 4.0, 6)).size() == 1);
  CHECK(segment_fixations(GazeTrace{}).empty());
}

TEST_CASE("two dwell blocks joined by a sweep give exactly two events") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({0.0, 0.0});
  pts.push_back({25.0, 0.0});
  pts.push_back({50.0, 0.0});
  pts.push_back({75.0, 0.0});
  for (int i = 0; i < 8; ++i) pts.push_back({100.0, 0.0});

  const auto events = segment_fixations(trace_of(pts));
  REQUIRE(events.size() == 2);
  CHECK(events[0].point_count == 10);
  CHECK(events[0].start_index == 0);
  CHECK(events[0].end_index == 9);
  CHECK(events[1].point_count == 8);
  CHECK(events[1].start_index == 13);
  CHECK(events[1].end_index == 20);
  CHECK(events[1].centroid_x == doctest::Approx(100.0));
}

TEST_CASE("dispersion is the x-range plus y-range of the window") {
  // x spread 10 plus y spread 4 stays under the default 15
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({i % 2 ? 10.0 : 0.0, i % 2 ? 4.0 : 0.0});
  const auto t = trace_of(pts);

  auto events = segment_fixations(t);
  REQUIRE(events.size() == 1);
  CHECK(events[0].dispersion == 14.0);

  FixationConfig tight;
  tight.dispersion_threshold = 13.0;
  CHECK(segment_fixations(t, tight).empty());
}

TEST_CASE("invalid samples break fixation windows") {
  GazeTrace t = repeat_point(5.0, 5.0, 13);
  t.samples[6].valid = false;
  const auto events = segment_fixations(t);
  REQUIRE(events.size() == 2);
  CHECK(events[0].end_index == 5);
  CHECK(events[1].start_index == 7);

  GazeTrace short_runs = repeat_point(5.0, 5.0, 11);
  short_runs.samples[5].valid = false;  // leaves two runs of 5
  CHECK(segment_fixations(short_runs).empty());
}

TEST_CASE("the duration floor follows the configured frame rate") {
  FixationConfig cfg;
  cfg.fps = 60.0;  // 200 ms now needs 12 samples
  CHECK(segment_fixations(repeat_point(0, 0, 11), cfg).empty());
  CHECK(segment_fixations(repeat_point(0, 0, 12), cfg).size() == 1);
}

TEST_CASE("fixation config rejects nonsense") {
  FixationConfig cfg;
  cfg.dispersion_threshold = -1.0;
  CHECK_THROWS(segment_fixations(repeat_point(0, 0, 7), cfg));
  cfg = {};
  cfg.fps = 0.0;
  CHECK_THROWS(segment_fixations(repeat_point(0, 0, 7), cfg));
  cfg = {};
  cfg.min_duration_ms = -5.0;
  CHECK_THROWS(segment_fixations(repeat_point(0, 0, 7), cfg));
}

TEST_CASE("fixation count statistics") {
  CHECK(fixation_count_stats({}).max_count == 0);
  CHECK(fixation_count_stats({}).min_count == 0);
  CHECK(fixation_count_stats({}).avg_count == 0.0);

  auto of_counts = [](const std::vector<int>& counts) {
    std::vector<FixationEvent> events;
    for (int c : counts) {
      FixationEvent e;
      e.point_count = c;
      events.push_back(e);
    }
    return events;
  };

  const auto single = fixation_count_stats(of_counts({7}));
  CHECK(single.max_count == 7);
  CHECK(single.min_count == 7);
  CHECK(single.avg_count == 7.0);

  const auto pair = fixation_count_stats(of_counts({10, 8}));
  CHECK(pair.max_count == 10);
  CHECK(pair.min_count == 8);
  CHECK(pair.avg_count == 9.0);

  // 200 events averaging exactly 3.115: one 37, one 4, twelve 2s, rest 3s
  std::vector<int> counts{37, 4};
  counts.insert(counts.end(), 12, 2);
  counts.insert(counts.end(), 186, 3);
  const auto wide = fixation_count_stats(of_counts(counts));
  CHECK(wide.max_count == 37);
  CHECK(wide.min_count == 2);
  CHECK(wide.avg_count == 3.115);

  // agrees with a brute-force pass over random lists
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> cs;
    const int n = 1 + int(rng.below(40));
    for (int i = 0; i < n; ++i) cs.push_back(1 + int(rng.below(50)));
    const auto st = fixation_count_stats(of_counts(cs));
    CHECK(st.max_count == *std::max_element(cs.begin(), cs.end()));
    CHECK(st.min_count == *std::min_element(cs.begin(), cs.end()));
    CHECK(st.avg_count ==
          doctest::Approx(std::accumulate(cs.begin(), cs.end(), 0.0) / double(n)));
    CHECK(st.min_count <= st.avg_count);
    CHECK(st.avg_count <= st.max_count);
  }
}

TEST_CASE("movement ratio counts horizontal against vertical scans") {
  // alternating unit steps: right, down, right, down ... H == V
  std::vector<std::pair<double, double>> alt{{0, 0}};
  for (int i = 0; i < 10; ++i) {
    auto [x, y] = alt.back();
    if (i % 2 == 0)
      alt.push_back({x + 1, y});
    else
      alt.push_back({x, y + 1});
  }
  CHECK(movement_ratio(trace_of(alt)) == 1.0);

  // one scanline: 40 steps right, one line-break down
  std::vector<std::pair<double, double>> line;
  for (int i = 0; i <= 40; ++i) line.push_back({double(i * 20), 0.0});
  line.push_back({line.back().first, 30.0});
  CHECK(movement_ratio(trace_of(line)) == 40.0);

  // diagonal ties count as horizontal
  CHECK(movement_ratio(trace_of({{0, 0}, {1, 1}, {2, 2}})) == 2.0);

  // motion below the threshold is ignored
  CHECK(movement_ratio(trace_of({{0, 0}, {0.5, 0}, {10, 0}})) == 1.0);

  // pairs touching an invalid sample are skipped
  GazeTrace gap = trace_of({{0, 0}, {50, 0}, {100, 0}});
  gap.samples[1].valid = false;
  CHECK(movement_ratio(gap) == 0.0);
}

TEST_CASE("movement ratio preconditions") {
  CHECK_THROWS(movement_ratio(GazeTrace{}));
  CHECK_THROWS(movement_ratio(repeat_point(0, 0, 1)));
  GazeTrace all_invalid = repeat_point(0, 0, 5);
  for (auto& s : all_invalid.samples) s.valid = false;
  CHECK_THROWS(movement_ratio(all_invalid));
  CHECK_THROWS(movement_ratio(repeat_point(0, 0, 2), -1.0));
  CHECK(movement_ratio(repeat_point(0, 0, 2)) == 0.0);  // two valid, nothing moves
}

TEST_CASE("movement ratio is translation invariant and transposes H with V") {
  // integer coordinates so a uniform shift is exact
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, double>> pts{{0, 0}};
    long h = 0, v = 0;
    for (int i = 0; i < 120; ++i) {
      // steps with |dx| != |dy| so transposing cannot flip a tie
      static const int moves[][2] = {{2, 1}, {1, 3}, {4, 0}, {0, 2}, {5, 2}, {1, 4}};
      const auto& m = moves[rng.below(6)];
      const double sx = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double sy = rng.uniform() < 0.5 ? -1.0 : 1.0;
      auto [x, y] = pts.back();
      pts.push_back({x + sx * m[0], y + sy * m[1]});
      (m[0] >= m[1] ? h : v)++;
    }
    const auto t = trace_of(pts);
    const double mr = movement_ratio(t);
    CHECK(mr == double(h) / double(std::max(v, 1L)));

    auto shifted = pts;
    for (auto& p : shifted) {
      p.first += 377.0;
      p.second += -123.0;
    }
    CHECK(movement_ratio(trace_of(shifted)) == mr);

    auto transposed = pts;
    for (auto& p : transposed) std::swap(p.first, p.second);
    CHECK(movement_ratio(trace_of(transposed)) == double(v) / double(std::max(h, 1L)));
  }
}

TEST_CASE("movement ratio can exclude steps inside fixations") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({0, 0});
  pts.push_back({0, 40});
  for (int i = 0; i < 7; ++i) pts.push_back({i % 2 ? 2.0 : 0.0, 80.0});
  const auto t = trace_of(pts);

  CHECK(movement_ratio(t, 1.0, MrScope::ALL) == 3.0);  // 6 wiggles vs 2 drops
  CHECK(movement_ratio(t, 1.0, MrScope::SACCADES_ONLY) == 0.0);

  // with no events supplied the saccade scope degenerates to the full count
  const std::vector<FixationEvent> none;
  CHECK(movement_ratio(t, 1.0, MrScope::SACCADES_ONLY, &none) == 3.0);
}

TEST_CASE("feature vectors are assembled right eye first") {
  std::vector<std::pair<double, double>> right_pts;
  for (int i = 0; i < 10; ++i) right_pts.push_back({0.0, 0.0});
  right_pts.push_back({25.0, 0.0});
  right_pts.push_back({50.0, 0.0});
  right_pts.push_back({75.0, 0.0});
  for (int i = 0; i < 8; ++i) right_pts.push_back({100.0, 0.0});
  const auto right = trace_of(right_pts);  // fixation counts {10, 8}, 4 horizontal scans

  std::vector<std::pair<double, double>> left_pts;
  for (int i = 0; i < 7; ++i) left_pts.push_back({0.0, 0.0});
  left_pts.push_back({0.0, 50.0});  // one vertical scan
  const auto left = trace_of(left_pts);

  const auto fv = extract_features(left, right, {});
  CHECK(fv[0] == 10.0);  // MAX_FC_R
  CHECK(fv[1] == 7.0);   // MAX_FC_L
  CHECK(fv[2] == 8.0);   // MIN_FC_R
  CHECK(fv[3] == 7.0);   // MIN_FC_L
  CHECK(fv[4] == 9.0);   // AVG_FC_R
  CHECK(fv[5] == 7.0);   // AVG_FC_L
  CHECK(fv[6] == 4.0);   // MR_R
  CHECK(fv[7] == 0.0);   // MR_L
  CHECK(!fv.label.has_value());
}

TEST_CASE("identical eye traces give mirrored features") {
  SynthTraceConfig cfg;
  cfg.kind = TraceKind::READING;
  cfg.seed = 19;
  auto [left, right] = synth_trace(cfg);
  const auto fv = extract_features(left, left, {});
  CHECK(fv[0] == fv[1]);
  CHECK(fv[2] == fv[3]);
  CHECK(fv[4] == fv[5]);
  CHECK(fv[6] == fv[7]);
}

TEST_CASE("reading features are horizontal-dominant, viewing dwells longer") {
  SynthTraceConfig reading;
  reading.kind = TraceKind::READING;
  reading.seed = 7;
  auto [rl, rr] = synth_trace(reading);
  const auto rf = extract_features(rl, rr, {});
  CHECK(rf[6] >= 1.0);
  CHECK(rf[7] >= 1.0);

  SynthTraceConfig viewing = reading;
  viewing.kind = TraceKind::VIEWING;
  auto [vl, vr] = synth_trace(viewing);
  const auto vf = extract_features(vl, vr, {});
  CHECK(vf[4] > rf[4]);

  for (const auto* fv : {&rf, &vf}) {
    CHECK((*fv)[2] <= (*fv)[4]);
    CHECK((*fv)[4] <= (*fv)[0]);
    CHECK((*fv)[3] <= (*fv)[5]);
    CHECK((*fv)[5] <= (*fv)[1]);
    for (double x : fv->values) {
      CHECK(std::isfinite(x));
      CHECK(x >= 0.0);
    }
  }
}

TEST_CASE("dataset writes the exact header and survives a round-trip") {
  const auto path = (temp_dir() / "rows.csv").string();
  const auto ds = gftest::reference_rows();
  write_dataset(ds, path);

  const auto text = slurp(path);
  CHECK(text.rfind("MAX_FC_R,MAX_FC_L,MIN_FC_R,MIN_FC_L,AVG_FC_R,AVG_FC_L,MR_R,MR_L,Label\n",
                   0) == 0);
  CHECK(text.find("37,45,2,1,3.115,2.272,2.385,2.04,TEXT\n") != std::string::npos);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.back() == '\n');

  const auto back = read_dataset(path);
  REQUIRE(back.rows.size() == ds.rows.size());
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    for (std::size_t k = 0; k < 8; ++k) CHECK(back.rows[i][k] == ds.rows[i][k]);
    CHECK(back.rows[i].label == ds.rows[i].label);
  }
}

TEST_CASE("empty dataset round-trips as a bare header") {
  const auto path = (temp_dir() / "empty.csv").string();
  write_dataset(GazeDataset{}, path);
  CHECK(slurp(path) == "MAX_FC_R,MAX_FC_L,MIN_FC_R,MIN_FC_L,AVG_FC_R,AVG_FC_L,MR_R,MR_L,Label\n");
  CHECK(read_dataset(path).rows.empty());
}

TEST_CASE("dataset reader rejects malformed files") {
  const auto dir = temp_dir();
  auto write_raw = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    out << body;
    return (dir / name).string();
  };
  const std::string header =
      "MAX_FC_R,MAX_FC_L,MIN_FC_R,MIN_FC_L,AVG_FC_R,AVG_FC_L,MR_R,MR_L,Label\n";

  CHECK_THROWS(read_dataset(write_raw("label.csv", header + "1,2,3,4,5,6,7,8,PICTURE\n")));
  CHECK_THROWS(read_dataset(write_raw("header.csv", "a,b,c\n1,2,3\n")));
  CHECK_THROWS(read_dataset(write_raw("cell.csv", header + "1,2,x,4,5,6,7,8,TEXT\n")));
  CHECK_THROWS(read_dataset(write_raw("short.csv", header + "1,2,3,TEXT\n")));
  CHECK_THROWS(read_dataset(write_raw("none.csv", "")));

  GazeDataset unlabeled;
  unlabeled.rows.push_back(FeatureVector{});
  CHECK_THROWS(write_dataset(unlabeled, (dir / "out.csv").string()));
}

TEST_CASE("label names round-trip and reject strangers") {
  CHECK(label_from(label_name(Label::TEXT)) == Label::TEXT);
  CHECK(label_from(label_name(Label::IMAGE)) == Label::IMAGE);
  CHECK_THROWS(label_from("PICTURE"));
  CHECK_THROWS(label_from("text"));
}

TEST_CASE("synthetic traces are deterministic per seed") {
  for (auto kind : {TraceKind::READING, TraceKind::VIEWING}) {
    SynthTraceConfig cfg;
    cfg.kind = kind;
    cfg.seed = 5;
    auto [l1, r1] = synth_trace(cfg);
    auto [l2, r2] = synth_trace(cfg);
    REQUIRE(l1.samples.size() == l2.samples.size());
    for (std::size_t i = 0; i < l1.samples.size(); ++i) {
      CHECK(l1.samples[i].x == l2.samples[i].x);
      CHECK(l1.samples[i].y == l2.samples[i].y);
      CHECK(l1.samples[i].valid == l2.samples[i].valid);
      CHECK(r1.samples[i].x == r2.samples[i].x);
      CHECK(r1.samples[i].y == r2.samples[i].y);
    }
    cfg.seed = 6;
    auto [l3, r3] = synth_trace(cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < l1.samples.size(); ++i)
      if (l1.samples[i].x != l3.samples[i].x) any_diff = true;
    CHECK(any_diff);
  }
}

TEST_CASE("synthetic trace shape and blink handling") {
  SynthTraceConfig cfg;
  cfg.kind = TraceKind::VIEWING;
  cfg.seed = 3;
  cfg.duration_s = 10.0;
  auto [left, right] = synth_trace(cfg);
  CHECK(left.samples.size() == std::size_t(std::llround(cfg.duration_s * cfg.fps)));
  CHECK(left.eye == Eye::LEFT);
  CHECK(right.eye == Eye::RIGHT);
  CHECK(left.fps == cfg.fps);

  int blinks = 0;
  for (std::size_t i = 0; i < left.samples.size(); ++i) {
    CHECK(left.samples[i].frame_index == long(i));
    // blinks hit both eyes at once
    CHECK(left.samples[i].valid == right.samples[i].valid);
    if (!left.samples[i].valid) ++blinks;
  }
  CHECK(blinks > 0);

  // jitter is per-eye: positions must differ on valid frames
  bool eyes_differ = false;
  for (std::size_t i = 0; i < left.samples.size(); ++i)
    if (left.samples[i].valid && left.samples[i].x != right.samples[i].x) eyes_differ = true;
  CHECK(eyes_differ);
}

TEST_CASE("synthetic traces satisfy the advertised feature contrasts") {
  for (int seed = 1; seed <= 30; ++seed) {
    SynthTraceConfig rc;
    rc.kind = TraceKind::READING;
    rc.seed = std::uint64_t(seed);
    auto [rl, rr] = synth_trace(rc);
    const auto rf = extract_features(rl, rr, {});
    CHECK(rf[6] > 1.0);

    SynthTraceConfig vc = rc;
    vc.kind = TraceKind::VIEWING;
    auto [vl, vr] = synth_trace(vc);
    const auto vf = extract_features(vl, vr, {});
    CHECK(vf[4] > rf[4]);

    const FixationConfig fix;
    check_event_invariants(segment_fixations(rr, fix), rr, fix);
    check_event_invariants(segment_fixations(vr, fix), vr, fix);
  }
}

TEST_CASE("synthetic trace config is validated") {
  SynthTraceConfig cfg;
  cfg.duration_s = 0.0;
  CHECK_THROWS(synth_trace(cfg));
  cfg = {};
  cfg.fps = 0.0;
  CHECK_THROWS(synth_trace(cfg));
  cfg = {};
  cfg.blink_rate_hz = -0.1;
  CHECK_THROWS(synth_trace(cfg));
  cfg = {};
  cfg.duration_s = 0.5;  // 15 frames cannot host a meaningful trace
  CHECK_THROWS(synth_trace(cfg));
}

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gazeforge/pupiltrack.hpp"

namespace gazeforge {

enum class Label { TEXT, IMAGE };

const char* label_name(Label label);
Label label_from(const std::string& name);

struct FixationEvent {
  std::size_t start_index = 0;  // sample positions, inclusive on both ends
  std::size_t end_index = 0;
  int point_count = 0;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double dispersion = 0.0;  // (max x - min x) + (max y - min y) over the window
};

struct FixationConfig {
  double dispersion_threshold = 15.0;  // px
  double min_duration_ms = 200.0;
  double fps = 30.0;  // sample rate the duration bound is expressed against
};

/// Dispersion-based fixation segmentation.  Within each run of valid samples
/// a window grows while its dispersion stays within the threshold; windows
/// lasting at least min_duration_ms become events.
std::vector<FixationEvent> segment_fixations(const GazeTrace& trace,
                                             const FixationConfig& cfg = {});

struct FixationStats {
  int max_count = 0;  // most samples in one fixation
  int min_count = 0;
  double avg_count = 0.0;
};

FixationStats fixation_count_stats(const std::vector<FixationEvent>& events);

enum class MrScope { ALL, SACCADES_ONLY };

/// Ratio of horizontal-dominant to vertical-dominant movements between
/// consecutive valid samples.  Steps below motion_threshold px (Chebyshev)
/// are ignored; |dx| >= |dy| counts as horizontal; the denominator is clamped
/// to 1 so the ratio stays finite.  SACCADES_ONLY drops steps inside
/// fixation events.  Throws when fewer than two samples are valid.
double movement_ratio(const GazeTrace& trace, double motion_threshold = 1.0,
                      MrScope scope = MrScope::ALL,
                      const std::vector<FixationEvent>* fixations = nullptr);

// Table layout of one sample: fixation count stats and movement ratio for the
// right then left eye, in this exact column order.
inline constexpr std::array<const char*, 8> kFeatureNames = {
    "MAX_FC_R", "MAX_FC_L", "MIN_FC_R", "MIN_FC_L",
    "AVG_FC_R", "AVG_FC_L", "MR_R",     "MR_L"};

struct FeatureVector {
  std::array<double, 8> values{};
  std::optional<Label> label;

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

struct FeatureConfig {
  FixationConfig fixation;
  double motion_threshold = 1.0;
  MrScope mr_scope = MrScope::ALL;
};

/// One feature vector from a left/right trace pair.
FeatureVector extract_features(const GazeTrace& left, const GazeTrace& right,
                               const FeatureConfig& cfg = {});

struct GazeDataset {
  std::vector<FeatureVector> rows;  // every row labeled
  std::string source;               // provenance only, not serialized
  std::uint64_t seed = 0;
};

/// CSV with the fixed header MAX_FC_R,...,MR_L,Label; six-decimal values with
/// trailing zeros trimmed, LF line endings.
void write_dataset(const GazeDataset& dataset, const std::string& path);
GazeDataset read_dataset(const std::string& path);

enum class TraceKind { READING, VIEWING };

TraceKind trace_kind_from(const std::string& name);
const char* trace_kind_name(TraceKind kind);

struct SynthTraceConfig {
  TraceKind kind = TraceKind::READING;
  double duration_s = 20.0;
  double fps = 30.0;
  std::uint64_t seed = 1;
  double blink_rate_hz = 0.2;  // expected dropout bursts per second
};

/// Plausible left/right gaze traces for the requested activity: READING walks
/// word by word along lines with a carriage return sweep, VIEWING dwells on a
/// handful of scattered regions.  Deterministic per seed.
std::pair<GazeTrace, GazeTrace> synth_trace(const SynthTraceConfig& cfg);

/// Labeled feature rows from synthetic traces: one TEXT row and one IMAGE row
/// per seed in [seed, seed + per_class).
GazeDataset synth_dataset(int per_class, std::uint64_t seed = 1, double duration_s = 20.0,
                          double fps = 30.0);

}  // namespace gazeforge

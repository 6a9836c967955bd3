#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "favc/rng.hpp"

namespace favc {

inline constexpr int kNumSources = 4;
inline constexpr int kNumTargets = 13;
inline constexpr int kNumChannels = 17;

// Fixed channel order: sources then targets.
const std::array<std::string, kNumChannels>& channel_names();

// Electrode geometry: unit-sphere 3-D points plus their azimuthal-equidistant
// 2-D projection from the vertex. Convention (documented, configurable via
// from_json): outer 10-20 ring on the equator at 18-degree azimuth steps
// from the nose meridian, midline Fz/Pz at 36 degrees inclination, lateral
// intermediates (F3, C3, P3 and mirrors) at great-circle midpoints.
struct Montage {
  std::vector<std::string> names;          // 17, channel_names order
  std::vector<std::array<double, 3>> pos3; // unit norm
  std::vector<std::array<double, 2>> pos2;
  std::vector<int> source_idx;             // {0,1,2,3}
  std::vector<int> target_idx;             // {4..16}

  int index_of(const std::string& name) const;
  std::string to_json() const;
  static Montage from_json(const std::string& text);
  // FNV-1a hash of the canonical serialization; stored in checkpoints.
  uint64_t fingerprint() const;
};

Montage standard_montage();

// One 6-s window: 4 source rows, optionally 13 target rows, microvolts.
struct Segment {
  std::string subject_id;
  double fs = 500.0;
  int samples = 3000;
  std::vector<double> sources;  // 4 x samples, row-major
  std::vector<double> targets;  // 13 x samples or empty

  bool has_targets() const { return !targets.empty(); }
  double* source_row(int i) { return sources.data() + static_cast<int64_t>(i) * samples; }
  const double* source_row(int i) const { return sources.data() + static_cast<int64_t>(i) * samples; }
  double* target_row(int i) { return targets.data() + static_cast<int64_t>(i) * samples; }
  const double* target_row(int i) const { return targets.data() + static_cast<int64_t>(i) * samples; }
};

// Per-channel normalization statistics over all 17 channels, computed from
// training subjects only.
struct ChannelStats {
  std::vector<double> mean;  // 17
  std::vector<double> stdev; // 17, floored at 1e-6

  std::string to_json() const;
  static ChannelStats from_json(const std::string& text);
  double source_sigma(int i) const { return stdev[static_cast<size_t>(i)]; }
  double target_sigma(int i) const { return stdev[static_cast<size_t>(kNumSources + i)]; }
};

struct Split {
  uint64_t seed = 0;
  std::vector<std::string> train, val, test;

  std::string to_json() const;
  static Split from_json(const std::string& text);
};

// Synthetic EEG generator: six latent band processes (five physiological
// bands plus a 1/f process) anchored at scalp locations; each channel is a
// distance-decaying mixture plus channel noise, scaled to 5-20 uV RMS.
struct SynthConfig {
  int segments_per_subject = 10;
  int samples = 3000;
  double fs = 500.0;
  // delta, theta, alpha, beta, low-gamma, pink
  std::array<double, 6> latent_gain = {1.0, 1.0, 1.0, 0.8, 0.5, 1.2};
  double noise_frac = 0.05;  // channel noise RMS relative to mixed signal
};

std::vector<Segment> synth_subject(const std::string& subject_id, uint64_t seed,
                                   const Montage& montage,
                                   const SynthConfig& config = {});

// Convenience: a whole roster of synthetic subjects (sub-000, sub-001, ...).
std::vector<Segment> synth_dataset(uint64_t seed, int n_subjects,
                                   const Montage& montage,
                                   const SynthConfig& config = {});

ChannelStats compute_stats(const std::vector<Segment>& train_segments);

// x' = (x - mu_c) / sigma_c per channel; denormalize inverts exactly.
Segment normalize(const Segment& s, const ChannelStats& stats);
Segment denormalize(const Segment& s, const ChannelStats& stats);

// Deterministic subject-disjoint split with the paper's 95/11/13 proportions.
Split split_subjects(const std::vector<std::string>& roster, uint64_t seed,
                     double train_frac = 95.0 / 119.0,
                     double val_frac = 11.0 / 119.0);

std::vector<std::string> subjects_of(const std::vector<Segment>& segments);
std::vector<Segment> filter_subjects(const std::vector<Segment>& segments,
                                     const std::vector<std::string>& subjects);

// Segment store: directory with manifest.json plus one little-endian float32
// raw file per segment (rows: sources then targets).
void save_segments(const std::string& dir, const std::vector<Segment>& segments);
std::vector<Segment> load_segments(const std::string& dir);

}  // namespace favc

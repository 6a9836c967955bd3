#include "favc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "favc/common.hpp"
#include "favc/fft.hpp"
#include "json.hpp"

namespace favc {

namespace fs = std::filesystem;

// ---- ChannelStats / Split json ----------------------------------------------

std::string ChannelStats::to_json() const {
  nlohmann::json j;
  j["channels"] = std::vector<std::string>(channel_names().begin(), channel_names().end());
  j["mean"] = mean;
  j["stdev"] = stdev;
  return j.dump();
}

ChannelStats ChannelStats::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ChannelStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stdev = j.at("stdev").get<std::vector<double>>();
  if (s.mean.size() != kNumChannels || s.stdev.size() != kNumChannels)
    fail_config("channel stats must cover all 17 channels");
  return s;
}

std::string Split::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["train"] = train;
  j["val"] = val;
  j["test"] = test;
  return j.dump();
}

Split Split::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Split s;
  s.seed = j.at("seed").get<uint64_t>();
  s.train = j.at("train").get<std::vector<std::string>>();
  s.val = j.at("val").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  return s;
}

// ---- synthetic generator ---------------------------------------------------

namespace {

struct Latent {
  double lo, hi;     // band edges, Hz
  bool pink;         // 1/f spectral envelope
  double anchor_x, anchor_y;
  double tau;        // squared-distance decay scale
};

const std::array<Latent, 6>& latent_table() {
  // anchors live in the 2-D projected montage space (radians from vertex)
  static const std::array<Latent, 6> latents = {{
      {0.7, 4.0, false, 0.0, 1.35, 1.0},    // delta, frontal pole
      {4.0, 8.0, false, 0.0, 0.63, 1.0},    // theta, frontal midline
      {8.5, 12.0, false, 0.0, -1.35, 1.2},  // alpha, posterior
      {13.0, 30.0, false, 0.0, 0.0, 1.0},   // beta, central
      {30.0, 45.0, false, -1.2, 0.1, 1.0},  // low-gamma, left temporal
      {0.7, 45.0, true, 0.0, 0.0, 8.0},     // broad 1/f background
  }};
  return latents;
}

// band-limited unit-RMS noise via exact FFT masking
std::vector<double> band_noise(Rng& rng, int n, double fs, double lo, double hi,
                               bool pink) {
  std::vector<std::complex<double>> spec(static_cast<size_t>(n), {0.0, 0.0});
  for (int k = 1; k < n / 2; ++k) {
    double f = k * fs / n;
    if (f < lo || f > hi) continue;
    double amp = pink ? 1.0 / std::sqrt(f) : 1.0;
    std::complex<double> v(amp * rng.normal(), amp * rng.normal());
    spec[static_cast<size_t>(k)] = v;
    spec[static_cast<size_t>(n - k)] = std::conj(v);
  }
  fft::transform(spec, true);
  std::vector<double> x(static_cast<size_t>(n));
  double ss = 0;
  for (int t = 0; t < n; ++t) {
    x[static_cast<size_t>(t)] = spec[static_cast<size_t>(t)].real() / n;
    ss += x[static_cast<size_t>(t)] * x[static_cast<size_t>(t)];
  }
  double r = std::sqrt(ss / n);
  if (r > 0)
    for (auto& v : x) v /= r;
  return x;
}

double channel_target_rms(int channel) {
  // fixed per-channel RMS in [5, 20] uV
  Rng rng(Rng::mix(0xfacade, static_cast<uint64_t>(channel)));
  return 5.0 + 15.0 * rng.uniform();
}

}  // namespace

std::vector<Segment> synth_subject(const std::string& subject_id, uint64_t seed,
                                   const Montage& montage,
                                   const SynthConfig& config) {
  const auto& latents = latent_table();
  Rng subject_rng(Rng::mix(seed, Rng::hash_str(subject_id)));

  // subject-level mixing structure
  std::array<double, 6> gain;
  std::array<std::array<double, 2>, 6> anchor;
  for (size_t l = 0; l < latents.size(); ++l) {
    gain[l] = config.latent_gain[l] * std::exp(0.3 * subject_rng.normal());
    anchor[l] = {latents[l].anchor_x + 0.15 * subject_rng.normal(),
                 latents[l].anchor_y + 0.15 * subject_rng.normal()};
  }
  double subject_amp = subject_rng.uniform(0.9, 1.1);

  std::vector<std::array<double, 6>> weights(kNumChannels);
  for (int c = 0; c < kNumChannels; ++c)
    for (size_t l = 0; l < latents.size(); ++l) {
      double dx = montage.pos2[static_cast<size_t>(c)][0] - anchor[l][0];
      double dy = montage.pos2[static_cast<size_t>(c)][1] - anchor[l][1];
      weights[static_cast<size_t>(c)][l] =
          gain[l] * std::exp(-(dx * dx + dy * dy) / latents[l].tau);
    }

  std::vector<Segment> out;
  out.reserve(static_cast<size_t>(config.segments_per_subject));
  const int n = config.samples;
  for (int si = 0; si < config.segments_per_subject; ++si) {
    Rng rng(Rng::mix(Rng::mix(seed, Rng::hash_str(subject_id)),
                     0x5e9 + static_cast<uint64_t>(si)));
    std::array<std::vector<double>, 6> lat;
    for (size_t l = 0; l < latents.size(); ++l)
      lat[l] = band_noise(rng, n, config.fs, latents[l].lo, latents[l].hi,
                          latents[l].pink);

    Segment seg;
    seg.subject_id = subject_id;
    seg.fs = config.fs;
    seg.samples = n;
    seg.sources.resize(static_cast<size_t>(kNumSources) * n);
    seg.targets.resize(static_cast<size_t>(kNumTargets) * n);
    for (int c = 0; c < kNumChannels; ++c) {
      std::vector<double> sig(static_cast<size_t>(n), 0.0);
      for (size_t l = 0; l < latents.size(); ++l) {
        double w = weights[static_cast<size_t>(c)][l];
        for (int t = 0; t < n; ++t) sig[static_cast<size_t>(t)] += w * lat[l][static_cast<size_t>(t)];
      }
      double ss = 0;
      for (double v : sig) ss += v * v;
      double sig_rms = std::sqrt(ss / n);
      double noise_rms = config.noise_frac * sig_rms;
      for (auto& v : sig) v += noise_rms * rng.normal();
      // rescale to the channel's physical RMS
      ss = 0;
      for (double v : sig) ss += v * v;
      double cur = std::sqrt(ss / n);
      double want = channel_target_rms(c) * subject_amp;
      double k = cur > 0 ? want / cur : 0.0;
      double* row = c < kNumSources ? seg.source_row(c)
                                    : seg.target_row(c - kNumSources);
      for (int t = 0; t < n; ++t) row[t] = k * sig[static_cast<size_t>(t)];
    }
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<Segment> synth_dataset(uint64_t seed, int n_subjects,
                                   const Montage& montage,
                                   const SynthConfig& config) {
  std::vector<Segment> all;
  for (int s = 0; s < n_subjects; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "sub-%03d", s);
    auto segs = synth_subject(name, seed, montage, config);
    for (auto& seg : segs) all.push_back(std::move(seg));
  }
  return all;
}

// ---- statistics and normalization -------------------------------------------

ChannelStats compute_stats(const std::vector<Segment>& train_segments) {
  if (train_segments.empty()) fail_config("compute_stats: no training segments");
  ChannelStats s;
  s.mean.assign(kNumChannels, 0.0);
  s.stdev.assign(kNumChannels, 0.0);
  std::vector<int64_t> count(kNumChannels, 0);
  for (const auto& seg : train_segments) {
    if (!seg.has_targets())
      fail_config("compute_stats: training segment lacks target rows");
    for (int c = 0; c < kNumChannels; ++c) {
      const double* row = c < kNumSources ? seg.source_row(c)
                                          : seg.target_row(c - kNumSources);
      for (int t = 0; t < seg.samples; ++t) s.mean[static_cast<size_t>(c)] += row[t];
      count[static_cast<size_t>(c)] += seg.samples;
    }
  }
  for (int c = 0; c < kNumChannels; ++c) s.mean[static_cast<size_t>(c)] /= static_cast<double>(count[static_cast<size_t>(c)]);
  for (const auto& seg : train_segments)
    for (int c = 0; c < kNumChannels; ++c) {
      const double* row = c < kNumSources ? seg.source_row(c)
                                          : seg.target_row(c - kNumSources);
      for (int t = 0; t < seg.samples; ++t) {
        double d = row[t] - s.mean[static_cast<size_t>(c)];
        s.stdev[static_cast<size_t>(c)] += d * d;
      }
    }
  for (int c = 0; c < kNumChannels; ++c) {
    s.stdev[static_cast<size_t>(c)] = std::sqrt(s.stdev[static_cast<size_t>(c)] / static_cast<double>(count[static_cast<size_t>(c)]));
    if (s.stdev[static_cast<size_t>(c)] < 1e-6) {
      std::fprintf(stderr, "warning: channel %s is constant, flooring sigma at 1e-6\n",
                   channel_names()[static_cast<size_t>(c)].c_str());
      s.stdev[static_cast<size_t>(c)] = 1e-6;
    }
  }
  return s;
}

namespace {
Segment apply_affine(const Segment& s, const ChannelStats& stats, bool forward) {
  if (stats.mean.size() != kNumChannels)
    fail_config("normalize: stats do not cover the montage");
  Segment out = s;
  for (int c = 0; c < kNumChannels; ++c) {
    bool is_source = c < kNumSources;
    if (!is_source && !s.has_targets()) continue;
    double* row = is_source ? out.source_row(c) : out.target_row(c - kNumSources);
    double mu = stats.mean[static_cast<size_t>(c)];
    double sd = stats.stdev[static_cast<size_t>(c)];
    for (int t = 0; t < s.samples; ++t)
      row[t] = forward ? (row[t] - mu) / sd : row[t] * sd + mu;
  }
  return out;
}
}  // namespace

Segment normalize(const Segment& s, const ChannelStats& stats) {
  return apply_affine(s, stats, true);
}

Segment denormalize(const Segment& s, const ChannelStats& stats) {
  return apply_affine(s, stats, false);
}

// ---- splits ----------------------------------------------------------------

Split split_subjects(const std::vector<std::string>& roster, uint64_t seed,
                     double train_frac, double val_frac) {
  if (roster.size() < 3) fail_config("split_subjects: roster must have >= 3 subjects");
  std::vector<std::string> shuffled = roster;
  Rng rng(Rng::mix(seed, 0x51137ULL));
  rng.shuffle(shuffled);
  int n = static_cast<int>(shuffled.size());
  int n_train = static_cast<int>(std::lround(train_frac * n));
  int n_val = static_cast<int>(std::lround(val_frac * n));
  n_train = std::max(1, n_train);
  n_val = std::max(1, n_val);
  while (n_train + n_val > n - 1) {
    if (n_train > 1)
      --n_train;
    else
      --n_val;
  }
  Split s;
  s.seed = seed;
  s.train.assign(shuffled.begin(), shuffled.begin() + n_train);
  s.val.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
  s.test.assign(shuffled.begin() + n_train + n_val, shuffled.end());
  return s;
}

std::vector<std::string> subjects_of(const std::vector<Segment>& segments) {
  std::vector<std::string> out;
  for (const auto& s : segments)
    if (std::find(out.begin(), out.end(), s.subject_id) == out.end())
      out.push_back(s.subject_id);
  return out;
}

std::vector<Segment> filter_subjects(const std::vector<Segment>& segments,
                                     const std::vector<std::string>& subjects) {
  std::vector<Segment> out;
  for (const auto& s : segments)
    if (std::find(subjects.begin(), subjects.end(), s.subject_id) != subjects.end())
      out.push_back(s);
  return out;
}

// ---- segment store ---------------------------------------------------------

namespace {
constexpr int kStoreVersion = 1;

void write_f32(std::ofstream& f, const double* data, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    float v = static_cast<float>(data[i]);
    f.write(reinterpret_cast<const char*>(&v), sizeof(float));
  }
}
}  // namespace

void save_segments(const std::string& dir, const std::vector<Segment>& segments) {
  if (segments.empty()) fail_config("save_segments: nothing to save");
  fs::create_directories(dir);
  double fs_hz = segments[0].fs;
  int samples = segments[0].samples;
  nlohmann::json manifest;
  manifest["version"] = kStoreVersion;
  manifest["fs"] = fs_hz;
  manifest["samples"] = samples;
  manifest["channel_order"] =
      std::vector<std::string>(channel_names().begin(), channel_names().end());
  manifest["subjects"] = subjects_of(segments);
  nlohmann::json seg_list = nlohmann::json::array();
  for (size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.fs != fs_hz || s.samples != samples)
      fail_config("save_segments: inconsistent fs/length across segments");
    char fname[32];
    std::snprintf(fname, sizeof(fname), "seg-%05zu.f32", i);
    seg_list.push_back({{"file", fname},
                        {"subject", s.subject_id},
                        {"has_targets", s.has_targets()}});
    std::ofstream f(fs::path(dir) / fname, std::ios::binary);
    if (!f) fail_io(std::string("cannot write segment file ") + fname);
    write_f32(f, s.sources.data(), static_cast<int64_t>(s.sources.size()));
    if (s.has_targets())
      write_f32(f, s.targets.data(), static_cast<int64_t>(s.targets.size()));
  }
  manifest["segments"] = seg_list;
  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << "\n";
}

std::vector<Segment> load_segments(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) fail_io("segment store: missing manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail_io(std::string("segment store: malformed manifest: ") + e.what());
  }
  if (manifest.at("version").get<int>() != kStoreVersion)
    fail_io("segment store: unsupported version");
  double fs_hz = manifest.at("fs").get<double>();
  int samples = manifest.at("samples").get<int>();
  std::vector<Segment> out;
  for (const auto& entry : manifest.at("segments")) {
    Segment s;
    s.subject_id = entry.at("subject").get<std::string>();
    s.fs = fs_hz;
    s.samples = samples;
    bool has_targets = entry.at("has_targets").get<bool>();
    std::string fname = entry.at("file").get<std::string>();
    std::ifstream f(fs::path(dir) / fname, std::ios::binary);
    if (!f) fail_io("segment store: missing payload " + fname);
    int rows = kNumSources + (has_targets ? kNumTargets : 0);
    int64_t expect = static_cast<int64_t>(rows) * samples;
    std::vector<float> buf(static_cast<size_t>(expect));
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(expect * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(expect * sizeof(float)))
      fail_io("segment store: truncated payload " + fname);
    char probe;
    if (f.read(&probe, 1))
      fail_io("segment store: payload longer than manifest says: " + fname);
    s.sources.assign(buf.begin(), buf.begin() + static_cast<int64_t>(kNumSources) * samples);
    if (has_targets)
      s.targets.assign(buf.begin() + static_cast<int64_t>(kNumSources) * samples, buf.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace favc

#include "favc/perturb.hpp"

#include <cmath>
#include <complex>

#include "favc/common.hpp"
#include "favc/dsp.hpp"
#include "favc/fft.hpp"

namespace favc::perturb {

namespace {

double row_rms(const double* x, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += x[i] * x[i];
  return std::sqrt(s / n);
}

double snr_to_scale(double snr_db) { return std::sqrt(std::pow(10.0, snr_db / 10.0)); }

}  // namespace

Condition condition_from_name(const std::string& name) {
  for (Condition c : all_conditions())
    if (condition_name(c) == name) return c;
  fail_config("unknown perturbation condition: " + name);
}

const std::string& condition_name(Condition c) {
  static const std::array<std::string, 6> names = {"clean", "awgn",  "emg",
                                                   "dropout", "gain", "mixed"};
  return names[static_cast<size_t>(c)];
}

const std::vector<Condition>& all_conditions() {
  static const std::vector<Condition> all = {Condition::Clean,   Condition::Awgn,
                                             Condition::Emg,     Condition::Dropout,
                                             Condition::Gain,    Condition::Mixed};
  return all;
}

Rng rng_for(uint64_t seed, const std::string& condition, int repeat,
            int segment_index) {
  return Rng::derive(seed, condition, static_cast<uint64_t>(repeat),
                     static_cast<uint64_t>(segment_index));
}

Segment awgn(const Segment& seg, double snr_db, Rng& rng) {
  Segment out = seg;
  for (int c = 0; c < kNumSources; ++c) {
    double* row = out.source_row(c);
    double sigma = row_rms(row, seg.samples) / snr_to_scale(snr_db);
    for (int t = 0; t < seg.samples; ++t) row[t] += sigma * rng.normal();
  }
  return out;
}

Segment emg_burst(const Segment& seg, double snr_db, int n_bursts,
                  double dur_lo_s, double dur_hi_s, double chan_prob, Rng& rng) {
  if (dur_lo_s <= 0 || dur_hi_s < dur_lo_s)
    fail_config("emg_burst: invalid duration range");
  Segment out = seg;
  for (int c = 0; c < kNumSources; ++c) {
    bool hit = rng.uniform() < chan_prob;
    if (!hit) continue;
    double* row = out.source_row(c);
    double target_rms = row_rms(seg.source_row(c), seg.samples) / snr_to_scale(snr_db);
    for (int b = 0; b < n_bursts; ++b) {
      double dur_s = rng.uniform(dur_lo_s, dur_hi_s);
      int dur = std::min(seg.samples,
                         static_cast<int>(std::lround(dur_s * seg.fs)));
      if (dur < 8) dur = 8;
      int start = rng.uniform_int(seg.samples - dur + 1);

      // white noise masked to 20-45 Hz in the exact-duration DFT
      std::vector<std::complex<double>> spec(static_cast<size_t>(dur), {0.0, 0.0});
      for (int t = 0; t < dur; ++t) spec[static_cast<size_t>(t)] = {rng.normal(), 0.0};
      fft::transform(spec, false);
      for (int k = 0; k <= dur / 2; ++k) {
        double f = k * seg.fs / dur;
        bool keep = f >= 20.0 && f <= 45.0;
        if (!keep) {
          spec[static_cast<size_t>(k)] = {0.0, 0.0};
          if (k > 0 && k < dur - k) spec[static_cast<size_t>(dur - k)] = {0.0, 0.0};
        }
      }
      fft::transform(spec, true);
      std::vector<double> burst(static_cast<size_t>(dur));
      for (int t = 0; t < dur; ++t) burst[static_cast<size_t>(t)] = spec[static_cast<size_t>(t)].real() / dur;

      auto env = dsp::hann(dur);
      for (int t = 0; t < dur; ++t) burst[static_cast<size_t>(t)] *= env[static_cast<size_t>(t)];
      double brms = row_rms(burst.data(), dur);
      double k = brms > 0 ? target_rms / brms : 0.0;
      for (int t = 0; t < dur; ++t) row[start + t] += k * burst[static_cast<size_t>(t)];
    }
  }
  return out;
}

Segment dropout(const Segment& seg, double duration_s, Rng& rng,
                DropoutInfo* info) {
  int len = static_cast<int>(std::lround(duration_s * seg.fs));
  if (len > seg.samples) fail_config("dropout: window longer than segment");
  Segment out = seg;
  int channel = rng.uniform_int(kNumSources);
  int start = rng.uniform_int(seg.samples - len + 1);
  double* row = out.source_row(channel);
  for (int t = 0; t < len; ++t) row[start + t] = 0.0;
  if (info) *info = {channel, start, len};
  return out;
}

Segment gain_mismatch(const Segment& seg, double rho, Rng& rng,
                      std::array<double, 4>* gains) {
  if (rho < 0.0 || rho >= 1.0) fail_config("gain_mismatch: rho must be in [0, 1)");
  Segment out = seg;
  for (int c = 0; c < kNumSources; ++c) {
    double g = rng.uniform(1.0 - rho, 1.0 + rho);
    if (gains) (*gains)[static_cast<size_t>(c)] = g;
    double* row = out.source_row(c);
    for (int t = 0; t < seg.samples; ++t) row[t] *= g;
  }
  return out;
}

Segment mixed(const Segment& seg, const PerturbParams& p, Rng& rng) {
  Segment out = seg;
  if (p.mixed_gain) out = gain_mismatch(out, p.gain_rho, rng);
  if (p.mixed_awgn) out = awgn(out, p.awgn_snr_db, rng);
  if (p.mixed_emg)
    out = emg_burst(out, p.emg_snr_db, p.emg_bursts, p.emg_dur_lo_s,
                    p.emg_dur_hi_s, p.emg_chan_prob, rng);
  if (p.mixed_dropout) out = dropout(out, p.dropout_duration_s, rng);
  return out;
}

Segment apply(const Segment& seg, Condition c, const PerturbParams& p, Rng& rng) {
  switch (c) {
    case Condition::Clean:
      return seg;
    case Condition::Awgn:
      return awgn(seg, p.awgn_snr_db, rng);
    case Condition::Emg:
      return emg_burst(seg, p.emg_snr_db, p.emg_bursts, p.emg_dur_lo_s,
                       p.emg_dur_hi_s, p.emg_chan_prob, rng);
    case Condition::Dropout:
      return dropout(seg, p.dropout_duration_s, rng);
    case Condition::Gain:
      return gain_mismatch(seg, p.gain_rho, rng);
    case Condition::Mixed:
      return mixed(seg, p, rng);
  }
  fail_config("apply: bad condition");
}

}  // namespace favc::perturb

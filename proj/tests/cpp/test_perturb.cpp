#include "favc/perturb.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "favc/dsp.hpp"

using namespace favc;
using namespace favc::perturb;

namespace {

Segment make_eeg_segment(uint64_t seed, int samples = 3000) {
  Montage m = standard_montage();
  SynthConfig cfg;
  cfg.segments_per_subject = 1;
  cfg.samples = samples;
  return synth_subject("sub-p", seed, m, cfg)[0];
}

double rms_range(const double* x, int lo, int hi) {
  double s = 0;
  for (int i = lo; i < hi; ++i) s += x[i] * x[i];
  return std::sqrt(s / (hi - lo));
}

}  // namespace

TEST(Perturb, TargetsNeverTouched) {
  Segment s = make_eeg_segment(1);
  PerturbParams p;
  for (Condition c : all_conditions()) {
    Rng rng = rng_for(7, condition_name(c), 0, 0);
    Segment out = apply(s, c, p, rng);
    ASSERT_EQ(out.targets.size(), s.targets.size());
    for (size_t i = 0; i < s.targets.size(); ++i)
      EXPECT_EQ(out.targets[i], s.targets[i]) << condition_name(c);
  }
}

TEST(Perturb, BitIdenticalFromDerivation) {
  Segment s = make_eeg_segment(2);
  PerturbParams p;
  for (Condition c : all_conditions()) {
    Rng r1 = rng_for(11, condition_name(c), 2, 5);
    Rng r2 = rng_for(11, condition_name(c), 2, 5);
    Segment a = apply(s, c, p, r1);
    Segment b = apply(s, c, p, r2);
    for (size_t i = 0; i < a.sources.size(); ++i)
      EXPECT_EQ(a.sources[i], b.sources[i]) << condition_name(c);
    // a different repeat index gives a different stream
    if (c != Condition::Clean) {
      Rng r3 = rng_for(11, condition_name(c), 3, 5);
      Segment d = apply(s, c, p, r3);
      bool same = true;
      for (size_t i = 0; i < a.sources.size() && same; ++i)
        same = a.sources[i] == d.sources[i];
      EXPECT_FALSE(same) << condition_name(c);
    }
  }
}

TEST(Awgn, HugeSnrIsIdentity) {
  Segment s = make_eeg_segment(3);
  Rng rng = rng_for(1, "awgn", 0, 0);
  Segment out = awgn(s, 300.0, rng);
  for (int c = 0; c < kNumSources; ++c) {
    double base = rms_range(s.source_row(c), 0, s.samples);
    for (int t = 0; t < s.samples; ++t)
      EXPECT_LE(std::fabs(out.source_row(c)[t] - s.source_row(c)[t]), 1e-10 * base);
  }
}

TEST(Awgn, EmpiricalSnrWithinHalfDb) {
  PerturbParams p;
  double num = 0, den = 0;
  for (int i = 0; i < 100; ++i) {
    Segment s = make_eeg_segment(100 + static_cast<uint64_t>(i), 1500);
    Rng rng = rng_for(55, "awgn", 0, i);
    Segment out = awgn(s, 0.0, rng);  // 0 dB: noise RMS == signal RMS
    for (int c = 0; c < kNumSources; ++c) {
      for (int t = 0; t < s.samples; ++t) {
        double n = out.source_row(c)[t] - s.source_row(c)[t];
        num += s.source_row(c)[t] * s.source_row(c)[t];
        den += n * n;
      }
    }
  }
  double snr_db = 10.0 * std::log10(num / den);
  EXPECT_NEAR(snr_db, 0.0, 0.5);
}

TEST(Awgn, ZeroRmsChannelGetsNoNoise) {
  Segment s = make_eeg_segment(4);
  for (int t = 0; t < s.samples; ++t) s.source_row(2)[t] = 0.0;
  Rng rng = rng_for(2, "awgn", 0, 0);
  Segment out = awgn(s, 10.0, rng);
  for (int t = 0; t < s.samples; ++t) EXPECT_EQ(out.source_row(2)[t], 0.0);
}

TEST(Emg, ZeroChannelProbabilityIsIdentity) {
  Segment s = make_eeg_segment(5);
  Rng rng = rng_for(3, "emg", 0, 0);
  Segment out = emg_burst(s, 10.0, 2, 0.3, 0.8, 0.0, rng);
  for (size_t i = 0; i < s.sources.size(); ++i)
    EXPECT_EQ(out.sources[i], s.sources[i]);
}

TEST(Emg, BurstBandLimitedTo20To45) {
  // welch inspection oracle on the injected difference signal
  double inband = 0, outband = 0;
  for (int i = 0; i < 20; ++i) {
    Segment s = make_eeg_segment(200 + static_cast<uint64_t>(i));
    Rng rng = rng_for(9, "emg", 0, i);
    Segment out = emg_burst(s, 0.0, 2, 0.3, 0.8, 1.0, rng);
    for (int c = 0; c < kNumSources; ++c) {
      std::vector<double> diff(static_cast<size_t>(s.samples));
      for (int t = 0; t < s.samples; ++t)
        diff[static_cast<size_t>(t)] = out.source_row(c)[t] - s.source_row(c)[t];
      dsp::WelchParams wp;
      wp.f_lo = 0.5;
      wp.f_hi = 250.0 - 0.5;
      auto freqs = dsp::welch_grid(s.fs, wp);
      auto psd = dsp::welch_psd(diff.data(), s.samples, s.fs, wp);
      for (size_t k = 0; k < freqs.size(); ++k) {
        if (freqs[k] >= 18.0 && freqs[k] <= 47.0)
          inband += psd[k];
        else
          outband += psd[k];
      }
    }
  }
  EXPECT_LT(outband / (inband + outband), 0.05);
}

TEST(Emg, BurstSupportSnrWithinHalfDb) {
  double num = 0, den = 0;
  for (int i = 0; i < 100; ++i) {
    Segment s = make_eeg_segment(300 + static_cast<uint64_t>(i), 1500);
    Rng rng = rng_for(10, "emg", 0, i);
    // one burst per channel, always on, so the support is identifiable
    Segment out = emg_burst(s, 10.0, 1, 0.5, 0.5, 1.0, rng);
    for (int c = 0; c < kNumSources; ++c) {
      double sig = 0, noi = 0;
      int support = 0;
      for (int t = 0; t < s.samples; ++t) {
        double d = out.source_row(c)[t] - s.source_row(c)[t];
        if (d != 0.0) {
          noi += d * d;
          ++support;
        }
      }
      for (int t = 0; t < s.samples; ++t) sig += s.source_row(c)[t] * s.source_row(c)[t];
      if (support == 0) continue;
      num += sig / s.samples;
      den += noi / support;
    }
  }
  double snr_db = 10.0 * std::log10(num / den);
  EXPECT_NEAR(snr_db, 10.0, 0.5);
}

TEST(Dropout, ExactWindowInExactlyOneChannel) {
  Segment s = make_eeg_segment(6);
  Rng rng = rng_for(4, "dropout", 0, 0);
  DropoutInfo info;
  Segment out = dropout(s, 0.5, rng, &info);
  EXPECT_EQ(info.length, 250);
  int zero_runs = 0;
  for (int c = 0; c < kNumSources; ++c) {
    if (c == info.channel) {
      for (int t = 0; t < info.length; ++t)
        EXPECT_EQ(out.source_row(c)[info.start + t], 0.0);
      // samples outside the window unchanged
      for (int t = 0; t < s.samples; ++t) {
        if (t < info.start || t >= info.start + info.length)
          EXPECT_EQ(out.source_row(c)[t], s.source_row(c)[t]);
      }
      ++zero_runs;
    } else {
      for (int t = 0; t < s.samples; ++t)
        EXPECT_EQ(out.source_row(c)[t], s.source_row(c)[t]);
    }
  }
  EXPECT_EQ(zero_runs, 1);
}

TEST(Dropout, StartUniformOverValidRange) {
  // frequency-count oracle: 10 buckets over the valid start range
  Segment s = make_eeg_segment(7);
  const int len = 250;
  const int range = s.samples - len + 1;
  std::array<int, 10> buckets{};
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    Rng rng = rng_for(5, "dropout", 0, i);
    DropoutInfo info;
    dropout(s, 0.5, rng, &info);
    EXPECT_GE(info.start, 0);
    EXPECT_LT(info.start, range);
    buckets[static_cast<size_t>(info.start * 10 / range)]++;
  }
  // chi-square sanity: each bucket within 4 sigma of the uniform expectation
  double expect = draws / 10.0;
  double sigma = std::sqrt(expect * 0.9);
  for (int b = 0; b < 10; ++b)
    EXPECT_NEAR(buckets[static_cast<size_t>(b)], expect, 4 * sigma) << "bucket " << b;
}

TEST(Gain, IdentityAtZeroRhoAndConstantRatio) {
  Segment s = make_eeg_segment(8);
  Rng rng = rng_for(6, "gain", 0, 0);
  Segment out = gain_mismatch(s, 0.0, rng);
  for (size_t i = 0; i < s.sources.size(); ++i) EXPECT_EQ(out.sources[i], s.sources[i]);

  Rng rng2 = rng_for(6, "gain", 0, 1);
  std::array<double, 4> gains;
  Segment out2 = gain_mismatch(s, 0.2, rng2, &gains);
  for (int c = 0; c < kNumSources; ++c) {
    EXPECT_GE(gains[static_cast<size_t>(c)], 0.8);
    EXPECT_LE(gains[static_cast<size_t>(c)], 1.2);
    for (int t = 0; t < s.samples; ++t)
      if (s.source_row(c)[t] != 0.0)
        EXPECT_NEAR(out2.source_row(c)[t] / s.source_row(c)[t], gains[static_cast<size_t>(c)], 1e-12);
  }
}

TEST(Gain, EmpiricalDistributionUniform) {
  // KS-style oracle over 1e4 draws
  const int draws = 10000;
  std::vector<double> gs;
  gs.reserve(draws);
  Segment s = make_eeg_segment(9, 64);
  for (int i = 0; i < draws / 4; ++i) {
    Rng rng = rng_for(8, "gain", 0, i);
    std::array<double, 4> gains;
    gain_mismatch(s, 0.2, rng, &gains);
    for (double g : gains) gs.push_back(g);
  }
  std::sort(gs.begin(), gs.end());
  double worst = 0;
  for (size_t i = 0; i < gs.size(); ++i) {
    double cdf = (gs[i] - 0.8) / 0.4;
    double emp = static_cast<double>(i + 1) / static_cast<double>(gs.size());
    worst = std::max(worst, std::fabs(cdf - emp));
  }
  EXPECT_LT(worst, 0.02);
}

TEST(Mixed, SingleComponentRunsReproduceStandaloneOps) {
  Segment s = make_eeg_segment(10);
  PerturbParams p;
  auto only = [&](bool g, bool a, bool e, bool d) {
    PerturbParams q = p;
    q.mixed_gain = g;
    q.mixed_awgn = a;
    q.mixed_emg = e;
    q.mixed_dropout = d;
    Rng rng = rng_for(12, "mixed", 0, 0);
    return mixed(s, q, rng);
  };
  {
    Rng rng = rng_for(12, "mixed", 0, 0);
    Segment want = gain_mismatch(s, p.gain_rho, rng);
    Segment got = only(true, false, false, false);
    for (size_t i = 0; i < want.sources.size(); ++i) EXPECT_EQ(got.sources[i], want.sources[i]);
  }
  {
    Rng rng = rng_for(12, "mixed", 0, 0);
    Segment want = awgn(s, p.awgn_snr_db, rng);
    Segment got = only(false, true, false, false);
    for (size_t i = 0; i < want.sources.size(); ++i) EXPECT_EQ(got.sources[i], want.sources[i]);
  }
  {
    Rng rng = rng_for(12, "mixed", 0, 0);
    Segment want = dropout(s, p.dropout_duration_s, rng);
    Segment got = only(false, false, false, true);
    for (size_t i = 0; i < want.sources.size(); ++i) EXPECT_EQ(got.sources[i], want.sources[i]);
  }
}

TEST(Mixed, AllFourSignaturesDetectable) {
  Segment s = make_eeg_segment(11);
  PerturbParams p;
  p.emg_chan_prob = 1.0;  // make the EMG signature certain on every channel
  Rng rng = rng_for(13, "mixed", 0, 0);
  Segment out = mixed(s, p, rng);

  // dropout: one channel contains >= 250 consecutive exact zeros
  int dropout_channels = 0;
  for (int c = 0; c < kNumSources; ++c) {
    int run = 0, best = 0;
    for (int t = 0; t < s.samples; ++t) {
      run = out.source_row(c)[t] == 0.0 ? run + 1 : 0;
      best = std::max(best, run);
    }
    if (best >= 250) ++dropout_channels;
  }
  EXPECT_EQ(dropout_channels, 1);

  // AWGN: broadband power far above the 45 Hz synthesis limit
  dsp::WelchParams hi;
  hi.f_lo = 60.0;
  hi.f_hi = 240.0;
  double clean_hi = 0, noisy_hi = 0;
  for (int c = 0; c < kNumSources; ++c) {
    auto a = dsp::welch_psd(s.source_row(c), s.samples, s.fs, hi);
    auto b = dsp::welch_psd(out.source_row(c), s.samples, s.fs, hi);
    for (double v : a) clean_hi += v;
    for (double v : b) noisy_hi += v;
  }
  EXPECT_GT(noisy_hi, 10.0 * clean_hi);

  // EMG: 20-45 Hz power rises
  dsp::WelchParams eb;
  eb.f_lo = 20.0;
  eb.f_hi = 45.0;
  double clean_band = 0, noisy_band = 0;
  for (int c = 0; c < kNumSources; ++c) {
    auto a = dsp::welch_psd(s.source_row(c), s.samples, s.fs, eb);
    auto b = dsp::welch_psd(out.source_row(c), s.samples, s.fs, eb);
    for (double v : a) clean_band += v;
    for (double v : b) noisy_band += v;
  }
  EXPECT_GT(noisy_band, 1.2 * clean_band);

  // gain: the same stream re-derived exposes the drawn factors; at least one
  // channel is rescaled away from 1
  Rng probe = rng_for(13, "mixed", 0, 0);
  std::array<double, 4> gains;
  gain_mismatch(s, p.gain_rho, probe, &gains);
  bool some_gain = false;
  for (double g : gains) some_gain = some_gain || std::fabs(g - 1.0) > 0.02;
  EXPECT_TRUE(some_gain);
}

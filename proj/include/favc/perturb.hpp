#pragma once

#include <array>
#include <optional>
#include <string>

#include "favc/dataset.hpp"
#include "favc/rng.hpp"

namespace favc::perturb {

// Wearable-like source corruptions. Every operation touches the 4 source
// rows only; target rows pass through untouched.
enum class Condition { Clean, Awgn, Emg, Dropout, Gain, Mixed };

Condition condition_from_name(const std::string& name);
const std::string& condition_name(Condition c);
const std::vector<Condition>& all_conditions();

struct PerturbParams {
  double awgn_snr_db = 10.0;
  double emg_snr_db = 10.0;
  int emg_bursts = 2;
  double emg_dur_lo_s = 0.30;
  double emg_dur_hi_s = 0.80;
  double emg_chan_prob = 0.50;
  double dropout_duration_s = 0.50;
  double gain_rho = 0.20;
  // component switches honored by mixed(); the stream advances only for
  // enabled components so a single-component mixed run reproduces the
  // standalone op exactly
  bool mixed_gain = true;
  bool mixed_awgn = true;
  bool mixed_emg = true;
  bool mixed_dropout = true;
};

struct DropoutInfo {
  int channel = -1;
  int start = 0;
  int length = 0;
};

// Derived stream: (split seed, condition name, repeat, segment index)
// fully determines the corruption.
Rng rng_for(uint64_t seed, const std::string& condition, int repeat,
            int segment_index);

Segment awgn(const Segment& seg, double snr_db, Rng& rng);
Segment emg_burst(const Segment& seg, double snr_db, int n_bursts,
                  double dur_lo_s, double dur_hi_s, double chan_prob, Rng& rng);
Segment dropout(const Segment& seg, double duration_s, Rng& rng,
                DropoutInfo* info = nullptr);
Segment gain_mismatch(const Segment& seg, double rho, Rng& rng,
                      std::array<double, 4>* gains = nullptr);
// gain -> AWGN -> EMG -> dropout, all drawing from the same stream
Segment mixed(const Segment& seg, const PerturbParams& p, Rng& rng);

Segment apply(const Segment& seg, Condition c, const PerturbParams& p, Rng& rng);

}  // namespace favc::perturb

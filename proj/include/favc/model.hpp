#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "favc/dataset.hpp"
#include "favc/tensor.hpp"

namespace favc {

// Generator architecture. Defaults give the full-size network; toy() divides
// the widths by 8 for gradient checks and desk-scale training runs.
struct ArchConfig {
  int T = 3000;
  double fs = 500.0;
  std::array<int, 4> stage_widths = {32, 64, 128, 256};
  std::array<int, 3> kernel_sizes = {3, 5, 9};
  int latent_blocks = 32;  // B; final width must be divisible by it
  int embed_dim = 32;
  int embed_hidden = 64;
  int attn_hidden = 64;  // d_h
  int gat_hidden = 64;   // d_g
  int neighbors = 4;     // k_N
  double tau_p = 0.0;    // <= 0 derives the median-distance default
  double lambda_g_init = 1.0;
  std::array<int, 3> decoder_widths = {128, 64, 32};
  int scale = 1;  // width divisor this config was derived with

  static ArchConfig defaults() { return {}; }
  static ArchConfig toy();

  void validate() const;
  std::string to_json() const;
  static ArchConfig from_json(const std::string& text);

  int final_width() const { return stage_widths[3]; }
  int state_dim() const { return 4 * final_width(); }           // s_i
  int embed_concat_dim() const { return kNumSources * embed_dim; }  // E_s
  int attn_out_dim() const { return kNumSources * latent_blocks; } // 4B
};

// Spatial prior over the 13 virtual targets.
struct SpatialPrior {
  double tau = 0.0;
  std::vector<double> p;                     // 13x13, P_tu
  std::vector<std::vector<int>> neighbors;   // k_N entries per target

  double at(int t, int u) const { return p[static_cast<size_t>(t) * kNumTargets + u]; }
};

SpatialPrior spatial_prior(const Montage& montage, double tau_p, int k_neighbors);

struct TrainMeta {
  int64_t step = 0;
  double best_val = 0.0;
  uint64_t seed = 0;
};

class FavcNet {
 public:
  FavcNet(ArchConfig cfg, const Montage& montage, uint64_t seed);

  // Exposed stages. Parameters ride the tape only inside forward(); called
  // standalone these run on plain values.
  struct EncoderOut {
    ad::Tensor deep;                     // [4, C, L4]
    std::array<ad::Tensor, 4> stages;    // per-stage features [4, C_s, L_s]
    std::array<int, 4> lengths;          // L1..L4
    ad::Tensor state;                    // s: [4, 4C]
  };
  EncoderOut encode(const ad::Tensor& x, bool training);
  ad::Tensor embed_state(const ad::Tensor& state, bool training);
  ad::Tensor target_attention(const ad::Tensor& es);  // [13, 4B]
  ad::Tensor gatv2_refine(const ad::Tensor& z);       // [13, 4B]
  ad::Tensor decode(const ad::Tensor& mixed, const EncoderOut& enc,
                    const ad::Tensor& skip_weights, bool training);  // [13, T]

  struct ForwardDetail {
    ad::Tensor attention_raw;      // A, [13, 4B]
    ad::Tensor attention_refined;  // z_ref, [13, 4B]
    ad::Tensor attention_norm;     // A~, [13, 4, B]
    ad::Tensor skip_weights;       // u, [13, 4]
  };

  // x: normalized [4, T]. Returns normalized [13, T]. When `tape` is given,
  // trainable parameters are watched; their taped handles land in `taped`
  // aligned with params().entries().
  ad::Tensor forward(const ad::Tensor& x, ad::Tape* tape, bool training,
                     std::vector<ad::Tensor>* taped = nullptr,
                     ForwardDetail* detail = nullptr);

  // Plain eval on row-major normalized data.
  std::vector<double> predict(const std::vector<double>& x_norm);

  const ArchConfig& config() const { return cfg_; }
  const SpatialPrior& prior() const { return prior_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  uint64_t montage_fingerprint() const { return montage_fp_; }
  int64_t param_count() const { return params_.value_count(true); }

 private:
  ad::Tensor p(const std::string& name);  // taped or plain parameter value
  std::vector<double>& buffer(const std::string& name);

  ArchConfig cfg_;
  SpatialPrior prior_;
  uint64_t montage_fp_ = 0;
  ad::ParameterSet params_;
  // forward-pass state
  ad::Tape* active_tape_ = nullptr;
  std::vector<ad::Tensor> taped_;
  std::vector<int> taped_index_;  // entry index -> taped_ position or -1
};

// Checkpoint: one-line JSON header (version, config, stats, montage
// fingerprint, named shape table, metadata) followed by a little-endian
// float64 blob in header order.
void save_checkpoint(const std::string& path, const FavcNet& net,
                     const ChannelStats& stats, const TrainMeta& meta);

struct LoadedCheckpoint {
  FavcNet net;
  ChannelStats stats;
  TrainMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path, const Montage& montage);

}  // namespace favc

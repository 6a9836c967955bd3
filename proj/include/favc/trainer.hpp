#pragma once

#include <functional>
#include <string>
#include <vector>

#include "favc/dataset.hpp"
#include "favc/metrics.hpp"
#include "favc/model.hpp"

namespace favc::train {

struct TrainConfig {
  int batch_size = 16;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double clip_norm = 1.0;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  int early_stop_patience = 15;
  int max_epochs = 60;
  uint64_t seed = 0;
  metrics::LossWeights loss;
  dsp::WelchParams welch;

  void validate() const;
};

// Global-norm clipping: scales every gradient by clip/||g|| when ||g|| > clip.
// Returns the pre-clip norm.
double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm);

// Decoupled weight decay (p *= 1 - lr*wd on decayed parameters) followed by
// the bias-corrected Adam update.
struct OptimState {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<double>> m, v;  // aligned with trainable entries

  void init(const ad::ParameterSet& params);
};

void adamw_step(ad::ParameterSet& params, const std::vector<std::vector<double>>& grads,
                OptimState& state);

// ReduceLROnPlateau + early stopping with a shared improvement rule: a
// validation improves when loss < best*(1 - 1e-6). The first validation sets
// the baseline and counts as non-improving, so a flat history of length
// `patience` triggers exactly one event.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, int patience) : factor_(factor), patience_(patience) {}
  // returns true when the learning rate was reduced at this step
  bool observe(double val_loss, double& lr);

 private:
  double factor_;
  int patience_;
  int bad_ = 0;
  double best_ = 0;
  bool has_best_ = false;
};

class EarlyStop {
 public:
  explicit EarlyStop(int patience) : patience_(patience) {}
  bool observe(double val_loss);  // true once training should stop

 private:
  int patience_;
  int bad_ = 0;
  double best_ = 0;
  bool has_best_ = false;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double train_total = 0, train_wave = 0, train_psd = 0;
  double val_total = 0, val_wave = 0, val_psd = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_val = 0;
  int best_epoch = -1;
  int64_t steps = 0;
  bool early_stopped = false;

  std::string log_csv() const;  // deterministic CSV of the epoch log
};

// Mean losses over a normalized segment set, eval mode, no tape (and hence
// no gradients anywhere near validation data).
struct LossTriple {
  double total = 0, wave = 0, psd = 0;
};
LossTriple dataset_loss(FavcNet& net, const std::vector<Segment>& segments_norm,
                        const TrainConfig& cfg);

// Full loop: seeded shuffling, batch gradient accumulation, clipping, AdamW,
// per-epoch validation, plateau scheduling, early stopping. The model ends
// loaded with the best-validation parameters. Segments must be normalized
// already; losses run in normalized units (unit sigmas).
TrainResult fit(FavcNet& net, const std::vector<Segment>& train_norm,
                  const std::vector<Segment>& val_norm, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = nullptr);

}  // namespace favc::train

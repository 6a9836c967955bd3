#pragma once

#include <string>
#include <vector>

#include "favc/baselines.hpp"
#include "favc/dataset.hpp"
#include "favc/metrics.hpp"
#include "favc/model.hpp"
#include "favc/perturb.hpp"
#include "favc/trainer.hpp"

namespace favc::report {

// One configuration drives every subcommand; unknown fields in the JSON are
// rejected so typos fail loudly.
struct ExperimentConfig {
  std::string data_dir = "data";
  std::string checkpoint;            // defaults to <out_dir>/checkpoint.favc
  std::string split_path;            // defaults to next to the checkpoint
  std::string out_dir = "out";
  uint64_t seed = 0;
  int repeats = 3;
  int threads = 1;

  // synth
  int synth_subjects = 12;
  SynthConfig synth;

  // model / training
  bool toy = true;
  train::TrainConfig train;

  // eval
  dsp::WelchParams welch = {0, 0, 0.5, 45.0};  // nwin == 0: T-aware defaults
  double idw_power = 2.0;
  baselines::SplineParams spline;

  // robustness
  std::vector<std::string> conditions = {"clean", "emg", "dropout", "gain", "mixed"};
  perturb::PerturbParams perturb;

  // sweep
  std::vector<double> sweep_weights = {0.0, 0.1};

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  std::string to_json() const;
  uint64_t hash() const;
  std::string stamp() const;  // "config_hash=... seed=..."
};

// Subcommand drivers; every emitted file embeds the config stamp and
// identical configs reproduce byte-identical CSVs.
void run_synth(const ExperimentConfig& cfg);
void run_train(const ExperimentConfig& cfg);
void run_clean_eval(const ExperimentConfig& cfg);
void run_robustness(const ExperimentConfig& cfg);
void run_sweep(const ExperimentConfig& cfg);
void run_baseline(const ExperimentConfig& cfg, const std::string& method);
void run_report(const ExperimentConfig& cfg);

// shared helpers (also exercised directly by tests)
dsp::WelchParams welch_for(const ExperimentConfig& cfg, int samples, double fs);
std::vector<double> predict_targets(FavcNet& net, const ChannelStats& stats,
                                    const Segment& seg);
const std::vector<std::string>& method_names();  // favc, nni, idw, spline
std::vector<metrics::MetricRow> evaluate_methods(
    FavcNet& net, const ChannelStats& stats, const Montage& montage,
    const std::vector<Segment>& segments, const ExperimentConfig& cfg);

}  // namespace favc::report

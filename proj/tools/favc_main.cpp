#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "favc/common.hpp"
#include "favc/experiments.hpp"

namespace {

int exit_code_for(const favc::Error& e) {
  switch (e.kind()) {
    case favc::ErrorKind::Config:
    case favc::ErrorKind::Io:
      return 2;
    case favc::ErrorKind::Numeric:
    case favc::ErrorKind::Shape:
      return 3;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"favc: frequency-calibrated virtual EEG channel lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::string checkpoint;
  std::string method = "nni";
  bool has_seed = false;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--data", data_dir, "segment store directory");
    cmd->add_option("--checkpoint", checkpoint, "checkpoint path");
    cmd->add_option_function<uint64_t>(
        "--seed", [&](uint64_t v) { seed = v; has_seed = true; }, "run seed");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic segment store");
  CLI::App* train = app.add_subcommand("train", "train the generator on a segment store");
  CLI::App* eval = app.add_subcommand("eval", "clean evaluation of model and baselines");
  CLI::App* robust = app.add_subcommand("robust", "perturbation robustness grid");
  CLI::App* baseline = app.add_subcommand("baseline", "run one classical baseline");
  CLI::App* sweep = app.add_subcommand("sweep", "PSD-weight sweep");
  CLI::App* rep = app.add_subcommand("report", "emit SVG figures from an eval run");
  for (CLI::App* cmd : {synth, train, eval, robust, baseline, sweep, rep}) add_common(cmd);
  baseline->add_option("--method", method, "nni | idw | spline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    favc::report::ExperimentConfig cfg;
    if (!config_path.empty())
      cfg = favc::report::ExperimentConfig::from_file(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (has_seed) cfg.seed = seed;

    if (synth->parsed()) favc::report::run_synth(cfg);
    if (train->parsed()) favc::report::run_train(cfg);
    if (eval->parsed()) favc::report::run_clean_eval(cfg);
    if (robust->parsed()) favc::report::run_robustness(cfg);
    if (baseline->parsed()) favc::report::run_baseline(cfg, method);
    if (sweep->parsed()) favc::report::run_sweep(cfg);
    if (rep->parsed()) favc::report::run_report(cfg);
  } catch (const favc::Error& e) {
    std::fprintf(stderr, "favc: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "favc: %s\n", e.what());
    return 3;
  }
  return 0;
}

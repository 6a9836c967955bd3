#include "favc/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "favc/common.hpp"
#include "favc/stats.hpp"
#include "favc/svg.hpp"

using namespace favc;
using favc::stats::wilcoxon_signed_rank;

namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  EXPECT_TRUE(static_cast<bool>(f)) << p;
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}
}  // namespace

TEST(Wilcoxon, AllPositiveSixPairs) {
  std::vector<double> a = {1, 2, 3, 4, 5, 6};
  std::vector<double> b = {0, 0, 0, 0, 0, 0};
  auto r = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.statistic, 21.0);
  EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 64.0);  // 0.03125
}

TEST(Wilcoxon, Antisymmetry) {
  std::vector<double> a = {1.2, -0.4, 2.2, 0.8, -1.6, 0.3, 2.4};
  std::vector<double> b = {0.5, 0.1, 1.0, 1.9, -0.2, -0.1, 1.1};
  auto r1 = wilcoxon_signed_rank(a, b);
  auto r2 = wilcoxon_signed_rank(b, a);
  EXPECT_DOUBLE_EQ(r1.p_value, r2.p_value);
}

TEST(Wilcoxon, ExactEnumerationOracleAtN13) {
  // independent oracle: explicit 2^13 enumeration with its own rank logic
  Rng rng(77);
  std::vector<double> a(13), b(13);
  for (int i = 0; i < 13; ++i) {
    a[static_cast<size_t>(i)] = rng.normal();
    b[static_cast<size_t>(i)] = rng.normal() * 0.4;
  }
  auto got = wilcoxon_signed_rank(a, b);

  std::vector<double> d(13);
  for (int i = 0; i < 13; ++i) d[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] - b[static_cast<size_t>(i)];
  // ranks by |d| (no ties in continuous data)
  std::vector<int> idx(13);
  for (int i = 0; i < 13; ++i) idx[static_cast<size_t>(i)] = i;
  std::sort(idx.begin(), idx.end(), [&](int x, int y) {
    return std::fabs(d[static_cast<size_t>(x)]) < std::fabs(d[static_cast<size_t>(y)]);
  });
  std::vector<double> rank(13);
  for (int i = 0; i < 13; ++i)
    rank[static_cast<size_t>(idx[static_cast<size_t>(i)])] = i + 1.0;
  double w = 0;
  for (int i = 0; i < 13; ++i)
    if (d[static_cast<size_t>(i)] > 0) w += rank[static_cast<size_t>(i)];
  int le = 0, ge = 0;
  for (int mask = 0; mask < (1 << 13); ++mask) {
    double s = 0;
    for (int i = 0; i < 13; ++i)
      if (mask & (1 << i)) s += rank[static_cast<size_t>(i)];
    if (s <= w) ++le;
    if (s >= w) ++ge;
  }
  double p = std::min(1.0, 2.0 * std::min(le, ge) / 8192.0);
  EXPECT_DOUBLE_EQ(got.p_value, p);
  // the paper's p granularity (multiples of 2/2^13) is representable
  EXPECT_NEAR(2.0 / 8192.0, 0.000244140625, 1e-12);
}

TEST(Wilcoxon, ErrorsAndApproximation) {
  std::vector<double> same = {1, 2, 3, 4, 5};
  EXPECT_THROW(wilcoxon_signed_rank(same, same), Error);
  std::vector<double> a = {1, 2, 3};
  EXPECT_THROW(wilcoxon_signed_rank(a, {0, 0, 0}), Error);  // n < 5

  // n = 30 uses the normal approximation; sanity: strong effect, tiny p
  std::vector<double> big_a(30), big_b(30, 0.0);
  for (int i = 0; i < 30; ++i) big_a[static_cast<size_t>(i)] = 1.0 + i * 0.1;
  auto r = wilcoxon_signed_rank(big_a, big_b);
  EXPECT_FALSE(r.exact);
  EXPECT_LT(r.p_value, 1e-5);
}

TEST(Svg, BasicInvariants) {
  // heatmap grid dimensions 13 x 90 and shared color scale
  dsp::PsdEstimate a, b;
  a.freqs = dsp::welch_grid(500.0, {});
  a.channels = 13;
  a.power.assign(13 * 90, 1.0);
  b = a;
  for (auto& v : b.power) v = 2.0;
  std::string heat = svg::heatmap_pair(a, b, "t", "note");
  // 2 panels x 13 x 90 cells plus background and colorbar rects
  size_t rects = 0;
  for (size_t pos = heat.find("<rect"); pos != std::string::npos;
       pos = heat.find("<rect", pos + 1))
    ++rects;
  EXPECT_GE(rects, 2u * 13u * 90u);
  EXPECT_NE(heat.find("note"), std::string::npos);

  // overlay of identical signals renders coincident paths
  std::vector<double> sig(13 * 100);
  for (size_t i = 0; i < sig.size(); ++i) sig[i] = std::sin(0.07 * static_cast<double>(i));
  std::vector<std::string> names(13, "ch");
  std::string ov = svg::waveform_overlay(sig, sig, 100, 500.0, names, "t", "n");
  size_t p1 = ov.find("points=\"");
  ASSERT_NE(p1, std::string::npos);
  size_t e1 = ov.find("\"", p1 + 8);
  std::string path1 = ov.substr(p1 + 8, e1 - p1 - 8);
  size_t p2 = ov.find("points=\"", e1);
  size_t e2 = ov.find("\"", p2 + 8);
  std::string path2 = ov.substr(p2 + 8, e2 - p2 - 8);
  EXPECT_EQ(path1, path2);
}

TEST(Experiments, ConfigRoundTripAndUnknownKeys) {
  report::ExperimentConfig c;
  c.seed = 42;
  c.sweep_weights = {0.0, 0.05, 0.1};
  auto c2 = report::ExperimentConfig::from_json_text(c.to_json());
  EXPECT_EQ(c.hash(), c2.hash());
  EXPECT_THROW(report::ExperimentConfig::from_json_text("{\"sead\": 2}"), Error);
  EXPECT_THROW(report::ExperimentConfig::from_json_text("{bad json"), Error);
}

TEST(Experiments, EndToEndPipelineSmall) {
  fs::path root = fs::temp_directory_path() / "favc_e2e";
  fs::remove_all(root);
  report::ExperimentConfig cfg;
  cfg.data_dir = (root / "data").string();
  cfg.out_dir = (root / "run").string();
  cfg.seed = 5;
  cfg.repeats = 2;
  cfg.synth_subjects = 6;
  cfg.synth.segments_per_subject = 3;
  cfg.synth.samples = 256;
  cfg.toy = true;
  cfg.train.batch_size = 4;
  cfg.train.lr = 1e-3;
  cfg.train.max_epochs = 2;
  cfg.conditions = {"clean", "gain"};

  report::run_synth(cfg);
  EXPECT_TRUE(fs::exists(fs::path(cfg.data_dir) / "manifest.json"));

  report::run_train(cfg);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "checkpoint.favc"));
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "split.json"));
  std::string log1 = slurp(fs::path(cfg.out_dir) / "training_log.csv");

  report::run_clean_eval(cfg);
  std::string seg_csv = slurp(fs::path(cfg.out_dir) / "per_segment.csv");
  for (const auto& m : report::method_names())
    EXPECT_NE(seg_csv.find(m), std::string::npos);
  EXPECT_NE(seg_csv.find("config_hash="), std::string::npos);

  report::run_robustness(cfg);
  std::string rob = slurp(fs::path(cfg.out_dir) / "robustness.csv");
  EXPECT_NE(rob.find("clean,lsd,"), std::string::npos);
  std::string t4 = slurp(fs::path(cfg.out_dir) / "table4.csv");
  EXPECT_NE(t4.find("gain,"), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "robust_gain.svg"));

  // rank column is a permutation of 1..4 per (condition, metric)
  {
    std::istringstream is(rob);
    std::string line;
    std::getline(is, line);  // stamp
    std::getline(is, line);  // header
    std::map<std::string, std::vector<int>> ranks;
    while (std::getline(is, line)) {
      auto c1 = line.find(',');
      auto c2 = line.find(',', c1 + 1);
      auto key = line.substr(0, c2);
      auto last = line.rfind(',');
      ranks[key].push_back(std::stoi(line.substr(last + 1)));
    }
    for (auto& [key, v] : ranks) {
      std::sort(v.begin(), v.end());
      EXPECT_EQ(v, (std::vector<int>{1, 2, 3, 4})) << key;
    }
  }

  report::run_report(cfg);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "figures" / "overlay_favc.svg"));
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "figures" / "heatmap_favc.svg"));
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "figures" / "scalp_bandpower.svg"));

  // byte-identical rerun of eval outputs
  std::string before = slurp(fs::path(cfg.out_dir) / "summary.csv");
  report::run_clean_eval(cfg);
  EXPECT_EQ(before, slurp(fs::path(cfg.out_dir) / "summary.csv"));

  // clean robustness condition must reproduce the clean-eval rows exactly
  {
    std::istringstream is(rob);
    std::string line;
    bool found = false;
    double clean_lsd_favc = 0;
    while (std::getline(is, line)) {
      if (line.rfind("clean,lsd,favc,", 0) == 0) {
        auto c3 = line.find(',', 15);
        clean_lsd_favc = std::stod(line.substr(15, c3 - 15));
        found = true;
      }
    }
    ASSERT_TRUE(found);
    // summary.csv favc lsd mean
    std::istringstream is2(before);
    while (std::getline(is2, line)) {
      if (line.rfind("favc,lsd,", 0) == 0) {
        auto c3 = line.find(',', 9);
        double v = std::stod(line.substr(9, c3 - 9));
        EXPECT_NEAR(clean_lsd_favc, v, 1e-12);
      }
    }
  }

  // a single-point sweep at the default weight reproduces the default
  // training: same seed, split and loss give identical metrics
  {
    report::ExperimentConfig scfg = cfg;
    scfg.sweep_weights = {0.1};
    report::run_sweep(scfg);
    std::string sweep = slurp(fs::path(cfg.out_dir) / "sweep.csv");
    std::istringstream is(sweep);
    std::string line, row;
    while (std::getline(is, line))
      if (line.rfind("0.1,", 0) == 0) row = line;
    ASSERT_FALSE(row.empty());
    auto c1 = row.find(',');
    auto c2 = row.find(',', c1 + 1);
    double sweep_nmae = std::stod(row.substr(c1 + 1, c2 - c1 - 1));
    std::istringstream is2(before);
    while (std::getline(is2, line)) {
      if (line.rfind("favc,nmae,", 0) == 0) {
        auto c3 = line.find(',', 10);
        EXPECT_NEAR(sweep_nmae, std::stod(line.substr(10, c3 - 10)), 1e-9);
      }
    }
  }

  // baseline subcommand emits the Segment store format
  report::run_baseline(cfg, "nni");
  auto preds = load_segments((fs::path(cfg.out_dir) / "pred_nni").string());
  EXPECT_EQ(preds.size(), 18u);  // 6 subjects x 3 segments
  EXPECT_TRUE(preds[0].has_targets());

  // byte-identical training log when the identical config reruns
  report::run_train(cfg);
  std::string log2 = slurp(fs::path(cfg.out_dir) / "training_log.csv");
  EXPECT_EQ(log1, log2);

  fs::remove_all(root);
}

TEST(Experiments, ThreadedEvalMatchesSerial) {
  fs::path root = fs::temp_directory_path() / "favc_thr";
  fs::remove_all(root);
  report::ExperimentConfig cfg;
  cfg.data_dir = (root / "data").string();
  cfg.out_dir = (root / "run").string();
  cfg.seed = 9;
  cfg.synth_subjects = 4;
  cfg.synth.segments_per_subject = 2;
  cfg.synth.samples = 256;
  cfg.train.batch_size = 4;
  cfg.train.max_epochs = 1;
  report::run_synth(cfg);
  report::run_train(cfg);

  Montage montage = standard_montage();
  auto ck = load_checkpoint((fs::path(cfg.out_dir) / "checkpoint.favc").string(), montage);
  auto segments = load_segments(cfg.data_dir);
  cfg.threads = 1;
  auto serial = report::evaluate_methods(ck.net, ck.stats, montage, segments, cfg);
  cfg.threads = 4;
  auto threaded = report::evaluate_methods(ck.net, ck.stats, montage, segments, cfg);
  ASSERT_EQ(serial.size(), threaded.size());
  for (size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].method, threaded[i].method);
    EXPECT_EQ(serial[i].lsd, threaded[i].lsd);
    EXPECT_EQ(serial[i].nmae, threaded[i].nmae);
  }
  fs::remove_all(root);
}

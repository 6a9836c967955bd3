#include "favc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "favc/common.hpp"
#include "favc/stats.hpp"
#include "favc/svg.hpp"
#include "json.hpp"

namespace favc::report {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config ---------------------------------------------------------------

namespace {

void read_welch(const json& j, dsp::WelchParams& w) {
  if (j.contains("nwin")) w.nwin = j.at("nwin").get<int>();
  if (j.contains("hop")) w.hop = j.at("hop").get<int>();
  if (j.contains("f_lo")) w.f_lo = j.at("f_lo").get<double>();
  if (j.contains("f_hi")) w.f_hi = j.at("f_hi").get<double>();
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      fail_config("config: unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail_config(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j,
             {"data_dir", "checkpoint", "split_path", "out_dir", "seed",
              "repeats", "threads", "synth_subjects", "synth", "toy", "train",
              "welch", "idw_power", "spline", "conditions", "perturb",
              "sweep_weights"},
             "top level");
  ExperimentConfig c;
  if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
  if (j.contains("checkpoint")) c.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("split_path")) c.split_path = j.at("split_path").get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
  if (j.contains("repeats")) c.repeats = j.at("repeats").get<int>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("synth_subjects")) c.synth_subjects = j.at("synth_subjects").get<int>();
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    check_keys(s, {"segments_per_subject", "samples", "fs", "latent_gain", "noise_frac"}, "synth");
    if (s.contains("segments_per_subject"))
      c.synth.segments_per_subject = s.at("segments_per_subject").get<int>();
    if (s.contains("samples")) c.synth.samples = s.at("samples").get<int>();
    if (s.contains("fs")) c.synth.fs = s.at("fs").get<double>();
    if (s.contains("latent_gain"))
      c.synth.latent_gain = s.at("latent_gain").get<std::array<double, 6>>();
    if (s.contains("noise_frac")) c.synth.noise_frac = s.at("noise_frac").get<double>();
  }
  if (j.contains("toy")) c.toy = j.at("toy").get<bool>();
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t,
               {"batch_size", "lr", "weight_decay", "clip_norm", "max_epochs",
                "plateau_factor", "plateau_patience", "early_stop_patience",
                "w_wave", "w_psd", "lambda_log", "lambda_band", "lambda_slope"},
               "train");
    if (t.contains("batch_size")) c.train.batch_size = t.at("batch_size").get<int>();
    if (t.contains("lr")) c.train.lr = t.at("lr").get<double>();
    if (t.contains("weight_decay")) c.train.weight_decay = t.at("weight_decay").get<double>();
    if (t.contains("clip_norm")) c.train.clip_norm = t.at("clip_norm").get<double>();
    if (t.contains("max_epochs")) c.train.max_epochs = t.at("max_epochs").get<int>();
    if (t.contains("plateau_factor")) c.train.plateau_factor = t.at("plateau_factor").get<double>();
    if (t.contains("plateau_patience")) c.train.plateau_patience = t.at("plateau_patience").get<int>();
    if (t.contains("early_stop_patience"))
      c.train.early_stop_patience = t.at("early_stop_patience").get<int>();
    if (t.contains("w_wave")) c.train.loss.w_wave = t.at("w_wave").get<double>();
    if (t.contains("w_psd")) c.train.loss.w_psd = t.at("w_psd").get<double>();
    if (t.contains("lambda_log")) c.train.loss.lambda_log = t.at("lambda_log").get<double>();
    if (t.contains("lambda_band")) c.train.loss.lambda_band = t.at("lambda_band").get<double>();
    if (t.contains("lambda_slope")) c.train.loss.lambda_slope = t.at("lambda_slope").get<double>();
  }
  if (j.contains("welch")) {
    check_keys(j.at("welch"), {"nwin", "hop", "f_lo", "f_hi"}, "welch");
    c.welch.nwin = 0;
    read_welch(j.at("welch"), c.welch);
  } else {
    c.welch.nwin = 0;  // auto
  }
  if (j.contains("idw_power")) c.idw_power = j.at("idw_power").get<double>();
  if (j.contains("spline")) {
    const auto& s = j.at("spline");
    check_keys(s, {"m", "n_max", "ridge"}, "spline");
    if (s.contains("m")) c.spline.m = s.at("m").get<int>();
    if (s.contains("n_max")) c.spline.n_max = s.at("n_max").get<int>();
    if (s.contains("ridge")) c.spline.ridge = s.at("ridge").get<double>();
  }
  if (j.contains("conditions"))
    c.conditions = j.at("conditions").get<std::vector<std::string>>();
  if (j.contains("perturb")) {
    const auto& p = j.at("perturb");
    check_keys(p,
               {"awgn_snr_db", "emg_snr_db", "emg_bursts", "emg_dur_lo_s",
                "emg_dur_hi_s", "emg_chan_prob", "dropout_duration_s", "gain_rho"},
               "perturb");
    if (p.contains("awgn_snr_db")) c.perturb.awgn_snr_db = p.at("awgn_snr_db").get<double>();
    if (p.contains("emg_snr_db")) c.perturb.emg_snr_db = p.at("emg_snr_db").get<double>();
    if (p.contains("emg_bursts")) c.perturb.emg_bursts = p.at("emg_bursts").get<int>();
    if (p.contains("emg_dur_lo_s")) c.perturb.emg_dur_lo_s = p.at("emg_dur_lo_s").get<double>();
    if (p.contains("emg_dur_hi_s")) c.perturb.emg_dur_hi_s = p.at("emg_dur_hi_s").get<double>();
    if (p.contains("emg_chan_prob")) c.perturb.emg_chan_prob = p.at("emg_chan_prob").get<double>();
    if (p.contains("dropout_duration_s"))
      c.perturb.dropout_duration_s = p.at("dropout_duration_s").get<double>();
    if (p.contains("gain_rho")) c.perturb.gain_rho = p.at("gain_rho").get<double>();
  }
  if (j.contains("sweep_weights"))
    c.sweep_weights = j.at("sweep_weights").get<std::vector<double>>();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail_config("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["data_dir"] = data_dir;
  j["checkpoint"] = checkpoint;
  j["split_path"] = split_path;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["repeats"] = repeats;
  j["threads"] = threads;
  j["synth_subjects"] = synth_subjects;
  j["synth"] = {{"segments_per_subject", synth.segments_per_subject},
                {"samples", synth.samples},
                {"fs", synth.fs},
                {"latent_gain", synth.latent_gain},
                {"noise_frac", synth.noise_frac}};
  j["toy"] = toy;
  j["train"] = {{"batch_size", train.batch_size},
                {"lr", train.lr},
                {"weight_decay", train.weight_decay},
                {"clip_norm", train.clip_norm},
                {"max_epochs", train.max_epochs},
                {"plateau_factor", train.plateau_factor},
                {"plateau_patience", train.plateau_patience},
                {"early_stop_patience", train.early_stop_patience},
                {"w_wave", train.loss.w_wave},
                {"w_psd", train.loss.w_psd},
                {"lambda_log", train.loss.lambda_log},
                {"lambda_band", train.loss.lambda_band},
                {"lambda_slope", train.loss.lambda_slope}};
  j["welch"] = {{"nwin", welch.nwin}, {"hop", welch.hop}, {"f_lo", welch.f_lo}, {"f_hi", welch.f_hi}};
  j["idw_power"] = idw_power;
  j["spline"] = {{"m", spline.m}, {"n_max", spline.n_max}, {"ridge", spline.ridge}};
  j["conditions"] = conditions;
  j["perturb"] = {{"awgn_snr_db", perturb.awgn_snr_db},
                  {"emg_snr_db", perturb.emg_snr_db},
                  {"emg_bursts", perturb.emg_bursts},
                  {"emg_dur_lo_s", perturb.emg_dur_lo_s},
                  {"emg_dur_hi_s", perturb.emg_dur_hi_s},
                  {"emg_chan_prob", perturb.emg_chan_prob},
                  {"dropout_duration_s", perturb.dropout_duration_s},
                  {"gain_rho", perturb.gain_rho}};
  j["sweep_weights"] = sweep_weights;
  return j.dump();
}

uint64_t ExperimentConfig::hash() const { return Rng::hash_str(to_json()); }

std::string ExperimentConfig::stamp() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "config_hash=%016llx seed=%llu",
                static_cast<unsigned long long>(hash()),
                static_cast<unsigned long long>(seed));
  return buf;
}

// ---- shared helpers ---------------------------------------------------------

dsp::WelchParams welch_for(const ExperimentConfig& cfg, int samples, double fs) {
  (void)fs;
  dsp::WelchParams w = cfg.welch;
  if (w.nwin <= 0) {
    // T-aware defaults: the canonical 1000/500 pair when the segment allows
    // several frames, otherwise half-length windows with 50% overlap
    dsp::WelchParams canonical;
    w.nwin = samples >= 3 * canonical.nwin ? canonical.nwin : (samples / 2) & ~1;
    w.hop = w.nwin / 2;
  }
  if (w.hop <= 0) w.hop = w.nwin / 2;
  if (samples < w.nwin) fail_config("welch: segments shorter than the window");
  return w;
}

std::vector<double> predict_targets(FavcNet& net, const ChannelStats& stats,
                                    const Segment& seg) {
  Segment norm = normalize(seg, stats);
  std::vector<double> y = net.predict(norm.sources);
  // denormalize target rows
  for (int c = 0; c < kNumTargets; ++c) {
    double mu = stats.mean[static_cast<size_t>(kNumSources + c)];
    double sd = stats.stdev[static_cast<size_t>(kNumSources + c)];
    for (int t = 0; t < seg.samples; ++t)
      y[static_cast<size_t>(c) * seg.samples + t] =
          y[static_cast<size_t>(c) * seg.samples + t] * sd + mu;
  }
  return y;
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"favc", "nni", "idw", "spline"};
  return names;
}

namespace {

std::vector<double> sigma_targets(const ChannelStats& stats) {
  std::vector<double> s(kNumTargets);
  for (int c = 0; c < kNumTargets; ++c) s[static_cast<size_t>(c)] = stats.target_sigma(c);
  return s;
}

std::vector<double> run_method(const std::string& method, FavcNet& net,
                               const ChannelStats& stats, const Montage& montage,
                               const ExperimentConfig& cfg, const Segment& seg) {
  if (method == "favc") return predict_targets(net, stats, seg);
  if (method == "nni") return baselines::nni(seg, montage);
  if (method == "idw") return baselines::idw(seg, montage, cfg.idw_power);
  if (method == "spline") return baselines::spherical_spline(seg, montage, cfg.spline);
  fail_config("unknown method: " + method);
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) fail_io("cannot write " + p.string());
  return f;
}

void write_text(const fs::path& p, const std::string& text) {
  auto f = open_out(p);
  f << text;
}

Split load_split_for(const ExperimentConfig& cfg) {
  std::string path = cfg.split_path;
  if (path.empty()) {
    fs::path ck = cfg.checkpoint.empty() ? fs::path(cfg.out_dir) / "checkpoint.favc"
                                         : fs::path(cfg.checkpoint);
    path = (ck.parent_path() / "split.json").string();
  }
  std::ifstream f(path);
  if (!f) fail_config("cannot open split file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return Split::from_json(ss.str());
}

std::string checkpoint_path(const ExperimentConfig& cfg) {
  return cfg.checkpoint.empty()
             ? (fs::path(cfg.out_dir) / "checkpoint.favc").string()
             : cfg.checkpoint;
}

// ordered parallel map over segments
template <typename Fn>
auto parallel_map(const std::vector<Segment>& segments, int threads, Fn fn)
    -> std::vector<decltype(fn(segments[0], 0))> {
  using R = decltype(fn(segments[0], 0));
  std::vector<R> out(segments.size());
  if (threads <= 1) {
    for (size_t i = 0; i < segments.size(); ++i) out[i] = fn(segments[i], static_cast<int>(i));
    return out;
  }
  std::vector<std::future<void>> futs;
  std::atomic<size_t> next{0};
  for (int t = 0; t < threads; ++t) {
    futs.push_back(std::async(std::launch::async, [&]() {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= segments.size()) break;
        out[i] = fn(segments[i], static_cast<int>(i));
      }
    }));
  }
  for (auto& f : futs) f.get();
  return out;
}

}  // namespace

std::vector<metrics::MetricRow> evaluate_methods(
    FavcNet& net, const ChannelStats& stats, const Montage& montage,
    const std::vector<Segment>& segments, const ExperimentConfig& cfg) {
  if (segments.empty()) fail_config("evaluate: no segments");
  auto sigma = sigma_targets(stats);
  auto wp = welch_for(cfg, segments[0].samples, segments[0].fs);

  auto rows_per_segment = parallel_map(
      segments, cfg.threads,
      [&](const Segment& seg, int index) {
        FavcNet local = net;  // shares parameter storage, private scratch
        std::vector<metrics::MetricRow> rows;
        for (const auto& method : method_names()) {
          auto pred = run_method(method, local, stats, montage, cfg, seg);
          rows.push_back(metrics::evaluate_prediction(
              method, seg.subject_id, index, pred.data(), seg.targets.data(),
              seg.samples, sigma, seg.fs, wp));
        }
        return rows;
      });

  std::vector<metrics::MetricRow> rows;
  for (auto& rs : rows_per_segment)
    for (auto& r : rs) rows.push_back(std::move(r));
  return rows;
}

// ---- synth / train ----------------------------------------------------------

void run_synth(const ExperimentConfig& cfg) {
  Montage montage = standard_montage();
  auto segments = synth_dataset(cfg.seed, cfg.synth_subjects, montage, cfg.synth);
  save_segments(cfg.data_dir, segments);
  json meta;
  meta["stamp"] = cfg.stamp();
  meta["subjects"] = cfg.synth_subjects;
  meta["segments"] = segments.size();
  write_text(fs::path(cfg.data_dir) / "synth_meta.json", meta.dump(2) + "\n");
}

void run_train(const ExperimentConfig& cfg) {
  Montage montage = standard_montage();
  auto segments = load_segments(cfg.data_dir);
  if (segments.empty()) fail_config("train: empty dataset");
  auto roster = subjects_of(segments);
  Split split = split_subjects(roster, cfg.seed);
  auto train_raw = filter_subjects(segments, split.train);
  auto val_raw = filter_subjects(segments, split.val);
  ChannelStats stats = compute_stats(train_raw);

  std::vector<Segment> train_norm, val_norm;
  for (const auto& s : train_raw) train_norm.push_back(normalize(s, stats));
  for (const auto& s : val_raw) val_norm.push_back(normalize(s, stats));

  ArchConfig arch = cfg.toy ? ArchConfig::toy() : ArchConfig::defaults();
  arch.T = segments[0].samples;
  arch.fs = segments[0].fs;
  FavcNet net(arch, montage, cfg.seed);

  train::TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed;
  tcfg.welch = welch_for(cfg, arch.T, arch.fs);
  auto result = train::fit(net, train_norm, val_norm, tcfg);

  fs::create_directories(cfg.out_dir);
  TrainMeta meta;
  meta.step = result.steps;
  meta.best_val = result.best_val;
  meta.seed = cfg.seed;
  save_checkpoint(checkpoint_path(cfg), net, stats, meta);
  write_text(fs::path(cfg.out_dir) / "split.json", split.to_json() + "\n");
  write_text(fs::path(cfg.out_dir) / "stats.json", stats.to_json() + "\n");
  write_text(fs::path(cfg.out_dir) / "training_log.csv",
             "# " + cfg.stamp() + "\n" + result.log_csv());
}

// ---- clean eval ---------------------------------------------------------

namespace {

void write_rows_csv(const fs::path& p, const ExperimentConfig& cfg,
                    const std::vector<metrics::MetricRow>& rows) {
  auto f = open_out(p);
  f << "# " << cfg.stamp() << "\n";
  f << "method,subject,segment,nmae,raw_mae,pearson,lsd,kl,cftc,sci,sci_pair,sci_topo\n";
  for (const auto& r : rows) {
    f << r.method << "," << r.subject << "," << r.segment << ","
      << fmt_double(r.nmae) << "," << fmt_double(r.raw_mae) << ","
      << fmt_double(r.pearson) << "," << fmt_double(r.lsd) << ","
      << fmt_double(r.kl) << "," << fmt_double(r.cftc) << ","
      << fmt_double(r.sci) << "," << fmt_double(r.sci_pair) << ","
      << fmt_double(r.sci_topo) << "\n";
  }
}

void write_channel_csv(const fs::path& p, const ExperimentConfig& cfg,
                       const std::vector<metrics::MetricRow>& rows) {
  auto f = open_out(p);
  f << "# " << cfg.stamp() << "\n";
  f << "method,channel,nmae,raw_mae_uv,pearson\n";
  for (const auto& method : method_names()) {
    std::vector<double> nm(kNumTargets, 0), rm(kNumTargets, 0), pr(kNumTargets, 0);
    int n = 0;
    for (const auto& r : rows) {
      if (r.method != method) continue;
      for (int c = 0; c < kNumTargets; ++c) {
        nm[static_cast<size_t>(c)] += r.nmae_ch[static_cast<size_t>(c)];
        rm[static_cast<size_t>(c)] += r.raw_mae_ch[static_cast<size_t>(c)];
        pr[static_cast<size_t>(c)] += r.pearson_ch[static_cast<size_t>(c)];
      }
      ++n;
    }
    if (n == 0) continue;
    for (int c = 0; c < kNumTargets; ++c)
      f << method << "," << channel_names()[static_cast<size_t>(kNumSources + c)] << ","
        << fmt_double(nm[static_cast<size_t>(c)] / n) << ","
        << fmt_double(rm[static_cast<size_t>(c)] / n) << ","
        << fmt_double(pr[static_cast<size_t>(c)] / n) << "\n";
  }
}

void write_summaries(const fs::path& dir, const ExperimentConfig& cfg,
                     const std::vector<metrics::MetricRow>& rows) {
  auto subj_csv = open_out(dir / "subjects.csv");
  subj_csv << "# " << cfg.stamp() << "\n";
  subj_csv << "method,subject,segments";
  for (const auto& m : metrics::metric_names()) subj_csv << "," << m;
  subj_csv << "\n";

  auto sum_csv = open_out(dir / "summary.csv");
  sum_csv << "# " << cfg.stamp() << "\n";
  sum_csv << "method,metric,mean,std,n_subjects\n";
  json jsum;
  jsum["stamp"] = cfg.stamp();

  for (const auto& method : method_names()) {
    std::vector<metrics::MetricRow> mrows;
    for (const auto& r : rows)
      if (r.method == method) mrows.push_back(r);
    if (mrows.empty()) continue;
    auto subs = metrics::aggregate_subjects(mrows);
    for (const auto& s : subs) {
      subj_csv << method << "," << s.subject << "," << s.segments;
      for (const auto& m : metrics::metric_names())
        subj_csv << "," << fmt_double(s.value.at(m));
      subj_csv << "\n";
    }
    auto summary = metrics::cross_subject_summary(subs);
    for (const auto& m : metrics::metric_names()) {
      const auto& s = summary.at(m);
      sum_csv << method << "," << m << "," << fmt_double(s.mean) << ","
              << fmt_double(s.stdev) << "," << s.n << "\n";
      jsum["methods"][method][m] = {{"mean", s.mean}, {"std", s.stdev}, {"n", s.n}};
    }
  }
  write_text(dir / "summary.json", jsum.dump(2) + "\n");
}

}  // namespace

void run_clean_eval(const ExperimentConfig& cfg) {
  Montage montage = standard_montage();
  auto ck = load_checkpoint(checkpoint_path(cfg), montage);
  auto segments = load_segments(cfg.data_dir);
  Split split = load_split_for(cfg);
  auto test_raw = filter_subjects(segments, split.test);
  if (test_raw.empty()) fail_config("eval: empty test split");

  auto rows = evaluate_methods(ck.net, ck.stats, montage, test_raw, cfg);
  fs::path dir(cfg.out_dir);
  write_rows_csv(dir / "per_segment.csv", cfg, rows);
  write_channel_csv(dir / "per_channel.csv", cfg, rows);
  write_summaries(dir, cfg, rows);

  // representative dump for the report command: first test segment
  const Segment& probe = test_raw[0];
  std::vector<Segment> dump = {probe};
  save_segments((dir / "predictions" / "truth").string(), dump);
  for (const auto& method : method_names()) {
    auto pred = run_method(method, ck.net, ck.stats, montage, cfg, probe);
    std::vector<Segment> ps = {baselines::as_prediction(probe, std::move(pred))};
    save_segments((dir / "predictions" / method).string(), ps);
  }
}

// ---- robustness ---------------------------------------------------------

void run_robustness(const ExperimentConfig& cfg) {
  Montage montage = standard_montage();
  auto ck = load_checkpoint(checkpoint_path(cfg), montage);
  auto segments = load_segments(cfg.data_dir);
  Split split = load_split_for(cfg);
  auto test_raw = filter_subjects(segments, split.test);
  if (test_raw.empty()) fail_config("robust: empty test split");

  const std::vector<std::string> endpoint_names = {"lsd", "kl", "sci", "cftc"};
  fs::path dir(cfg.out_dir);
  auto rob_csv = open_out(dir / "robustness.csv");
  rob_csv << "# " << cfg.stamp() << "\n";
  rob_csv << "condition,metric,method,mean,std,rank\n";
  auto t4_csv = open_out(dir / "table4.csv");
  t4_csv << "# " << cfg.stamp() << "\n";
  t4_csv << "condition,metric,favc_rank,favc_mean,favc_std,best_other,best_other_mean,"
            "best_other_std,improvement_pct,wilcoxon_p,favc_win_rate\n";

  for (const auto& cond_name : cfg.conditions) {
    perturb::Condition cond = perturb::condition_from_name(cond_name);
    // per repeat: cross-subject mean of subject means; plus pooled per-subject
    // values (mean over repeats) for the paired tests
    std::map<std::string, std::map<std::string, std::vector<double>>> repeat_means;
    std::map<std::string, std::map<std::string, std::map<std::string, double>>> subject_pool;
    std::map<std::string, std::map<std::string, std::map<std::string, int>>> subject_count;

    for (int rep = 0; rep < cfg.repeats; ++rep) {
      std::vector<Segment> corrupted;
      corrupted.reserve(test_raw.size());
      for (size_t i = 0; i < test_raw.size(); ++i) {
        Rng rng = perturb::rng_for(cfg.seed, cond_name, rep, static_cast<int>(i));
        corrupted.push_back(perturb::apply(test_raw[i], cond, cfg.perturb, rng));
      }
      auto rows = evaluate_methods(ck.net, ck.stats, montage, corrupted, cfg);
      for (const auto& method : method_names()) {
        std::vector<metrics::MetricRow> mrows;
        for (const auto& r : rows)
          if (r.method == method) mrows.push_back(r);
        auto subs = metrics::aggregate_subjects(mrows);
        auto summary = metrics::cross_subject_summary(subs);
        for (const auto& m : endpoint_names)
          repeat_means[method][m].push_back(summary.at(m).mean);
        for (const auto& s : subs)
          for (const auto& m : endpoint_names) {
            subject_pool[method][m][s.subject] += s.value.at(m);
            subject_count[method][m][s.subject] += 1;
          }
      }
    }
    for (auto& [method, per_metric] : subject_pool)
      for (auto& [m, per_subject] : per_metric)
        for (auto& [subj, v] : per_subject) v /= subject_count[method][m][subj];

    for (const auto& m : endpoint_names) {
      // across-repeat mean and std per method
      std::map<std::string, metrics::Summary> stat;
      for (const auto& method : method_names()) {
        const auto& vals = repeat_means[method][m];
        metrics::Summary s;
        s.n = static_cast<int>(vals.size());
        for (double v : vals) s.mean += v;
        s.mean /= s.n;
        if (s.n > 1) {
          double acc = 0;
          for (double v : vals) acc += (v - s.mean) * (v - s.mean);
          s.stdev = std::sqrt(acc / (s.n - 1));
        }
        stat[method] = s;
      }
      // direction-aware ranking
      bool lower = metrics::metric_lower_is_better(m);
      std::vector<std::string> order = method_names();
      std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return lower ? stat[a].mean < stat[b].mean : stat[a].mean > stat[b].mean;
      });
      std::map<std::string, int> rank;
      for (size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i) + 1;
      for (const auto& method : method_names())
        rob_csv << cond_name << "," << m << "," << method << ","
                << fmt_double(stat[method].mean) << "," << fmt_double(stat[method].stdev)
                << "," << rank[method] << "\n";

      // favc vs the best non-favc comparator
      std::string best_other;
      for (const auto& name : order)
        if (name != "favc") {
          best_other = name;
          break;
        }
      double improvement =
          lower ? (stat[best_other].mean - stat["favc"].mean) / stat[best_other].mean * 100.0
                : (stat["favc"].mean - stat[best_other].mean) / stat[best_other].mean * 100.0;

      // paired per-subject values pooled over repeats
      std::vector<double> favc_vals, other_vals;
      for (const auto& [subj, v] : subject_pool["favc"][m]) {
        favc_vals.push_back(v);
        other_vals.push_back(subject_pool[best_other][m][subj]);
      }
      std::string pstr = "na";
      if (favc_vals.size() >= 5) {
        bool all_zero = true;
        for (size_t i = 0; i < favc_vals.size(); ++i)
          all_zero = all_zero && favc_vals[i] == other_vals[i];
        if (!all_zero) {
          auto w = stats::wilcoxon_signed_rank(favc_vals, other_vals);
          pstr = fmt_double(w.p_value);
        }
      }
      int wins = 0;
      for (size_t i = 0; i < favc_vals.size(); ++i) {
        bool win = lower ? favc_vals[i] < other_vals[i] : favc_vals[i] > other_vals[i];
        if (win) ++wins;  // strict inequality; ties count as losses
      }
      double win_rate = favc_vals.empty() ? 0.0
                                          : static_cast<double>(wins) / favc_vals.size();

      t4_csv << cond_name << "," << m << "," << rank["favc"] << ","
             << fmt_double(stat["favc"].mean) << "," << fmt_double(stat["favc"].stdev)
             << "," << best_other << "," << fmt_double(stat[best_other].mean) << ","
             << fmt_double(stat[best_other].stdev) << "," << fmt_double(improvement)
             << "," << pstr << "," << fmt_double(win_rate) << "\n";
    }

    // per-condition bar figure
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (const auto& method : method_names()) {
      std::vector<double> vals;
      for (const auto& m : endpoint_names) {
        double acc = 0;
        for (double v : repeat_means[method][m]) acc += v;
        vals.push_back(acc / repeat_means[method][m].size());
      }
      series.push_back({method, vals});
    }
    write_text(dir / ("robust_" + cond_name + ".svg"),
               svg::bar_chart(endpoint_names, series,
                              "Spectral endpoints under " + cond_name, cfg.stamp()));
  }
}

// ---- sweep ------------------------------------------------------------------

void run_sweep(const ExperimentConfig& cfg) {
  Montage montage = standard_montage();
  auto segments = load_segments(cfg.data_dir);
  auto roster = subjects_of(segments);
  Split split = split_subjects(roster, cfg.seed);
  auto train_raw = filter_subjects(segments, split.train);
  auto val_raw = filter_subjects(segments, split.val);
  auto test_raw = filter_subjects(segments, split.test);
  ChannelStats stats = compute_stats(train_raw);
  std::vector<Segment> train_norm, val_norm;
  for (const auto& s : train_raw) train_norm.push_back(normalize(s, stats));
  for (const auto& s : val_raw) val_norm.push_back(normalize(s, stats));

  fs::path dir(cfg.out_dir);
  auto csv = open_out(dir / "sweep.csv");
  csv << "# " << cfg.stamp() << "\n";
  csv << "w_psd,nmae,pearson,lsd,kl\n";
  std::vector<double> xs;
  std::vector<double> nmae_s, pearson_s, lsd_s, kl_s;

  for (double w : cfg.sweep_weights) {
    ArchConfig arch = cfg.toy ? ArchConfig::toy() : ArchConfig::defaults();
    arch.T = segments[0].samples;
    arch.fs = segments[0].fs;
    FavcNet net(arch, montage, cfg.seed);
    train::TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    tcfg.loss.w_psd = w;
    tcfg.loss.w_wave = 1.0 - w;
    tcfg.welch = welch_for(cfg, arch.T, arch.fs);
    train::fit(net, train_norm, val_norm, tcfg);

    // evaluate the favc method only
    auto sigma = sigma_targets(stats);
    auto wp = welch_for(cfg, segments[0].samples, segments[0].fs);
    std::vector<metrics::MetricRow> rows;
    for (size_t i = 0; i < test_raw.size(); ++i) {
      auto pred = predict_targets(net, stats, test_raw[i]);
      rows.push_back(metrics::evaluate_prediction(
          "favc", test_raw[i].subject_id, static_cast<int>(i), pred.data(),
          test_raw[i].targets.data(), test_raw[i].samples, sigma,
          test_raw[i].fs, wp));
    }
    auto summary = metrics::cross_subject_summary(metrics::aggregate_subjects(rows));
    csv << fmt_double(w) << "," << fmt_double(summary.at("nmae").mean) << ","
        << fmt_double(summary.at("pearson").mean) << ","
        << fmt_double(summary.at("lsd").mean) << ","
        << fmt_double(summary.at("kl").mean) << "\n";
    xs.push_back(w);
    nmae_s.push_back(summary.at("nmae").mean);
    pearson_s.push_back(summary.at("pearson").mean);
    lsd_s.push_back(summary.at("lsd").mean);
    kl_s.push_back(summary.at("kl").mean);
  }
  write_text(dir / "sweep.svg",
             svg::line_chart(xs,
                             {{"nmae", nmae_s}, {"pearson", pearson_s}, {"lsd", lsd_s}, {"kl", kl_s}},
                             "w_psd", "PSD-weight sweep", cfg.stamp()));
}

// ---- baseline / report --------------------------------------------------

void run_baseline(const ExperimentConfig& cfg, const std::string& method) {
  if (method == "favc") fail_config("baseline: use eval for the model");
  Montage montage = standard_montage();
  auto segments = load_segments(cfg.data_dir);
  std::vector<Segment> preds;
  FavcNet dummy(ArchConfig::toy(), montage, 0);  // unused by baselines
  ChannelStats no_stats;
  for (const auto& seg : segments) {
    auto y = run_method(method, dummy, no_stats, montage, cfg, seg);
    preds.push_back(baselines::as_prediction(seg, std::move(y)));
  }
  save_segments((fs::path(cfg.out_dir) / ("pred_" + method)).string(), preds);
}

void run_report(const ExperimentConfig& cfg) {
  fs::path dir(cfg.out_dir);
  auto truth = load_segments((dir / "predictions" / "truth").string());
  if (truth.empty()) fail_config("report: run eval first (missing predictions)");
  const Segment& t = truth[0];
  auto wp = welch_for(cfg, t.samples, t.fs);
  auto psd_true = dsp::welch_psd_multi(t.targets.data(), kNumTargets, t.samples, t.fs, wp);
  Montage montage = standard_montage();

  std::vector<std::string> names;
  for (int c = 0; c < kNumTargets; ++c)
    names.push_back(channel_names()[static_cast<size_t>(kNumSources + c)]);

  std::vector<std::string> map_methods = {"recorded"};
  std::vector<std::vector<double>> map_values;
  std::vector<double> bp_true(kNumTargets);
  for (int c = 0; c < kNumTargets; ++c)
    bp_true[static_cast<size_t>(c)] = dsp::log_band_power(
        psd_true.row(c), psd_true.freqs, dsp::Band{"total", 0.5, 45.0, true});
  map_values.push_back(bp_true);

  for (const auto& method : method_names()) {
    auto preds = load_segments((dir / "predictions" / method).string());
    if (preds.empty()) continue;
    const Segment& p = preds[0];
    auto psd_pred = dsp::welch_psd_multi(p.targets.data(), kNumTargets, p.samples, p.fs, wp);
    if (method == "favc") {
      write_text(dir / "figures" / "overlay_favc.svg",
                 svg::waveform_overlay(t.targets, p.targets, t.samples, t.fs, names,
                                       "Recorded vs generated targets", cfg.stamp()));
      write_text(dir / "figures" / "heatmap_favc.svg",
                 svg::heatmap_pair(psd_true, psd_pred,
                                   "Channel-frequency log-PSD", cfg.stamp()));
    }
    std::vector<double> bp(kNumTargets);
    for (int c = 0; c < kNumTargets; ++c)
      bp[static_cast<size_t>(c)] = dsp::log_band_power(
          psd_pred.row(c), psd_pred.freqs, dsp::Band{"total", 0.5, 45.0, true});
    map_methods.push_back(method);
    map_values.push_back(bp);
  }
  write_text(dir / "figures" / "scalp_bandpower.svg",
             svg::scalp_maps(map_methods, map_values, montage,
                             "0.5-45 Hz log bandpower", cfg.stamp()));
}

}  // namespace favc::report

#include "favc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "favc/common.hpp"
#include "favc/dataset.hpp"

namespace favc::metrics {

using ad::Tensor;

// ---- losses -----------------------------------------------------------------

ad::Tensor wave_loss(const ad::Tensor& pred, const ad::Tensor& truth,
                     const std::vector<double>& sigma) {
  if (pred.shape() != truth.shape() || pred.ndim() != 2)
    fail_shape("wave_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
               shape_str(truth.shape()));
  int c = pred.dim(0), t = pred.dim(1);
  if (static_cast<int>(sigma.size()) != c)
    fail_config("wave_loss: sigma must have one entry per channel");
  // per-element weights 1/(sigma_c + eps) enter as a constant tensor
  std::vector<double> w(static_cast<size_t>(c) * t);
  for (int ci = 0; ci < c; ++ci)
    for (int ti = 0; ti < t; ++ti)
      w[static_cast<size_t>(ci) * t + ti] = 1.0 / (sigma[static_cast<size_t>(ci)] + kEps);
  Tensor weights = Tensor::from(pred.shape(), std::move(w));
  return ad::mean(ad::mul(ad::abs(ad::sub(pred, truth)), weights));
}

ad::Tensor psd_loss(const ad::Tensor& pred, const ad::Tensor& truth,
                    const LossWeights& w, double fs,
                    const dsp::WelchParams& wp) {
  if (pred.shape() != truth.shape() || pred.ndim() != 2)
    fail_shape("psd_loss: shape mismatch");
  const int channels = pred.dim(0);
  const int samples = pred.dim(1);
  auto freqs = dsp::welch_grid(fs, wp);
  const int bins = static_cast<int>(freqs.size());

  ad::Tensor acc_log, acc_band, acc_slope;
  for (int c = 0; c < channels; ++c) {
    ad::Tensor row = ad::slice1d(ad::reshape(pred, {channels * samples}),
                                 c * samples, samples);
    ad::Tensor ps = dsp::welch_psd_node(row, fs, wp);
    // truth side is constant: use the plain path
    auto ts = dsp::welch_psd(truth.data() + static_cast<int64_t>(c) * samples,
                             samples, fs, wp);
    Tensor ts_t = Tensor::from({bins}, ts);

    ad::Tensor dlog = ad::mean(ad::abs(ad::sub(ad::log_eps(ps), ad::log_eps(ts_t))));
    ad::Tensor dband = ad::mean(ad::abs(ad::sub(
        dsp::band_fractions_node(ps, freqs),
        Tensor::from({5}, dsp::band_fractions(ts.data(), freqs)))));
    ad::Tensor dslope = ad::abs(ad::sub(
        dsp::spectral_slope_node(ps, freqs),
        Tensor::scalar(dsp::spectral_slope(ts.data(), freqs))));
    acc_log = c == 0 ? dlog : ad::add(acc_log, dlog);
    acc_band = c == 0 ? dband : ad::add(acc_band, dband);
    acc_slope = c == 0 ? dslope : ad::add(acc_slope, dslope);
  }
  double inv = 1.0 / channels;
  return ad::add(ad::add(ad::scale(acc_log, w.lambda_log * inv),
                         ad::scale(acc_band, w.lambda_band * inv)),
                 ad::scale(acc_slope, w.lambda_slope * inv));
}

ad::Tensor total_loss(const ad::Tensor& pred, const ad::Tensor& truth,
                      const std::vector<double>& sigma, const LossWeights& w,
                      double fs, const dsp::WelchParams& wp) {
  ad::Tensor wave = ad::scale(wave_loss(pred, truth, sigma), w.w_wave);
  if (w.w_psd == 0.0) return wave;
  return ad::add(wave, ad::scale(psd_loss(pred, truth, w, fs, wp), w.w_psd));
}

// ---- waveform metrics ---------------------------------------------------

WaveMetrics waveform_metrics(const double* pred, const double* truth,
                             int channels, int samples,
                             const std::vector<double>& sigma) {
  if (static_cast<int>(sigma.size()) != channels)
    fail_config("waveform_metrics: sigma size mismatch");
  WaveMetrics m;
  m.nmae_ch.resize(static_cast<size_t>(channels));
  m.raw_mae_ch.resize(static_cast<size_t>(channels));
  m.pearson_ch.resize(static_cast<size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    const double* p = pred + static_cast<int64_t>(c) * samples;
    const double* y = truth + static_cast<int64_t>(c) * samples;
    double mae = 0, mp = 0, my = 0;
    for (int t = 0; t < samples; ++t) {
      mae += std::fabs(p[t] - y[t]);
      mp += p[t];
      my += y[t];
    }
    mae /= samples;
    mp /= samples;
    my /= samples;
    double spy = 0, spp = 0, syy = 0;
    for (int t = 0; t < samples; ++t) {
      spy += (p[t] - mp) * (y[t] - my);
      spp += (p[t] - mp) * (p[t] - mp);
      syy += (y[t] - my) * (y[t] - my);
    }
    m.raw_mae_ch[static_cast<size_t>(c)] = mae;
    m.nmae_ch[static_cast<size_t>(c)] = mae / (sigma[static_cast<size_t>(c)] + kEps);
    m.pearson_ch[static_cast<size_t>(c)] = spy / (std::sqrt(spp * syy) + kEps);
  }
  for (int c = 0; c < channels; ++c) {
    m.nmae += m.nmae_ch[static_cast<size_t>(c)];
    m.raw_mae += m.raw_mae_ch[static_cast<size_t>(c)];
    m.pearson += m.pearson_ch[static_cast<size_t>(c)];
  }
  m.nmae /= channels;
  m.raw_mae /= channels;
  m.pearson /= channels;
  return m;
}

// ---- spectral metrics ---------------------------------------------------

namespace {
void check_grids(const dsp::PsdEstimate& a, const dsp::PsdEstimate& b,
                 const char* op) {
  if (a.freqs != b.freqs || a.channels != b.channels)
    fail_shape(std::string(op) + ": PSD grids do not match");
}
}  // namespace

double lsd(const dsp::PsdEstimate& pred, const dsp::PsdEstimate& truth) {
  check_grids(pred, truth, "lsd");
  double acc = 0;
  int64_t n = 0;
  for (int c = 0; c < pred.channels; ++c) {
    const double* sp = pred.row(c);
    const double* st = truth.row(c);
    for (int k = 0; k < pred.bins(); ++k) {
      double d = std::log(sp[k] + kEps) - std::log(st[k] + kEps);
      acc += d * d;
      ++n;
    }
  }
  return std::sqrt(acc / static_cast<double>(n));
}

double psd_kl(const dsp::PsdEstimate& pred, const dsp::PsdEstimate& truth) {
  check_grids(pred, truth, "psd_kl");
  double acc = 0;
  for (int c = 0; c < pred.channels; ++c) {
    const double* sp = pred.row(c);
    const double* st = truth.row(c);
    double zp = 0, zt = 0;
    for (int k = 0; k < pred.bins(); ++k) {
      zp += sp[k];
      zt += st[k];
    }
    for (int k = 0; k < pred.bins(); ++k) {
      double p = st[k] / (zt + kEps);   // true distribution
      double q = sp[k] / (zp + kEps);   // predicted
      acc += p * std::log((p + kEps) / (q + kEps));
    }
  }
  return acc / pred.channels;
}

double cftc(const dsp::PsdEstimate& pred, const dsp::PsdEstimate& truth) {
  check_grids(pred, truth, "cftc");
  int64_t n = static_cast<int64_t>(pred.channels) * pred.bins();
  double mp = 0, mt = 0;
  for (int64_t i = 0; i < n; ++i) {
    mp += std::log(pred.power[static_cast<size_t>(i)] + kEps);
    mt += std::log(truth.power[static_cast<size_t>(i)] + kEps);
  }
  mp /= static_cast<double>(n);
  mt /= static_cast<double>(n);
  double spt = 0, spp = 0, stt = 0;
  for (int64_t i = 0; i < n; ++i) {
    double a = std::log(pred.power[static_cast<size_t>(i)] + kEps) - mp;
    double b = std::log(truth.power[static_cast<size_t>(i)] + kEps) - mt;
    spt += a * b;
    spp += a * a;
    stt += b * b;
  }
  if (spp <= 0 || stt <= 0) {
    std::fprintf(stderr, "warning: cftc on zero-variance log-PSD grid, returning 0\n");
    return 0.0;
  }
  return spt / std::sqrt(spp * stt);
}

SciResult sci(const dsp::PsdEstimate& pred, const dsp::PsdEstimate& truth) {
  check_grids(pred, truth, "sci");
  const int c = pred.channels;
  auto pairwise = [&](const dsp::PsdEstimate& e) {
    double acc = 0;
    for (int i = 0; i < c; ++i)
      for (int j = i + 1; j < c; ++j) {
        double d2 = 0;
        for (int k = 0; k < e.bins(); ++k) {
          double d = std::log(e.row(i)[k] + kEps) - std::log(e.row(j)[k] + kEps);
          d2 += d * d;
        }
        acc += std::sqrt(d2);
      }
    return 2.0 * acc / (static_cast<double>(c) * (c - 1));
  };
  SciResult r;
  double dp = pairwise(pred);
  double dt = pairwise(truth);
  r.pair = std::max(1.0 - dp / (dt + kEps), 0.0);

  const auto& bands = dsp::standard_bands();
  r.btvr.resize(bands.size());
  double topo = 0;
  for (size_t k = 0; k < bands.size(); ++k) {
    auto band_std = [&](const dsp::PsdEstimate& e) {
      std::vector<double> bp(static_cast<size_t>(c));
      for (int i = 0; i < c; ++i)
        bp[static_cast<size_t>(i)] = dsp::log_band_power(e.row(i), e.freqs, bands[k]);
      double mu = 0;
      for (double v : bp) mu += v;
      mu /= c;
      double var = 0;
      for (double v : bp) var += (v - mu) * (v - mu);
      return std::sqrt(var / c);
    };
    r.btvr[k] = band_std(pred) / (band_std(truth) + kEps);
    topo += std::max(1.0 - r.btvr[k], 0.0);
  }
  r.topo = topo / static_cast<double>(bands.size());
  r.sci = 0.5 * r.pair + 0.5 * r.topo;
  return r;
}

// ---- rows and aggregation ----------------------------------------------

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "nmae", "raw_mae", "pearson", "lsd", "kl", "cftc", "sci"};
  return names;
}

double metric_value(const MetricRow& row, const std::string& name) {
  if (name == "nmae") return row.nmae;
  if (name == "raw_mae") return row.raw_mae;
  if (name == "pearson") return row.pearson;
  if (name == "lsd") return row.lsd;
  if (name == "kl") return row.kl;
  if (name == "cftc") return row.cftc;
  if (name == "sci") return row.sci;
  if (name == "sci_pair") return row.sci_pair;
  if (name == "sci_topo") return row.sci_topo;
  fail_config("unknown metric: " + name);
}

bool metric_lower_is_better(const std::string& name) {
  return !(name == "pearson" || name == "cftc");
}

MetricRow evaluate_prediction(const std::string& method,
                              const std::string& subject, int segment,
                              const double* pred, const double* truth,
                              int samples, const std::vector<double>& sigma,
                              double fs, const dsp::WelchParams& wp) {
  MetricRow row;
  row.method = method;
  row.subject = subject;
  row.segment = segment;
  WaveMetrics wm = waveform_metrics(pred, truth, kNumTargets, samples, sigma);
  row.nmae = wm.nmae;
  row.raw_mae = wm.raw_mae;
  row.pearson = wm.pearson;
  row.nmae_ch = std::move(wm.nmae_ch);
  row.raw_mae_ch = std::move(wm.raw_mae_ch);
  row.pearson_ch = std::move(wm.pearson_ch);

  auto psd_pred = dsp::welch_psd_multi(pred, kNumTargets, samples, fs, wp);
  auto psd_true = dsp::welch_psd_multi(truth, kNumTargets, samples, fs, wp);
  row.lsd = lsd(psd_pred, psd_true);
  row.kl = psd_kl(psd_pred, psd_true);
  row.cftc = cftc(psd_pred, psd_true);
  SciResult s = sci(psd_pred, psd_true);
  row.sci = s.sci;
  row.sci_pair = s.pair;
  row.sci_topo = s.topo;
  return row;
}

std::vector<SubjectMean> aggregate_subjects(const std::vector<MetricRow>& rows) {
  std::vector<SubjectMean> out;
  for (const auto& row : rows) {
    SubjectMean* sm = nullptr;
    for (auto& s : out)
      if (s.subject == row.subject) sm = &s;
    if (!sm) {
      out.push_back({row.subject, {}, 0});
      sm = &out.back();
    }
    for (const auto& name : metric_names())
      sm->value[name] += metric_value(row, name);
    ++sm->segments;
  }
  for (auto& s : out) {
    if (s.segments == 0) fail_config("subject with no segments in aggregation");
    for (auto& [k, v] : s.value) v /= s.segments;
  }
  return out;
}

std::map<std::string, Summary> cross_subject_summary(
    const std::vector<SubjectMean>& subjects) {
  std::map<std::string, Summary> out;
  for (const auto& name : metric_names()) {
    Summary s;
    s.n = static_cast<int>(subjects.size());
    for (const auto& sub : subjects) s.mean += sub.value.at(name);
    if (s.n > 0) s.mean /= s.n;
    if (s.n > 1) {
      double acc = 0;
      for (const auto& sub : subjects) {
        double d = sub.value.at(name) - s.mean;
        acc += d * d;
      }
      s.stdev = std::sqrt(acc / (s.n - 1));
    }
    out[name] = s;
  }
  return out;
}

}  // namespace favc::metrics

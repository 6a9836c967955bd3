#pragma once

#include <map>
#include <string>
#include <vector>

#include "favc/dsp.hpp"
#include "favc/tensor.hpp"

namespace favc::metrics {

struct LossWeights {
  double w_wave = 0.90;
  double w_psd = 0.10;
  double lambda_log = 1.0;
  double lambda_band = 1.0;
  double lambda_slope = 0.5;
};

// Normalized absolute reconstruction loss: mean over channels and samples of
// |pred - truth| / (sigma_c + eps). Pass unit sigmas for tensors that are
// already in normalized units.
ad::Tensor wave_loss(const ad::Tensor& pred, const ad::Tensor& truth,
                     const std::vector<double>& sigma);

// Weak spectral calibration: log-PSD shape + band allocation + slope, each
// term a channel mean, differentiable through the Welch path of `pred`.
ad::Tensor psd_loss(const ad::Tensor& pred, const ad::Tensor& truth,
                    const LossWeights& w, double fs,
                    const dsp::WelchParams& wp = {});

// w_wave * wave + w_psd * psd; the Welch path is not evaluated when w_psd=0.
ad::Tensor total_loss(const ad::Tensor& pred, const ad::Tensor& truth,
                      const std::vector<double>& sigma, const LossWeights& w,
                      double fs, const dsp::WelchParams& wp = {});

// ---- plain metrics (evaluation side, raw microvolt scale) ----

struct WaveMetrics {
  std::vector<double> nmae_ch, raw_mae_ch, pearson_ch;  // 13 each
  double nmae = 0, raw_mae = 0, pearson = 0;            // channel means
};

WaveMetrics waveform_metrics(const double* pred, const double* truth,
                             int channels, int samples,
                             const std::vector<double>& sigma);

double lsd(const dsp::PsdEstimate& pred, const dsp::PsdEstimate& truth);
double psd_kl(const dsp::PsdEstimate& pred, const dsp::PsdEstimate& truth);
double cftc(const dsp::PsdEstimate& pred, const dsp::PsdEstimate& truth);

struct SciResult {
  double sci = 0, pair = 0, topo = 0;
  std::vector<double> btvr;  // per band
};
SciResult sci(const dsp::PsdEstimate& pred, const dsp::PsdEstimate& truth);

// One evaluated (method, segment) pair.
struct MetricRow {
  std::string method;
  std::string subject;
  int segment = -1;
  double nmae = 0, raw_mae = 0, pearson = 0;
  double lsd = 0, kl = 0, cftc = 0;
  double sci = 0, sci_pair = 0, sci_topo = 0;
  std::vector<double> nmae_ch, raw_mae_ch, pearson_ch;
};

const std::vector<std::string>& metric_names();  // pooled scalar columns
double metric_value(const MetricRow& row, const std::string& name);
bool metric_lower_is_better(const std::string& name);

MetricRow evaluate_prediction(const std::string& method,
                              const std::string& subject, int segment,
                              const double* pred, const double* truth,
                              int samples, const std::vector<double>& sigma,
                              double fs, const dsp::WelchParams& wp = {});

// Subject-level aggregation: segment rows -> per-subject means, then
// cross-subject mean +- sample standard deviation.
struct SubjectMean {
  std::string subject;
  std::map<std::string, double> value;
  int segments = 0;
};
struct Summary {
  double mean = 0;
  double stdev = 0;
  int n = 0;
};

std::vector<SubjectMean> aggregate_subjects(const std::vector<MetricRow>& rows);
std::map<std::string, Summary> cross_subject_summary(
    const std::vector<SubjectMean>& subjects);

}  // namespace favc::metrics

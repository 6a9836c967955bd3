#pragma once

#include <array>
#include <string>
#include <vector>

#include "favc/tensor.hpp"

namespace favc::dsp {

// Welch estimator settings. The defaults resolve the 0.5 Hz grid on a
// 3000-sample segment at 500 Hz (5 averaged 2 s frames, 50% overlap).
struct WelchParams {
  int nwin = 1000;
  int hop = 500;
  double f_lo = 0.5;
  double f_hi = 45.0;
};

// Per-channel power spectral density on a fixed frequency grid.
struct PsdEstimate {
  std::vector<double> freqs;   // Hz, strictly increasing
  int channels = 0;
  std::vector<double> power;   // channels x freqs.size(), row-major

  int bins() const { return static_cast<int>(freqs.size()); }
  const double* row(int c) const { return power.data() + static_cast<size_t>(c) * freqs.size(); }
  double* row(int c) { return power.data() + static_cast<size_t>(c) * freqs.size(); }
};

// The five physiological bands; half-open except the last.
struct Band {
  std::string name;
  double lo, hi;
  bool closed_hi;
  bool contains(double f) const {
    return f >= lo && (closed_hi ? f <= hi : f < hi);
  }
};

const std::array<Band, 5>& standard_bands();

// Hann window, w_l = 0.5 - 0.5 cos(2 pi l / (n-1)).
std::vector<double> hann(int n);

// Zero-phase 4th-order Butterworth band-pass (forward-backward biquad
// cascade with odd-reflection edge padding). Output length equals input.
std::vector<double> bandpass(const std::vector<double>& x, double fs,
                             double lo, double hi);

// Frequency grid for given params: bins k*fs/nwin restricted to [f_lo, f_hi].
std::vector<double> welch_grid(double fs, const WelchParams& p);

// Welch PSD of one channel. No one-sided doubling is applied: values are the
// per-bin estimate |F{w.x}|^2 / (fs sum w^2) averaged over frames, so total
// power corresponds to the two-sided sum (DC + 2*mid + Nyquist).
std::vector<double> welch_psd(const double* x, int len, double fs,
                              const WelchParams& p = {});

PsdEstimate welch_psd_multi(const double* x, int channels, int len, double fs,
                            const WelchParams& p = {});

// Differentiable twin of welch_psd built from tape primitives; numerically
// identical to the plain path for the same inputs.
ad::Tensor welch_psd_node(const ad::Tensor& signal, double fs,
                          const WelchParams& p = {});

// rho_k = sum_{f in B_k} S(f) / (sum_f S(f) + eps).
std::vector<double> band_fractions(const double* psd,
                                   const std::vector<double>& freqs);
ad::Tensor band_fractions_node(const ad::Tensor& psd,
                               const std::vector<double>& freqs);

// OLS slope of log(S + eps) against log f over [fit_lo, fit_hi].
double spectral_slope(const double* psd, const std::vector<double>& freqs,
                      double fit_lo = 2.0, double fit_hi = 40.0);
ad::Tensor spectral_slope_node(const ad::Tensor& psd,
                               const std::vector<double>& freqs,
                               double fit_lo = 2.0, double fit_hi = 40.0);

// BP = log(sum_{f in band} S(f) + eps).
double log_band_power(const double* psd, const std::vector<double>& freqs,
                      const Band& band);

}  // namespace favc::dsp

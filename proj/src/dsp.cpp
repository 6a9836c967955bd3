#include "favc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "favc/common.hpp"
#include "favc/fft.hpp"

namespace favc::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const std::array<Band, 5>& standard_bands() {
  static const std::array<Band, 5> bands = {{
      {"delta", 0.5, 4.0, false},
      {"theta", 4.0, 8.0, false},
      {"alpha", 8.0, 13.0, false},
      {"beta", 13.0, 30.0, false},
      {"low_gamma", 30.0, 45.0, true},
  }};
  return bands;
}

std::vector<double> hann(int n) {
  if (n < 2) fail_config("hann: window length must be >= 2");
  std::vector<double> w(static_cast<size_t>(n));
  for (int l = 0; l < n; ++l)
    w[static_cast<size_t>(l)] = 0.5 - 0.5 * std::cos(2.0 * kPi * l / (n - 1));
  return w;
}

// ---- Butterworth band-pass --------------------------------------------------

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;  // a0 normalized to 1
};

std::vector<Biquad> design_bandpass(double fs, double lo, double hi) {
  const int order = 4;  // analog prototype order; 8 poles after LP->BP
  // prototype poles on the unit circle, left half-plane
  std::vector<std::complex<double>> proto;
  for (int k = 1; k <= order; ++k) {
    double ang = kPi * (2.0 * k + order - 1.0) / (2.0 * order);
    proto.emplace_back(std::cos(ang), std::sin(ang));
  }
  double wlo = 2.0 * fs * std::tan(kPi * lo / fs);
  double whi = 2.0 * fs * std::tan(kPi * hi / fs);
  double bw = whi - wlo;
  double w0 = std::sqrt(wlo * whi);

  std::vector<std::complex<double>> zpoles;
  for (const auto& p : proto) {
    if (p.imag() <= 0) continue;  // conjugates are implicit
    std::complex<double> t = p * (bw / 2.0);
    std::complex<double> disc = std::sqrt(t * t - w0 * w0);
    for (const auto& s : {t + disc, t - disc}) {
      std::complex<double> z = (2.0 * fs + s) / (2.0 * fs - s);
      zpoles.push_back(z);
    }
  }
  // one biquad per pole (conjugate pair), zeros at z = +1 and z = -1
  double wc = 2.0 * kPi * std::sqrt(lo * hi) / fs;
  std::complex<double> ec(std::cos(wc), std::sin(wc));
  std::complex<double> ec2 = ec * ec;
  std::vector<Biquad> sections;
  for (const auto& zp : zpoles) {
    Biquad s{1.0, 0.0, -1.0, -2.0 * zp.real(), std::norm(zp)};
    std::complex<double> num = ec2 - 1.0;
    std::complex<double> den = ec2 + s.a1 * ec + s.a2;
    double gain = std::abs(num / den);
    s.b0 /= gain;
    s.b2 /= gain;
    sections.push_back(s);
  }
  return sections;
}

void biquad_cascade_inplace(std::vector<double>& x,
                            const std::vector<Biquad>& sections) {
  for (const auto& s : sections) {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : x) {
      double in = v;
      double out = s.b0 * in + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
      x2 = x1;
      x1 = in;
      y2 = y1;
      y1 = out;
      v = out;
    }
  }
}

}  // namespace

std::vector<double> bandpass(const std::vector<double>& x, double fs,
                             double lo, double hi) {
  if (!(lo > 0.0) || !(hi > lo) || !(hi < fs / 2.0))
    fail_config("bandpass: band edges must satisfy 0 < lo < hi < fs/2");
  const int len = static_cast<int>(x.size());
  if (len < 4) fail_config("bandpass: signal too short");
  auto sections = design_bandpass(fs, lo, hi);

  // odd-reflection padding long enough for the slow low-edge pole to settle
  int pad = std::min(len - 1, static_cast<int>(std::lround(3.0 * fs / lo)));
  std::vector<double> ext;
  ext.reserve(static_cast<size_t>(len + 2 * pad));
  for (int i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[static_cast<size_t>(i)]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (int i = 1; i <= pad; ++i)
    ext.push_back(2.0 * x[static_cast<size_t>(len - 1)] - x[static_cast<size_t>(len - 1 - i)]);

  biquad_cascade_inplace(ext, sections);
  std::reverse(ext.begin(), ext.end());
  biquad_cascade_inplace(ext, sections);
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + pad, ext.begin() + pad + len);
}

// ---- Welch ------------------------------------------------------------------

std::vector<double> welch_grid(double fs, const WelchParams& p) {
  std::vector<double> freqs;
  for (int k = 0; k <= p.nwin / 2; ++k) {
    double f = k * fs / p.nwin;
    if (f >= p.f_lo - 1e-9 && f <= p.f_hi + 1e-9) freqs.push_back(f);
  }
  return freqs;
}

namespace {
int grid_first_bin(double fs, const WelchParams& p) {
  for (int k = 0; k <= p.nwin / 2; ++k) {
    double f = k * fs / p.nwin;
    if (f >= p.f_lo - 1e-9 && f <= p.f_hi + 1e-9) return k;
  }
  fail_config("welch: no frequency bins inside the requested band");
}
}  // namespace

std::vector<double> welch_psd(const double* x, int len, double fs,
                              const WelchParams& p) {
  if (len < p.nwin) fail_config("welch: signal shorter than one window");
  const int frames = (len - p.nwin) / p.hop + 1;
  auto w = hann(p.nwin);
  double wss = 0;
  for (double v : w) wss += v * v;
  const double norm = 1.0 / (frames * fs * wss);

  std::vector<double> acc(static_cast<size_t>(p.nwin / 2 + 1), 0.0);
  std::vector<double> frame(static_cast<size_t>(p.nwin));
  for (int n = 0; n < frames; ++n) {
    const double* seg = x + static_cast<int64_t>(n) * p.hop;
    for (int t = 0; t < p.nwin; ++t) frame[static_cast<size_t>(t)] = seg[t] * w[static_cast<size_t>(t)];
    auto pw = fft::rfft_power(frame.data(), p.nwin);
    for (size_t k = 0; k < acc.size(); ++k) acc[k] += pw[k];
  }
  int k0 = grid_first_bin(fs, p);
  auto freqs = welch_grid(fs, p);
  std::vector<double> out(freqs.size());
  for (size_t i = 0; i < freqs.size(); ++i)
    out[i] = acc[static_cast<size_t>(k0) + i] * norm;
  return out;
}

PsdEstimate welch_psd_multi(const double* x, int channels, int len, double fs,
                            const WelchParams& p) {
  PsdEstimate est;
  est.freqs = welch_grid(fs, p);
  est.channels = channels;
  est.power.resize(static_cast<size_t>(channels) * est.freqs.size());
  for (int c = 0; c < channels; ++c) {
    auto row = welch_psd(x + static_cast<int64_t>(c) * len, len, fs, p);
    std::copy(row.begin(), row.end(), est.row(c));
  }
  return est;
}

ad::Tensor welch_psd_node(const ad::Tensor& signal, double fs,
                          const WelchParams& p) {
  if (signal.ndim() != 1) fail_shape("welch_psd_node: expects 1-D signal");
  const int len = signal.dim(0);
  if (len < p.nwin) fail_config("welch: signal shorter than one window");
  const int frames = (len - p.nwin) / p.hop + 1;
  auto w = hann(p.nwin);
  double wss = 0;
  for (double v : w) wss += v * v;
  ad::Tensor window = ad::Tensor::from({p.nwin}, w);

  ad::Tensor acc;
  for (int n = 0; n < frames; ++n) {
    ad::Tensor frame = ad::slice1d(signal, n * p.hop, p.nwin);
    ad::Tensor pw = ad::rfft_power(ad::mul(frame, window));
    acc = n == 0 ? pw : ad::add(acc, pw);
  }
  acc = ad::scale(acc, 1.0 / (frames * fs * wss));
  int k0 = grid_first_bin(fs, p);
  int bins = static_cast<int>(welch_grid(fs, p).size());
  return ad::slice1d(acc, k0, bins);
}

// ---- band features ---------------------------------------------------------

namespace {
// contiguous [start, count) index range of grid bins inside a band
std::pair<int, int> band_range(const std::vector<double>& freqs, const Band& b) {
  int start = -1, count = 0;
  for (size_t i = 0; i < freqs.size(); ++i) {
    if (b.contains(freqs[i])) {
      if (start < 0) start = static_cast<int>(i);
      ++count;
    }
  }
  return {start, count};
}
}  // namespace

std::vector<double> band_fractions(const double* psd,
                                   const std::vector<double>& freqs) {
  const auto& bands = standard_bands();
  double total = 0;
  for (size_t i = 0; i < freqs.size(); ++i) total += psd[i];
  std::vector<double> rho(bands.size(), 0.0);
  for (size_t k = 0; k < bands.size(); ++k) {
    auto [start, count] = band_range(freqs, bands[k]);
    double s = 0;
    for (int i = 0; i < count; ++i) s += psd[start + i];
    rho[k] = s / (total + kEps);
  }
  return rho;
}

ad::Tensor band_fractions_node(const ad::Tensor& psd,
                               const std::vector<double>& freqs) {
  if (psd.size() != static_cast<int64_t>(freqs.size()))
    fail_shape("band_fractions_node: grid mismatch");
  const auto& bands = standard_bands();
  ad::Tensor denom = ad::add_const(ad::sum(psd), kEps);
  std::vector<ad::Tensor> nums;
  std::vector<ad::Tensor> denoms;
  for (const auto& b : bands) {
    auto [start, count] = band_range(freqs, b);
    if (count == 0) fail_config("band_fractions_node: empty band " + b.name);
    nums.push_back(ad::sum(ad::slice1d(psd, start, count)));
    denoms.push_back(denom);
  }
  return ad::div(ad::concat(nums), ad::concat(denoms));
}

double spectral_slope(const double* psd, const std::vector<double>& freqs,
                      double fit_lo, double fit_hi) {
  std::vector<double> xs, ys;
  for (size_t i = 0; i < freqs.size(); ++i) {
    if (freqs[i] >= fit_lo - 1e-9 && freqs[i] <= fit_hi + 1e-9) {
      xs.push_back(std::log(freqs[i]));
      ys.push_back(std::log(psd[i] + kEps));
    }
  }
  if (xs.size() < 3) fail_config("spectral_slope: fewer than 3 bins in fit range");
  double xbar = 0;
  for (double v : xs) xbar += v;
  xbar /= static_cast<double>(xs.size());
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * ys[i];
  }
  return sxy / sxx;
}

ad::Tensor spectral_slope_node(const ad::Tensor& psd,
                               const std::vector<double>& freqs,
                               double fit_lo, double fit_hi) {
  if (psd.size() != static_cast<int64_t>(freqs.size()))
    fail_shape("spectral_slope_node: grid mismatch");
  int start = -1, count = 0;
  std::vector<double> xs;
  for (size_t i = 0; i < freqs.size(); ++i) {
    if (freqs[i] >= fit_lo - 1e-9 && freqs[i] <= fit_hi + 1e-9) {
      if (start < 0) start = static_cast<int>(i);
      xs.push_back(std::log(freqs[i]));
      ++count;
    }
  }
  if (count < 3) fail_config("spectral_slope: fewer than 3 bins in fit range");
  double xbar = 0;
  for (double v : xs) xbar += v;
  xbar /= static_cast<double>(xs.size());
  double sxx = 0;
  for (double v : xs) sxx += (v - xbar) * (v - xbar);
  // slope is a fixed linear functional of log(S + eps)
  std::vector<double> coef(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) coef[i] = (xs[i] - xbar) / sxx;
  ad::Tensor c = ad::Tensor::from({count}, coef);
  return ad::dot(c, ad::log_eps(ad::slice1d(psd, start, count)));
}

double log_band_power(const double* psd, const std::vector<double>& freqs,
                      const Band& band) {
  double s = 0;
  for (size_t i = 0; i < freqs.size(); ++i)
    if (band.contains(freqs[i])) s += psd[i];
  return std::log(s + kEps);
}

}  // namespace favc::dsp

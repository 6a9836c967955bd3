#include "favc/fft.hpp"

#include <cmath>

#include "favc/common.hpp"

namespace favc::fft {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

using cvec = std::vector<std::complex<double>>;

void dft_naive(const cvec& in, cvec& out, bool inverse) {
  const int n = static_cast<int>(in.size());
  out.assign(static_cast<size_t>(n), {0.0, 0.0});
  const double sgn = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (int t = 0; t < n; ++t) {
      double ang = sgn * kTwoPi * static_cast<double>(k) *
                   static_cast<double>(t) / static_cast<double>(n);
      acc += in[static_cast<size_t>(t)] *
             std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[static_cast<size_t>(k)] = acc;
  }
}

int small_factor(int n) {
  for (int r : {2, 3, 5})
    if (n % r == 0) return r;
  return n;
}

void fft_rec(cvec& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  if (n <= 1) return;
  const int r = small_factor(n);
  if (r == n) {
    cvec out;
    dft_naive(a, out, inverse);
    a.swap(out);
    return;
  }
  const int m = n / r;
  std::vector<cvec> parts(static_cast<size_t>(r));
  for (int p = 0; p < r; ++p) parts[static_cast<size_t>(p)].resize(static_cast<size_t>(m));
  for (int j = 0; j < n; ++j)
    parts[static_cast<size_t>(j % r)][static_cast<size_t>(j / r)] = a[static_cast<size_t>(j)];
  for (auto& part : parts) fft_rec(part, inverse);

  const double sgn = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (int p = 0; p < r; ++p) {
      double ang = sgn * kTwoPi * static_cast<double>(p) *
                   static_cast<double>(k) / static_cast<double>(n);
      acc += parts[static_cast<size_t>(p)][static_cast<size_t>(k % m)] *
             std::complex<double>(std::cos(ang), std::sin(ang));
    }
    a[static_cast<size_t>(k)] = acc;
  }
}

}  // namespace

void transform(std::vector<std::complex<double>>& a, bool inverse) {
  fft_rec(a, inverse);
}

std::vector<std::complex<double>> rfft(const double* x, int n) {
  cvec a(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t) a[static_cast<size_t>(t)] = {x[t], 0.0};
  transform(a, false);
  a.resize(static_cast<size_t>(n / 2 + 1));
  return a;
}

std::vector<double> rfft_power(const double* x, int n) {
  auto spec = rfft(x, n);
  std::vector<double> p(spec.size());
  for (size_t k = 0; k < spec.size(); ++k) p[k] = std::norm(spec[k]);
  return p;
}

std::vector<double> rfft_power_adjoint(
    const std::vector<std::complex<double>>& spectrum, const double* upstream,
    int n) {
  if (static_cast<int>(spectrum.size()) != n / 2 + 1)
    fail_shape("rfft_power_adjoint: spectrum size does not match n");
  // d/dx_t sum_k g_k |F_k|^2 = sum_k 2 g_k (Re F_k cos(2pi k t/n)
  //                                          - Im F_k sin(2pi k t/n)).
  // Evaluated as one inverse-direction transform of the weighted spectrum
  // extended with hermitian symmetry; bin 0 and n/2 have no mirror so the
  // factor 2 is applied to them directly.
  cvec h(static_cast<size_t>(n), {0.0, 0.0});
  const int half = n / 2;
  h[0] = 2.0 * upstream[0] * spectrum[0];
  h[static_cast<size_t>(half)] =
      2.0 * upstream[half] * spectrum[static_cast<size_t>(half)];
  for (int k = 1; k < half; ++k) {
    std::complex<double> w = upstream[k] * spectrum[static_cast<size_t>(k)];
    h[static_cast<size_t>(k)] = w;
    h[static_cast<size_t>(n - k)] = std::conj(w);
  }
  transform(h, true);
  std::vector<double> grad(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t) {
    // mirrored mid bins contribute 2*Re(gF e^{i...}) per pair; ends were
    // pre-doubled, so the real part is exactly the derivative.
    grad[static_cast<size_t>(t)] = h[static_cast<size_t>(t)].real();
  }
  return grad;
}

}  // namespace favc::fft

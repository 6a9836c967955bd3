#pragma once

#include <complex>
#include <vector>

namespace favc::fft {

// Unnormalized DFT, any length. Mixed-radix Cooley-Tukey for factors 2/3/5,
// naive O(n^2) for the remaining prime factor. inverse=true uses e^{+i...}
// (still unnormalized).
void transform(std::vector<std::complex<double>>& a, bool inverse);

// Real-input spectrum, bins 0..n/2 (n even).
std::vector<std::complex<double>> rfft(const double* x, int n);

// |rfft|^2 per bin.
std::vector<double> rfft_power(const double* x, int n);

// Adjoint of rfft_power: given the spectrum F of the forward call and the
// upstream gradient g over bins 0..n/2, returns dsum(g_k*|F_k|^2)/dx_t.
std::vector<double> rfft_power_adjoint(
    const std::vector<std::complex<double>>& spectrum,
    const double* upstream, int n);

}  // namespace favc::fft

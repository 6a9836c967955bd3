#include "favc/baselines.hpp"

#include <cmath>

#include "favc/common.hpp"

namespace favc::baselines {

namespace {
constexpr double kFourPi = 12.56637061435917295385;

double dot3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double chord(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// LU solve with partial pivoting for the small KKT systems.
struct Lu {
  int n;
  std::vector<double> a;
  std::vector<int> piv;

  explicit Lu(std::vector<double> m, int size) : n(size), a(std::move(m)), piv(static_cast<size_t>(size)) {
    for (int i = 0; i < n; ++i) piv[static_cast<size_t>(i)] = i;
    for (int k = 0; k < n; ++k) {
      int p = k;
      for (int i = k + 1; i < n; ++i)
        if (std::fabs(a[static_cast<size_t>(i * n + k)]) > std::fabs(a[static_cast<size_t>(p * n + k)])) p = i;
      if (std::fabs(a[static_cast<size_t>(p * n + k)]) < 1e-14)
        fail_numeric("spherical spline: singular interpolation system (montage degenerate?)");
      if (p != k) {
        for (int j = 0; j < n; ++j) std::swap(a[static_cast<size_t>(p * n + j)], a[static_cast<size_t>(k * n + j)]);
        std::swap(piv[static_cast<size_t>(p)], piv[static_cast<size_t>(k)]);
      }
      for (int i = k + 1; i < n; ++i) {
        a[static_cast<size_t>(i * n + k)] /= a[static_cast<size_t>(k * n + k)];
        for (int j = k + 1; j < n; ++j)
          a[static_cast<size_t>(i * n + j)] -= a[static_cast<size_t>(i * n + k)] * a[static_cast<size_t>(k * n + j)];
      }
    }
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    std::vector<double> x(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = b[static_cast<size_t>(piv[static_cast<size_t>(i)])];
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < i; ++j) x[static_cast<size_t>(i)] -= a[static_cast<size_t>(i * n + j)] * x[static_cast<size_t>(j)];
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) x[static_cast<size_t>(i)] -= a[static_cast<size_t>(i * n + j)] * x[static_cast<size_t>(j)];
      x[static_cast<size_t>(i)] /= a[static_cast<size_t>(i * n + i)];
    }
    return x;
  }
};

void check_sources(const Segment& seg) {
  if (seg.sources.empty()) fail_config("baseline: segment has no source rows");
}
}  // namespace

double legendre_g(double x, int m, int n_max) {
  if (x < -1.0 - 1e-12 || x > 1.0 + 1e-12)
    fail_config("legendre_g: argument outside [-1, 1]");
  // P_n by the standard three-term recurrence
  double pm1 = 1.0;  // P_0
  double p = x;      // P_1
  double acc = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    double coef = (2.0 * n + 1.0) /
                  (std::pow(static_cast<double>(n), m) * std::pow(n + 1.0, m));
    acc += coef * p;
    double pnext = ((2.0 * n + 1.0) * x * p - n * pm1) / (n + 1.0);
    pm1 = p;
    p = pnext;
  }
  return acc / kFourPi;
}

std::vector<double> spherical_spline(const Segment& seg, const Montage& montage,
                                     const SplineParams& params) {
  check_sources(seg);
  const int ns = kNumSources;
  const int nt = kNumTargets;
  const int dim = ns + 1;

  // pairwise source distinctness
  for (int i = 0; i < ns; ++i)
    for (int j = i + 1; j < ns; ++j)
      if (chord(montage.pos3[static_cast<size_t>(montage.source_idx[static_cast<size_t>(i)])],
                montage.pos3[static_cast<size_t>(montage.source_idx[static_cast<size_t>(j)])]) < 1e-9)
        fail_numeric("spherical spline: coincident source electrodes " +
                     montage.names[static_cast<size_t>(montage.source_idx[static_cast<size_t>(i)])] + "/" +
                     montage.names[static_cast<size_t>(montage.source_idx[static_cast<size_t>(j)])]);

  std::vector<double> kkt(static_cast<size_t>(dim * dim), 0.0);
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < ns; ++j) {
      double c = dot3(montage.pos3[static_cast<size_t>(montage.source_idx[static_cast<size_t>(i)])],
                      montage.pos3[static_cast<size_t>(montage.source_idx[static_cast<size_t>(j)])]);
      kkt[static_cast<size_t>(i * dim + j)] =
          legendre_g(std::max(-1.0, std::min(1.0, c)), params.m, params.n_max) +
          (i == j ? params.ridge : 0.0);
    }
    kkt[static_cast<size_t>(i * dim + ns)] = 1.0;
    kkt[static_cast<size_t>(ns * dim + i)] = 1.0;
  }
  Lu lu(kkt, dim);

  // g(cos theta) between each target and each source, fixed per montage
  std::vector<double> gt(static_cast<size_t>(nt * ns));
  for (int t = 0; t < nt; ++t)
    for (int j = 0; j < ns; ++j) {
      double c = dot3(montage.pos3[static_cast<size_t>(montage.target_idx[static_cast<size_t>(t)])],
                      montage.pos3[static_cast<size_t>(montage.source_idx[static_cast<size_t>(j)])]);
      gt[static_cast<size_t>(t * ns + j)] =
          legendre_g(std::max(-1.0, std::min(1.0, c)), params.m, params.n_max);
    }

  std::vector<double> out(static_cast<size_t>(nt) * seg.samples);
  std::vector<double> rhs(static_cast<size_t>(dim), 0.0);
  for (int s = 0; s < seg.samples; ++s) {
    for (int j = 0; j < ns; ++j) rhs[static_cast<size_t>(j)] = seg.source_row(j)[s];
    rhs[static_cast<size_t>(ns)] = 0.0;
    std::vector<double> sol = lu.solve(rhs);
    // relative solve residual guard
    double rmax = 0, bmax = 1e-12;
    for (int i = 0; i < dim; ++i) {
      double acc = 0;
      for (int j = 0; j < dim; ++j) acc += kkt[static_cast<size_t>(i * dim + j)] * sol[static_cast<size_t>(j)];
      rmax = std::max(rmax, std::fabs(acc - rhs[static_cast<size_t>(i)]));
      bmax = std::max(bmax, std::fabs(rhs[static_cast<size_t>(i)]));
    }
    if (rmax / bmax > 1e-8)
      fail_numeric("spherical spline: solve residual above tolerance");
    double c0 = sol[static_cast<size_t>(ns)];
    for (int t = 0; t < nt; ++t) {
      double v = c0;
      for (int j = 0; j < ns; ++j) v += sol[static_cast<size_t>(j)] * gt[static_cast<size_t>(t * ns + j)];
      out[static_cast<size_t>(t) * seg.samples + s] = v;
    }
  }
  return out;
}

std::vector<double> idw_weights(const Montage& montage, double power) {
  std::vector<double> w(static_cast<size_t>(kNumTargets * kNumSources), 0.0);
  for (int t = 0; t < kNumTargets; ++t) {
    const auto& pt = montage.pos3[static_cast<size_t>(montage.target_idx[static_cast<size_t>(t)])];
    int coincident = -1;
    for (int j = 0; j < kNumSources; ++j) {
      double d = chord(pt, montage.pos3[static_cast<size_t>(montage.source_idx[static_cast<size_t>(j)])]);
      if (d < 1e-12) {
        coincident = j;
        break;
      }
    }
    if (coincident >= 0) {
      w[static_cast<size_t>(t * kNumSources + coincident)] = 1.0;
      continue;
    }
    double denom = 0;
    for (int j = 0; j < kNumSources; ++j) {
      double d = chord(pt, montage.pos3[static_cast<size_t>(montage.source_idx[static_cast<size_t>(j)])]);
      w[static_cast<size_t>(t * kNumSources + j)] = std::pow(d, -power);
      denom += w[static_cast<size_t>(t * kNumSources + j)];
    }
    for (int j = 0; j < kNumSources; ++j) w[static_cast<size_t>(t * kNumSources + j)] /= denom;
  }
  return w;
}

std::vector<double> idw(const Segment& seg, const Montage& montage, double power) {
  check_sources(seg);
  auto w = idw_weights(montage, power);
  std::vector<double> out(static_cast<size_t>(kNumTargets) * seg.samples, 0.0);
  for (int t = 0; t < kNumTargets; ++t)
    for (int j = 0; j < kNumSources; ++j) {
      double wj = w[static_cast<size_t>(t * kNumSources + j)];
      if (wj == 0.0) continue;
      const double* src = seg.source_row(j);
      double* dst = out.data() + static_cast<int64_t>(t) * seg.samples;
      for (int s = 0; s < seg.samples; ++s) dst[s] += wj * src[s];
    }
  return out;
}

std::vector<int> nni_assignment(const Montage& montage) {
  std::vector<int> pick(static_cast<size_t>(kNumTargets), 0);
  for (int t = 0; t < kNumTargets; ++t) {
    const auto& pt = montage.pos3[static_cast<size_t>(montage.target_idx[static_cast<size_t>(t)])];
    double best = 1e300;
    int arg = 0;
    for (int j = 0; j < kNumSources; ++j) {
      double d = chord(pt, montage.pos3[static_cast<size_t>(montage.source_idx[static_cast<size_t>(j)])]);
      if (d < best - 1e-15) {  // strict improvement; ties keep lowest index
        best = d;
        arg = j;
      }
    }
    pick[static_cast<size_t>(t)] = arg;
  }
  return pick;
}

std::vector<double> nni(const Segment& seg, const Montage& montage) {
  check_sources(seg);
  auto pick = nni_assignment(montage);
  std::vector<double> out(static_cast<size_t>(kNumTargets) * seg.samples);
  for (int t = 0; t < kNumTargets; ++t) {
    const double* src = seg.source_row(pick[static_cast<size_t>(t)]);
    std::copy(src, src + seg.samples, out.begin() + static_cast<int64_t>(t) * seg.samples);
  }
  return out;
}

Segment as_prediction(const Segment& seg, std::vector<double> targets) {
  Segment out;
  out.subject_id = seg.subject_id;
  out.fs = seg.fs;
  out.samples = seg.samples;
  out.sources = seg.sources;
  out.targets = std::move(targets);
  return out;
}

}  // namespace favc::baselines

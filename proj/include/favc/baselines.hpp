#pragma once

#include <vector>

#include "favc/dataset.hpp"

namespace favc::baselines {

// Spherical-spline interpolation settings (Perrin-style kernel): spline
// order m, truncated Legendre series depth, and a diagonal ridge that keeps
// the clustered four-frontal Gram matrix solvable.
struct SplineParams {
  int m = 4;
  int n_max = 7;
  double ridge = 1e-5;
};

// g(x) = (1/4pi) sum_{n=1..n_max} (2n+1) / (n^m (n+1)^m) P_n(x).
double legendre_g(double x, int m = 4, int n_max = 7);

// Per-sample KKT solve of [[G + ridge*I, 1],[1^T, 0]] [c; c0] = [v; 0],
// then v_hat(t) = c0 + sum_j c_j g(cos theta_{t,j}). The system is factored
// once and applied across all samples.
std::vector<double> spherical_spline(const Segment& seg, const Montage& montage,
                                     const SplineParams& params = {});

// Inverse-distance weighting with 3-D chord distances on the unit sphere.
std::vector<double> idw(const Segment& seg, const Montage& montage,
                        double power = 2.0);
// The normalized weights themselves (13 x 4), for inspection and tests.
std::vector<double> idw_weights(const Montage& montage, double power = 2.0);

// Nearest-neighbor copy; ties broken by source row order.
std::vector<double> nni(const Segment& seg, const Montage& montage);
std::vector<int> nni_assignment(const Montage& montage);

// Shared result layout: 13 x samples row-major target predictions.
Segment as_prediction(const Segment& seg, std::vector<double> targets);

}  // namespace favc::baselines

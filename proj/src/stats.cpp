#include "favc/stats.hpp"

#include <algorithm>
#include <cmath>

#include "favc/common.hpp"

namespace favc::stats {

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  if (a.size() != b.size()) fail_config("wilcoxon: unpaired inputs");
  std::vector<double> diff;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (d != 0.0) diff.push_back(d);
  }
  if (diff.empty()) fail_config("wilcoxon: all differences are zero");
  const int n = static_cast<int>(diff.size());
  if (n < 5) fail_config("wilcoxon: fewer than 5 nonzero pairs");

  // mid-ranks of |d|
  std::vector<int> order(diff.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return std::fabs(diff[static_cast<size_t>(x)]) < std::fabs(diff[static_cast<size_t>(y)]);
  });
  std::vector<double> rank(diff.size(), 0.0);
  std::vector<int> tie_sizes;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() &&
           std::fabs(diff[static_cast<size_t>(order[j])]) ==
               std::fabs(diff[static_cast<size_t>(order[i])]))
      ++j;
    double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) rank[static_cast<size_t>(order[k])] = mid;
    tie_sizes.push_back(static_cast<int>(j - i));
    i = j;
  }

  WilcoxonResult r;
  r.n = n;
  for (size_t i = 0; i < diff.size(); ++i)
    if (diff[i] > 0) r.statistic += rank[i];

  if (n <= 20) {
    // exact permutation distribution over all 2^n sign assignments
    r.exact = true;
    const uint64_t total = 1ULL << n;
    uint64_t le = 0, ge = 0;
    const double w = r.statistic;
    for (uint64_t mask = 0; mask < total; ++mask) {
      double s = 0;
      uint64_t m = mask;
      while (m) {
        int bit = __builtin_ctzll(m);
        s += rank[static_cast<size_t>(bit)];
        m &= m - 1;
      }
      if (s <= w + 1e-12) ++le;
      if (s >= w - 1e-12) ++ge;
    }
    double p = 2.0 * std::min(static_cast<double>(le), static_cast<double>(ge)) /
               static_cast<double>(total);
    r.p_value = std::min(1.0, p);
  } else {
    double mu = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    for (int t : tie_sizes)
      var -= (static_cast<double>(t) * t * t - t) / 48.0;
    double num = r.statistic - mu;
    double cc = num > 0 ? -0.5 : (num < 0 ? 0.5 : 0.0);  // continuity correction
    double z = (num + cc) / std::sqrt(var);
    r.p_value = std::erfc(std::fabs(z) / std::sqrt(2.0));
  }
  return r;
}

}  // namespace favc::stats

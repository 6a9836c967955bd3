#pragma once

#include <vector>

namespace favc::stats {

struct WilcoxonResult {
  double statistic = 0;  // W+ (sum of ranks of positive differences)
  double p_value = 1.0;  // two-sided
  int n = 0;             // pairs after zero-difference removal
  bool exact = false;    // exact enumeration vs normal approximation
};

// Paired two-sided Wilcoxon signed-rank test. Ties are mid-ranked; zero
// differences are removed (all-zero input is an error). n <= 20 uses the
// exact 2^n sign-pattern distribution, larger n the normal approximation
// with continuity and tie corrections.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b);

}  // namespace favc::stats

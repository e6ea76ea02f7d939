#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace bgnlm {

// log(sum(exp(v))) guarded against overflow; -inf for an empty input.
inline double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace bgnlm

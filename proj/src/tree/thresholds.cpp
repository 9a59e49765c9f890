#include <algorithm>
#include <cmath>

#include "tops/analysis.hpp"
#include "tops/error.hpp"
#include "tops/tree.hpp"

namespace tops {

std::vector<double> candidate_thresholds(std::span<const double> values, bool binary, std::size_t k) {
  if (values.empty()) throw Error(ErrorKind::domain, "candidate thresholds need at least one row");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front(), hi = sorted.back();
  if (lo == hi) return {};
  if (binary) return {0.5};

  std::vector<double> cuts;
  for (std::size_t j = 1; j <= k; ++j) {
    const double q = quantile_sorted(sorted, static_cast<double>(j) / static_cast<double>(k + 1));
    // x < q must select at least one row and x >= q must too.
    if (q > lo && q <= hi) cuts.push_back(q);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

}  // namespace tops

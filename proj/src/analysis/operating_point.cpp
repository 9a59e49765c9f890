#include <algorithm>
#include <cmath>
#include <limits>

#include "tops/analysis.hpp"
#include "tops/error.hpp"

namespace tops {

OperatingPoint counts_at_operating_point(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                         FixedRate fixed, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::domain, "operating-point level must be in (0, 1)");
  const SortedScores sorted = SortedScores::from(scores, labels);
  const std::size_t P = sorted.positives, N = sorted.size() - sorted.positives;
  if (P == 0 || N == 0) throw Error(ErrorKind::domain, "operating point needs both classes present");

  auto make = [&](double threshold, std::size_t tp, std::size_t fp) {
    OperatingPoint op;
    op.threshold = threshold;
    op.tp = tp;
    op.fp = fp;
    op.fn = P - tp;
    op.tn = N - fp;
    op.sensitivity = static_cast<double>(tp) / static_cast<double>(P);
    op.specificity = static_cast<double>(op.tn) / static_cast<double>(N);
    return op;
  };

  // Candidates in decreasing threshold order: +inf, then each distinct score.
  std::vector<OperatingPoint> candidates{make(std::numeric_limits<double>::infinity(), 0, 0)};
  std::size_t tp = 0, fp = 0, i = sorted.size();
  while (i > 0) {
    const double s = sorted.items[i - 1].first;
    while (i > 0 && sorted.items[i - 1].first == s) {
      (sorted.items[i - 1].second ? tp : fp) += 1;
      --i;
    }
    candidates.push_back(make(s, tp, fp));
  }

  if (fixed == FixedRate::specificity) {
    // Specificity falls as the threshold drops; the last qualifying
    // candidate has the smallest specificity >= level and the best sensitivity.
    const OperatingPoint* best = nullptr;
    for (const auto& c : candidates)
      if (c.specificity >= level) best = &c;
    return *best;  // +inf always qualifies
  }
  for (const auto& c : candidates)
    if (c.sensitivity >= level) return c;
  return candidates.back();
}

}  // namespace tops

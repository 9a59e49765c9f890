#include <algorithm>
#include <cmath>
#include <numeric>

#include "tops/analysis.hpp"
#include "tops/error.hpp"
#include "tops/rng.hpp"

namespace tops {
namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorKind::domain, "scores and labels differ in length");
  for (double s : scores)
    if (std::isnan(s)) throw Error(ErrorKind::domain, "score is NaN");
}

}  // namespace

SortedScores SortedScores::from(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  SortedScores out;
  out.items.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.items.emplace_back(scores[i], labels[i] ? 1 : 0);
    out.positives += labels[i] ? 1 : 0;
  }
  std::sort(out.items.begin(), out.items.end());
  return out;
}

std::optional<double> auc_of_union(const SortedScores& a, const SortedScores& b) {
  const std::uint64_t pos = a.positives + b.positives;
  const std::uint64_t neg = a.size() + b.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  // Walk the merged ascending sequence by tied groups; twice the
  // Mann-Whitney U stays an exact integer.
  std::uint64_t two_u = 0, neg_below = 0;
  std::size_t i = 0, j = 0;
  const auto& x = a.items;
  const auto& y = b.items;
  while (i < x.size() || j < y.size()) {
    double s;
    if (j == y.size() || (i < x.size() && x[i].first <= y[j].first)) s = x[i].first;
    else s = y[j].first;
    std::uint64_t gp = 0, gn = 0;
    while (i < x.size() && x[i].first == s) {
      (x[i].second ? gp : gn) += 1;
      ++i;
    }
    while (j < y.size() && y[j].first == s) {
      (y[j].second ? gp : gn) += 1;
      ++j;
    }
    two_u += 2 * gp * neg_below + gp * gn;
    neg_below += gn;
  }
  return static_cast<double>(two_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const SortedScores sorted = SortedScores::from(scores, labels);
  static const SortedScores empty;
  auto v = auc_of_union(sorted, empty);
  if (!v) throw Error(ErrorKind::domain, "AUC needs both classes present");
  return *v;
}

RocSummary roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const SortedScores sorted = SortedScores::from(scores, labels);
  RocSummary out;
  out.n_pos = sorted.positives;
  out.n_neg = sorted.size() - sorted.positives;
  if (out.n_pos == 0 || out.n_neg == 0) throw Error(ErrorKind::domain, "ROC needs both classes present");
  const double P = static_cast<double>(out.n_pos), N = static_cast<double>(out.n_neg);

  // vertices in integer (fp, tp) counts; collinear runs collapse to their ends
  std::vector<std::array<long long, 2>> corners{{0, 0}};
  long long tp = 0, fp = 0;
  std::size_t i = sorted.size();
  while (i > 0) {
    const double s = sorted.items[i - 1].first;
    while (i > 0 && sorted.items[i - 1].first == s) {
      (sorted.items[i - 1].second ? tp : fp) += 1;
      --i;
    }
    if (corners.size() >= 2) {
      const auto& a = corners[corners.size() - 2];
      const auto& b = corners.back();
      if ((b[0] - a[0]) * (tp - b[1]) == (b[1] - a[1]) * (fp - b[0])) corners.pop_back();
    }
    corners.push_back({fp, tp});
  }
  for (const auto& c : corners)
    out.points.push_back({static_cast<double>(c[0]) / N, static_cast<double>(c[1]) / P});
  out.auc = *auc_of_union(sorted, SortedScores{});
  return out;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  return area;
}

std::vector<double> bootstrap_aucs(std::span<const double> scores, std::span<const std::uint8_t> labels, int reps,
                                   std::uint64_t seed) {
  check_inputs(scores, labels);
  if (reps < 100) throw Error(ErrorKind::domain, "bootstrap needs at least 100 replicates");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (auto l : labels) pos += l ? 1 : 0;
  if (pos == 0 || pos == n) throw Error(ErrorKind::domain, "bootstrap needs both classes present");

  constexpr int kMaxRetries = 1000;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(reps));
  std::vector<double> s(n);
  std::vector<std::uint8_t> l(n);
  for (int r = 0; r < reps; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    bool done = false;
    for (int attempt = 0; attempt < kMaxRetries && !done; ++attempt) {
      std::size_t p = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = rng.below(n);
        s[i] = scores[k];
        l[i] = labels[k];
        p += l[i] ? 1 : 0;
      }
      if (p == 0 || p == n) continue;  // single-class resample: redraw
      out.push_back(auc(s, l));
      done = true;
    }
    if (!done) throw NumericError("bootstrap could not draw a two-class resample");
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::domain, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> auc_ci_bootstrap(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                           int reps, double level, std::uint64_t seed) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::domain, "confidence level must be in (0, 1)");
  auto aucs = bootstrap_aucs(scores, labels, reps, seed);
  std::sort(aucs.begin(), aucs.end());
  const double alpha = (1.0 - level) / 2.0;
  return {quantile_sorted(aucs, alpha), quantile_sorted(aucs, 1.0 - alpha)};
}

double loss_reduction(double auc_ours, double auc_other) {
  if (!(auc_ours > 0.0 && auc_ours <= 1.0) || !(auc_other > 0.0 && auc_other <= 1.0))
    throw Error(ErrorKind::domain, "AUC values must lie in (0, 1]");
  if (auc_other == 1.0) throw Error(ErrorKind::domain, "loss reduction undefined when the reference AUC is 1");
  const double loss_other = 1.0 - auc_other;
  const double loss_ours = 1.0 - auc_ours;
  return 100.0 * (loss_other - loss_ours) / loss_other;
}

}  // namespace tops

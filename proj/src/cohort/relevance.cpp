#include <algorithm>
#include <cmath>

#include "tops/cohort.hpp"
#include "tops/error.hpp"

namespace tops {

double abs_correlation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::min(1.0, std::abs(sab) / std::sqrt(saa * sbb));
}

double cfs_merit(std::span<const std::size_t> subset, std::span<const double> r_cf, const Matrix& r_ff) {
  const std::size_t k = subset.size();
  if (k == 0) return 0.0;
  double cf = 0.0;
  for (auto i : subset) cf += r_cf[i];
  cf /= static_cast<double>(k);
  double ff = 0.0;
  if (k > 1) {
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) ff += r_ff(subset[a], subset[b]);
    ff /= static_cast<double>(k * (k - 1) / 2);
  }
  const double kd = static_cast<double>(k);
  return kd * cf / std::sqrt(kd + kd * (kd - 1.0) * ff);
}

RelevanceReport relevance_scores(const LabeledSet& data, const Schema& schema) {
  const auto rows = data.included();
  const auto counts = data.class_counts();
  if (rows.size() < 2) throw Error(ErrorKind::domain, "relevance needs at least 2 labeled rows");
  if (counts[0] == 0 || counts[1] == 0) throw Error(ErrorKind::domain, "relevance needs both labels present");

  const std::size_t w = data.features.cols();
  std::vector<std::vector<double>> columns(w, std::vector<double>(rows.size()));
  std::vector<double> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y[i] = data.label[rows[i]];
    for (std::size_t c = 0; c < w; ++c) columns[c][i] = data.features(rows[i], c);
  }

  std::vector<double> r_cf(w);
  for (std::size_t c = 0; c < w; ++c) r_cf[c] = abs_correlation(columns[c], y);
  Matrix r_ff(w, w, 0.0);
  for (std::size_t a = 0; a < w; ++a)
    for (std::size_t b = a + 1; b < w; ++b) r_ff(a, b) = r_ff(b, a) = abs_correlation(columns[a], columns[b]);

  RelevanceReport report;
  const double top = w ? *std::max_element(r_cf.begin(), r_cf.end()) : 0.0;
  for (std::size_t c = 0; c < w; ++c)
    report.scores.emplace_back(schema.columns()[c].name, top > 0.0 ? r_cf[c] / top : 0.0);

  std::vector<std::size_t> chosen;
  std::vector<bool> used(w, false);
  double merit = 0.0;
  while (chosen.size() < w) {
    double best = -1.0;
    std::size_t best_c = w;
    for (std::size_t c = 0; c < w; ++c) {
      if (used[c]) continue;
      chosen.push_back(c);
      const double m = cfs_merit(chosen, r_cf, r_ff);
      chosen.pop_back();
      if (m > best) {
        best = m;
        best_c = c;
      }
    }
    if (best_c == w || best <= merit) break;
    chosen.push_back(best_c);
    used[best_c] = true;
    merit = best;
  }
  for (auto c : chosen) report.selected.push_back(schema.columns()[c].name);
  report.merit = merit;
  return report;
}

}  // namespace tops

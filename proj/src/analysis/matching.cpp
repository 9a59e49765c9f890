#include <cmath>
#include <limits>

#include "tops/analysis.hpp"
#include "tops/error.hpp"
#include "tops/learners.hpp"
#include "tops/rng.hpp"

namespace tops {

MatchResult greedy_match(std::span<const double> logits, std::span<const std::uint8_t> treated, double caliper_sd,
                         std::uint64_t seed) {
  if (logits.size() != treated.size()) throw Error(ErrorKind::domain, "logits and treatment flags differ in length");
  if (!(caliper_sd >= 0.0)) throw Error(ErrorKind::domain, "caliper_sd must be >= 0");
  std::vector<std::size_t> t_rows, c_rows;
  for (std::size_t i = 0; i < treated.size(); ++i) (treated[i] ? t_rows : c_rows).push_back(i);
  if (t_rows.empty() || c_rows.empty()) throw Error(ErrorKind::domain, "matching needs treated and control rows");

  const double n = static_cast<double>(logits.size());
  double mean = 0.0;
  for (double v : logits) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : logits) ss += (v - mean) * (v - mean);
  const double sd = logits.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;

  MatchResult out;
  out.caliper = caliper_sd * sd;
  out.logits.assign(logits.begin(), logits.end());

  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(t_rows));
  std::vector<bool> used(c_rows.size(), false);
  for (auto t : t_rows) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = c_rows.size();
    for (std::size_t k = 0; k < c_rows.size(); ++k) {
      if (used[k]) continue;
      const double d = std::abs(logits[t] - logits[c_rows[k]]);
      if (d < best) {
        best = d;
        best_k = k;
      }
    }
    if (best_k < c_rows.size() && best <= out.caliper) {
      used[best_k] = true;
      out.pairs.emplace_back(t, c_rows[best_k]);
    } else {
      ++out.unmatched_treated;
    }
  }
  return out;
}

MatchResult propensity_match(const Cohort& cohort, std::size_t treated_column,
                             std::span<const std::size_t> covariate_columns, double caliper_sd, std::uint64_t seed) {
  const std::size_t w = cohort.schema.width();
  if (treated_column >= w) throw Error(ErrorKind::domain, "treated column out of range");
  std::vector<std::uint8_t> treated(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const double v = cohort.features(i, treated_column);
    if (v != 0.0 && v != 1.0) throw Error(ErrorKind::domain, "treatment column must be binary with no missing cells");
    treated[i] = v == 1.0 ? 1 : 0;
  }
  Matrix x(cohort.size(), covariate_columns.size());
  for (std::size_t i = 0; i < cohort.size(); ++i)
    for (std::size_t j = 0; j < covariate_columns.size(); ++j) {
      if (covariate_columns[j] >= w || covariate_columns[j] == treated_column)
        throw Error(ErrorKind::domain, "invalid covariate column");
      x(i, j) = cohort.features(i, covariate_columns[j]);
    }
  const Predictor model = fit_logistic(x, treated, FitOptions{});
  std::vector<double> logits(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    double eta = model.intercept();
    for (std::size_t j = 0; j < covariate_columns.size(); ++j) eta += model.coefficients[j] * x(i, j);
    logits[i] = eta;
  }
  return greedy_match(logits, treated, caliper_sd, seed);
}

}  // namespace tops

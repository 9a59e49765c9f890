#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tops/cohort.hpp"

namespace tops {

/// Mann-Whitney AUC: (concordant + tied/2) / (n_pos * n_neg). Label 1 is
/// the positive class. Throws when either class is absent.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Scores with labels, sorted ascending by score. Lets callers compute the
/// AUC of a union of disjoint scored groups by merging.
struct SortedScores {
  std::vector<std::pair<double, std::uint8_t>> items;
  std::size_t positives = 0;

  static SortedScores from(std::span<const double> scores, std::span<const std::uint8_t> labels);
  std::size_t size() const noexcept { return items.size(); }
};

/// AUC of the pooled scores of `a` and `b`; nullopt when a class is absent.
std::optional<double> auc_of_union(const SortedScores& a, const SortedScores& b);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocSummary {
  std::vector<RocPoint> points;
  double auc = 0.0;
  std::optional<std::pair<double, double>> ci;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

RocSummary roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);
double trapezoid_area(std::span<const RocPoint> points);

/// Percentile bootstrap over row resamples. Replicate r draws from a seed
/// derived from (seed, r), so results do not depend on evaluation order.
std::pair<double, double> auc_ci_bootstrap(std::span<const double> scores,
                                           std::span<const std::uint8_t> labels, int reps, double level,
                                           std::uint64_t seed);

/// Replicate AUCs in replicate order (exposed for interval checks).
std::vector<double> bootstrap_aucs(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                   int reps, std::uint64_t seed);

/// Type-7 quantile (linear interpolation between order statistics) of a sorted sample.
double quantile_sorted(std::span<const double> sorted, double p);

/// Percent reduction of predictive loss (1 - AUC) of `auc_ours` relative to `auc_other`.
double loss_reduction(double auc_ours, double auc_other);

enum class FixedRate { specificity, sensitivity };

struct OperatingPoint {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double threshold = 0.0;  // predicted positive iff score >= threshold; +inf predicts none
  double specificity = 0.0;
  double sensitivity = 0.0;
};

/// Threshold with the smallest specificity (resp. sensitivity) that is
/// still >= level; ties on the fixed rate go to the better other rate.
OperatingPoint counts_at_operating_point(std::span<const double> scores,
                                         std::span<const std::uint8_t> labels, FixedRate fixed,
                                         double level);

/// Right-continuous step survival function.
struct StepCurve {
  std::vector<double> times;     // ascending; times[0] = 0
  std::vector<double> survival;  // survival[i] holds on [times[i], times[i+1])

  double at(double t) const;
};

StepCurve kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> events);

/// Monotone piecewise-linear survival curve through (0, 1) and repaired anchors.
class SurvivalCurve {
 public:
  SurvivalCurve(std::vector<double> knots_t, std::vector<double> knots_s);

  const std::vector<double>& knot_times() const noexcept { return t_; }
  const std::vector<double>& knot_values() const noexcept { return s_; }
  double max_horizon() const noexcept { return t_.back(); }

  /// Holds the last value beyond the last anchor.
  double at(double t) const;
  /// `points` evenly spaced samples on [0, max_horizon] merged with the knots.
  std::vector<std::pair<double, double>> sample(std::size_t points) const;

 private:
  std::vector<double> t_;
  std::vector<double> s_;
};

SurvivalCurve individual_curve(std::span<const double> probs_at_horizons, std::span<const double> horizons);

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (treated row, control row)
  double caliper = 0.0;
  std::size_t unmatched_treated = 0;
  std::vector<double> logits;  // propensity logit per row
};

/// Greedy 1:1 nearest-neighbour matching without replacement on the
/// propensity logit. Treated rows are visited in a seeded random order;
/// distance ties go to the lower control row.
MatchResult propensity_match(const Cohort& cohort, std::size_t treated_column,
                             std::span<const std::size_t> covariate_columns, double caliper_sd,
                             std::uint64_t seed);

/// Matching step alone, given precomputed logits.
MatchResult greedy_match(std::span<const double> logits, std::span<const std::uint8_t> treated,
                         double caliper_sd, std::uint64_t seed);

}  // namespace tops

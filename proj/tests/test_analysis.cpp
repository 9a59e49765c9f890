#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "tops/analysis.hpp"
#include "tops/error.hpp"
#include "tops/rng.hpp"

using namespace tops;

namespace {

double pair_count_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        if (s[i] > s[j]) num += 1.0;
        else if (s[i] == s[j]) num += 0.5;
      }
  return num / pairs;
}

struct Instance {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

Instance random_instance(std::uint64_t seed, std::size_t n, int levels) {
  Rng rng(seed);
  Instance in;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint8_t y = rng.uniform() < 0.4 ? 1 : 0;
    double s = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) + (y ? 1.5 : 0.0);
    in.scores.push_back(s / levels);
    in.labels.push_back(y);
  }
  in.labels[0] = 1;
  in.labels[1] = 0;
  return in;
}

}  // namespace

TEST(Auc, PerfectSeparation) {
  std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  std::vector<std::uint8_t> y{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auc(s, y), 1.0);
}

TEST(Auc, AllTiedIsHalf) {
  std::vector<double> s(6, 0.3);
  std::vector<std::uint8_t> y{1, 0, 1, 0, 0, 1};
  EXPECT_DOUBLE_EQ(auc(s, y), 0.5);
}

TEST(Auc, MixedExample) {
  std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  std::vector<std::uint8_t> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auc(s, y), 0.75);
  EXPECT_DOUBLE_EQ(pair_count_auc(s, y), 0.75);
}

TEST(Auc, SingleClassThrows) {
  std::vector<double> s{0.1, 0.2};
  std::vector<std::uint8_t> y{1, 1};
  EXPECT_THROW(auc(s, y), Error);
}

TEST(Auc, MatchesPairCountingWithTies) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto in = random_instance(seed, 20 + seed * 5, 1 + static_cast<int>(seed % 7));
    EXPECT_NEAR(auc(in.scores, in.labels), pair_count_auc(in.scores, in.labels), 1e-12) << seed;
  }
}

TEST(Auc, UnionOfGroupsEqualsPooled) {
  auto a = random_instance(3, 40, 5), b = random_instance(4, 30, 3);
  auto pooled = a;
  pooled.scores.insert(pooled.scores.end(), b.scores.begin(), b.scores.end());
  pooled.labels.insert(pooled.labels.end(), b.labels.begin(), b.labels.end());
  auto u = auc_of_union(SortedScores::from(a.scores, a.labels), SortedScores::from(b.scores, b.labels));
  ASSERT_TRUE(u);
  EXPECT_NEAR(*u, pair_count_auc(pooled.scores, pooled.labels), 1e-12);
}

TEST(Auc, UnionSingleClassIsEmpty) {
  std::vector<double> s{0.1, 0.2};
  std::vector<std::uint8_t> y{0, 0};
  EXPECT_FALSE(auc_of_union(SortedScores::from(s, y), SortedScores::from(s, y)));
}

TEST(Roc, PerfectSeparationPoints) {
  std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  std::vector<std::uint8_t> y{1, 1, 0, 0};
  auto roc = roc_curve(s, y);
  ASSERT_EQ(roc.points.size(), 3u);
  EXPECT_EQ(roc.points[0].fpr, 0.0);
  EXPECT_EQ(roc.points[0].tpr, 0.0);
  EXPECT_EQ(roc.points[1].fpr, 0.0);
  EXPECT_EQ(roc.points[1].tpr, 1.0);
  EXPECT_EQ(roc.points[2].fpr, 1.0);
  EXPECT_EQ(roc.points[2].tpr, 1.0);
}

TEST(Roc, AllTiedIsDiagonal) {
  std::vector<double> s(5, 0.4);
  std::vector<std::uint8_t> y{1, 0, 0, 1, 0};
  auto roc = roc_curve(s, y);
  ASSERT_EQ(roc.points.size(), 2u);
  EXPECT_DOUBLE_EQ(trapezoid_area(roc.points), 0.5);
}

TEST(Roc, TrapezoidAreaMatchesPairCount) {
  auto in = random_instance(99, 200, 9);
  auto roc = roc_curve(in.scores, in.labels);
  EXPECT_NEAR(trapezoid_area(roc.points), pair_count_auc(in.scores, in.labels), 1e-12);
  EXPECT_NEAR(roc.auc, pair_count_auc(in.scores, in.labels), 1e-12);
}

TEST(Bootstrap, PerfectSeparationUpperIsOne) {
  std::vector<double> s;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 200; ++i) {
    s.push_back(i);
    y.push_back(i >= 100 ? 1 : 0);
  }
  auto [lo, hi] = auc_ci_bootstrap(s, y, 200, 0.95, 5);
  EXPECT_EQ(hi, 1.0);
  EXPECT_EQ(lo, 1.0);
}

TEST(Bootstrap, ReproducibleAndNested) {
  auto in = random_instance(17, 150, 10);
  auto a = auc_ci_bootstrap(in.scores, in.labels, 500, 0.95, 123);
  auto b = auc_ci_bootstrap(in.scores, in.labels, 500, 0.95, 123);
  EXPECT_EQ(a, b);
  auto narrow = auc_ci_bootstrap(in.scores, in.labels, 500, 0.90, 123);
  EXPECT_LE(a.first, narrow.first);
  EXPECT_GE(a.second, narrow.second);
  double point = auc(in.scores, in.labels);
  EXPECT_LT(a.first, point);
  EXPECT_GT(a.second, point);
}

TEST(Bootstrap, ReplicatesAreOrderIndependent) {
  auto in = random_instance(21, 80, 6);
  auto r1 = bootstrap_aucs(in.scores, in.labels, 100, 9);
  auto r2 = bootstrap_aucs(in.scores, in.labels, 200, 9);
  ASSERT_EQ(r1.size(), 100u);
  for (std::size_t i = 0; i < r1.size(); ++i) EXPECT_EQ(r1[i], r2[i]);
}

TEST(Bootstrap, RejectsTooFewReplicates) {
  auto in = random_instance(1, 30, 4);
  EXPECT_THROW(auc_ci_bootstrap(in.scores, in.labels, 50, 0.95, 1), Error);
}

TEST(Quantile, TypeSevenInterpolates) {
  std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 1.75);
}

TEST(LossReduction, PublishedRows) {
  EXPECT_NEAR(loss_reduction(0.847, 0.630), 58.6, 0.05);
  EXPECT_NEAR(loss_reduction(0.847, 0.618), 59.9, 0.05);
  EXPECT_NEAR(loss_reduction(0.847, 0.716), 46.0, 0.2);
  EXPECT_DOUBLE_EQ(loss_reduction(0.7, 0.7), 0.0);
}

TEST(OperatingPoint, PerfectScores) {
  std::vector<double> s{0.9, 0.8, 0.7, 0.3, 0.2, 0.1};
  std::vector<std::uint8_t> y{1, 1, 1, 0, 0, 0};
  auto op = counts_at_operating_point(s, y, FixedRate::specificity, 0.8);
  EXPECT_EQ(op.tp, 3u);
  EXPECT_EQ(op.fp, 0u);
}

TEST(OperatingPoint, AllTiedPicksSpecificityOne) {
  std::vector<double> s(6, 0.5);
  std::vector<std::uint8_t> y{1, 0, 1, 0, 1, 0};
  auto op = counts_at_operating_point(s, y, FixedRate::specificity, 0.8);
  EXPECT_EQ(op.specificity, 1.0);
  EXPECT_EQ(op.tp, 0u);
  EXPECT_TRUE(std::isinf(op.threshold));
}

TEST(OperatingPoint, MatchesExhaustiveSweep) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto in = random_instance(seed + 500, 120, 12);
    std::vector<double> cands{std::numeric_limits<double>::infinity()};
    cands.insert(cands.end(), in.scores.begin(), in.scores.end());
    for (FixedRate mode : {FixedRate::specificity, FixedRate::sensitivity}) {
      double best_fixed = 2.0, best_other = -1.0;
      std::size_t tp_best = 0, fp_best = 0;
      for (double t : cands) {
        std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < in.scores.size(); ++i) {
          bool pos = in.scores[i] >= t;
          if (in.labels[i]) (pos ? tp : fn)++;
          else (pos ? fp : tn)++;
        }
        double spec = static_cast<double>(tn) / static_cast<double>(tn + fp);
        double sens = static_cast<double>(tp) / static_cast<double>(tp + fn);
        double fixed = mode == FixedRate::specificity ? spec : sens;
        double other = mode == FixedRate::specificity ? sens : spec;
        if (fixed < 0.8) continue;
        if (fixed < best_fixed || (fixed == best_fixed && other > best_other)) {
          best_fixed = fixed;
          best_other = other;
          tp_best = tp;
          fp_best = fp;
        }
      }
      auto op = counts_at_operating_point(in.scores, in.labels, mode, 0.8);
      EXPECT_EQ(op.tp, tp_best) << seed;
      EXPECT_EQ(op.fp, fp_best) << seed;
      EXPECT_EQ(op.tp + op.fn + op.tn + op.fp, in.scores.size());
    }
  }
}

TEST(KaplanMeier, AllCensoredStaysAtOne) {
  std::vector<double> t{1, 2, 3};
  std::vector<std::uint8_t> e{0, 0, 0};
  auto km = kaplan_meier(t, e);
  for (double q : {0.0, 0.5, 1.0, 2.5, 10.0}) EXPECT_EQ(km.at(q), 1.0);
}

TEST(KaplanMeier, AllEvents) {
  std::vector<double> t{1, 2, 3};
  std::vector<std::uint8_t> e{1, 1, 1};
  auto km = kaplan_meier(t, e);
  EXPECT_EQ(km.at(0.5), 1.0);
  EXPECT_DOUBLE_EQ(km.at(1.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(km.at(1.9), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(km.at(2.0), 1.0 / 3.0);
  EXPECT_EQ(km.at(3.0), 0.0);
  EXPECT_EQ(km.at(50.0), 0.0);
}

TEST(KaplanMeier, MiddleCensored) {
  std::vector<double> t{1, 2, 3};
  std::vector<std::uint8_t> e{1, 0, 1};
  auto km = kaplan_meier(t, e);
  EXPECT_DOUBLE_EQ(km.at(1.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(km.at(2.5), 2.0 / 3.0);
  EXPECT_EQ(km.at(3.0), 0.0);
}

TEST(KaplanMeier, NoCensoringIsEmpirical) {
  Rng rng(4);
  std::vector<double> t(50);
  for (auto& v : t) v = std::floor(rng.uniform(0, 20));
  std::vector<std::uint8_t> e(50, 1);
  auto km = kaplan_meier(t, e);
  for (double q = 0; q < 22; q += 0.5) {
    double surv = static_cast<double>(std::count_if(t.begin(), t.end(), [&](double v) { return v > q; })) / 50.0;
    EXPECT_NEAR(km.at(q), surv, 1e-12) << q;
  }
}

TEST(IndividualCurve, PassesThroughAnchors) {
  std::vector<double> p{0.9, 0.8, 0.6, 0.3};
  std::vector<double> h{90, 365, 1095, 3650};
  auto c = individual_curve(p, h);
  EXPECT_EQ(c.at(0.0), 1.0);
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_DOUBLE_EQ(c.at(h[i]), p[i]);
  EXPECT_DOUBLE_EQ(c.at(227.5), 0.85);
  EXPECT_DOUBLE_EQ(c.at(10000.0), 0.3);
}

TEST(IndividualCurve, RepairsIncreasingAnchors) {
  std::vector<double> p{0.8, 0.85, 0.6};
  std::vector<double> h{90, 365, 1095};
  auto c = individual_curve(p, h);
  EXPECT_DOUBLE_EQ(c.at(365), 0.8);
  auto samples = c.sample(40);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    EXPECT_GE(samples[i].first, samples[i - 1].first);
    EXPECT_LE(samples[i].second, samples[i - 1].second);
  }
  EXPECT_EQ(samples.front().first, 0.0);
  EXPECT_EQ(samples.front().second, 1.0);
}

TEST(Matching, IdenticalCovariatesMatchAtZero) {
  std::vector<double> logits{0.1, 0.1, -0.4, -0.4, 0.7, 0.7};
  std::vector<std::uint8_t> treated{1, 0, 1, 0, 1, 0};
  auto m = greedy_match(logits, treated, 0.0, 3);
  EXPECT_EQ(m.pairs.size(), 3u);
  EXPECT_EQ(m.unmatched_treated, 0u);
  for (auto [t, c] : m.pairs) EXPECT_EQ(logits[t], logits[c]);
}

TEST(Matching, ZeroCaliperOnlyExact) {
  std::vector<double> logits{0.1, 0.2, 0.3, 0.3};
  std::vector<std::uint8_t> treated{1, 0, 1, 0};
  auto m = greedy_match(logits, treated, 0.0, 1);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0], (std::pair<std::size_t, std::size_t>{2, 3}));
  EXPECT_EQ(m.unmatched_treated, 1u);
}

TEST(Matching, GreedyReplayOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 40);
    std::vector<double> logits(20);
    std::vector<std::uint8_t> treated(20);
    for (std::size_t i = 0; i < 20; ++i) {
      logits[i] = std::round(rng.normal() * 4.0) / 4.0;
      treated[i] = rng.uniform() < 0.35 ? 1 : 0;
    }
    treated[0] = 1;
    treated[1] = 0;
    auto m = greedy_match(logits, treated, 0.5, seed);

    std::vector<std::size_t> order, controls;
    for (std::size_t i = 0; i < 20; ++i) (treated[i] ? order : controls).push_back(i);
    Rng replay(seed);
    replay.shuffle(std::span<std::size_t>(order));
    double mean = std::accumulate(logits.begin(), logits.end(), 0.0) / 20.0, ss = 0.0;
    for (double v : logits) ss += (v - mean) * (v - mean);
    const double caliper = 0.5 * std::sqrt(ss / 19.0);
    EXPECT_NEAR(m.caliper, caliper, 1e-12);

    std::vector<std::pair<std::size_t, std::size_t>> expected;
    std::vector<bool> taken(20, false);
    for (std::size_t t : order) {
      std::vector<std::pair<double, std::size_t>> cand;
      for (std::size_t c : controls)
        if (!taken[c]) cand.emplace_back(std::abs(logits[t] - logits[c]), c);
      std::sort(cand.begin(), cand.end());
      if (!cand.empty() && cand[0].first <= caliper) {
        taken[cand[0].second] = true;
        expected.emplace_back(t, cand[0].second);
      }
    }
    EXPECT_EQ(m.pairs, expected) << seed;
    EXPECT_EQ(m.unmatched_treated, order.size() - expected.size());
  }
}

TEST(Matching, PropensityOnCohortUsesEachControlOnce) {
  Schema schema({{"treated", FeatureKind::binary, {}}, {"age", FeatureKind::continuous, {}}});
  Cohort c{schema, Matrix(0, 2), {}, {}};
  Rng rng(8);
  for (int i = 0; i < 120; ++i) {
    double age = rng.normal();
    double t = rng.uniform() < 1.0 / (1.0 + std::exp(-age)) ? 1.0 : 0.0;
    c.add({{t, age}, 1.0, false});
  }
  std::vector<std::size_t> cov{1};
  auto m = propensity_match(c, 0, cov, 0.2, 5);
  std::vector<std::size_t> used;
  for (auto [t, ctl] : m.pairs) {
    EXPECT_EQ(c.features(t, 0), 1.0);
    EXPECT_EQ(c.features(ctl, 0), 0.0);
    EXPECT_LE(std::abs(m.logits[t] - m.logits[ctl]), m.caliper);
    used.push_back(ctl);
  }
  std::sort(used.begin(), used.end());
  EXPECT_EQ(std::adjacent_find(used.begin(), used.end()), used.end());
}

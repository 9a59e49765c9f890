#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <limits>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tops/analysis.hpp"
#include "tops/error.hpp"
#include "tops/tree.hpp"

using namespace tops;
using test::iota;

namespace {

double pair_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / pairs;
}

// Two regimes split on column 0 at `tau`: opposite signs on column 1.
LabeledSet planted(std::uint64_t seed, std::size_t n, double tau, std::size_t width = 3) {
  Rng rng(seed);
  Matrix x(n, width);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < width; ++c) x(i, c) = rng.normal();
    const double sign = x(i, 0) < tau ? 1.0 : -1.0;
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-4.0 * sign * x(i, 1))) ? 1 : 0;
  }
  return test::labeled_from(x, y);
}

TreeOfPredictors hand_tree(double root_out, double below_out, double above_out, std::vector<double> w_below) {
  Schema schema({{"x", FeatureKind::continuous, {}}});
  TreeOfPredictors t;
  t.schema = schema;
  t.schema_fingerprint = schema.fingerprint();
  t.horizon = 90;
  auto constant = [](double v, int node) { return Predictor{LearnerKind::linear, {0.0, v}, std::nullopt, 90, node}; };
  Node root{0, -1, {}, constant(root_out, 0), Node::Children{0, 0.0, 1, 2}, 0};
  Node below{1, 0, {{0, 0.0, Side::below}}, constant(below_out, 1), std::nullopt, 1};
  Node above{2, 0, {{0, 0.0, Side::at_or_above}}, constant(above_out, 0), std::nullopt, 0};
  t.nodes = {root, below, above};
  t.path_weights[1] = std::move(w_below);
  t.path_weights[2] = {0.5, 0.5};
  t.fill_values = {0.0};
  t.column_ranges = {{-1.0, 1.0}};
  return t;
}

double sse(const Matrix& a, std::span<const double> y, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double p = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) p += a(r, c) * w[c];
    s += (y[r] - p) * (y[r] - p);
  }
  return s;
}

}  // namespace

TEST(Thresholds, BinaryConstantAndQuartiles) {
  std::vector<double> b{0, 1, 1, 0};
  EXPECT_EQ(candidate_thresholds(b, true, 9), (std::vector<double>{0.5}));
  std::vector<double> c(5, 2.0);
  EXPECT_TRUE(candidate_thresholds(c, false, 9).empty());
  std::vector<double> v{10, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto cuts = candidate_thresholds(v, false, 3);
  ASSERT_EQ(cuts.size(), 3u);
  EXPECT_DOUBLE_EQ(cuts[0], 3.25);
  EXPECT_DOUBLE_EQ(cuts[1], 5.5);
  EXPECT_DOUBLE_EQ(cuts[2], 7.75);
}

TEST(Thresholds, EveryCutLeavesBothSidesNonempty) {
  std::vector<double> v{1, 1, 1, 1, 1, 1, 1, 1, 2, 9};
  for (double t : candidate_thresholds(v, false, 9)) {
    EXPECT_GT(std::count_if(v.begin(), v.end(), [&](double x) { return x < t; }), 0);
    EXPECT_GT(std::count_if(v.begin(), v.end(), [&](double x) { return x >= t; }), 0);
  }
}

TEST(BestSplit, SingleClassValidationGivesNone) {
  auto S = planted(1, 200, 0.0);
  auto V1 = planted(2, 100, 0.0);
  for (auto& l : V1.label) l = 1;
  GrowthConfig cfg;
  cfg.min_leaf = 10;
  auto tree = grow(S, V1, cfg);
  EXPECT_EQ(tree.nodes.size(), 1u);
  std::vector<NodeRows> rows{{iota(S.size()), V1.included()}};
  FitCache cache;
  EXPECT_FALSE(best_split(tree, 0, rows, S, V1, cfg, cache));
}

TEST(BestSplit, MinLeafGuard) {
  GrowthConfig cfg;
  cfg.min_leaf = 25;
  auto S = planted(3, 2 * cfg.min_leaf - 1, 0.0);
  auto V1 = planted(4, 200, 0.0);
  auto tree = grow(S, V1, cfg);
  EXPECT_EQ(tree.nodes.size(), 1u);
  std::vector<NodeRows> rows{{iota(S.size()), V1.included()}};
  FitCache cache;
  EXPECT_FALSE(best_split(tree, 0, rows, S, V1, cfg, cache));
}

TEST(BestSplit, MatchesBruteForceEnumeration) {
  auto S = planted(5, 400, 0.3);
  auto V1 = planted(6, 300, 0.3);
  GrowthConfig cfg;
  cfg.min_leaf = 20;
  cfg.thresholds_per_feature = 5;
  cfg.min_gain = 1.0;  // root only
  auto tree = grow(S, V1, cfg);
  ASSERT_EQ(tree.nodes.size(), 1u);
  std::vector<NodeRows> rows{{iota(S.size()), V1.included()}};
  FitCache cache;
  auto got = best_split(tree, 0, rows, S, V1, cfg, cache);
  ASSERT_TRUE(got);

  // Oracle: every (feature, cut, kind/ancestor per side), pooled pair-count AUC.
  const auto val = V1.included();
  std::vector<std::uint8_t> vy;
  for (auto r : val) vy.push_back(static_cast<std::uint8_t>(V1.label[r]));
  std::vector<Predictor> root_fits;
  for (auto kind : kAllLearners) root_fits.push_back(fit_kind(kind, S, iota(S.size()), cfg.learner));

  double best = 2.0;
  std::size_t best_f = 0;
  double best_t = 0.0;
  int best_below = -1, best_above = -1;
  for (std::size_t f = 0; f < S.features.cols(); ++f) {
    std::vector<double> col;
    for (std::size_t i = 0; i < S.size(); ++i) col.push_back(S.features(i, f));
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (int j = 1; j <= 5; ++j) {
      double h = (sorted.size() - 1) * (j / 6.0);
      std::size_t lo = static_cast<std::size_t>(std::floor(h));
      double q = sorted[lo] + (h - lo) * (sorted[std::min(lo + 1, sorted.size() - 1)] - sorted[lo]);
      if (q > sorted.front() && (cuts.empty() || cuts.back() != q)) cuts.push_back(q);
    }
    for (double t : cuts) {
      std::vector<std::size_t> side_rows[2];
      for (std::size_t i = 0; i < S.size(); ++i) side_rows[col[i] < t ? 0 : 1].push_back(i);
      if (side_rows[0].size() < 20 || side_rows[1].size() < 20) continue;
      // candidates per side in (kind, depth) order: root fit then own fit
      std::vector<const Predictor*> cand[2];
      std::vector<Predictor> own[2];
      for (int s = 0; s < 2; ++s) {
        own[s].reserve(3);
        for (std::size_t k = 0; k < 3; ++k) {
          cand[s].push_back(&root_fits[k]);
          own[s].push_back(fit_kind(kAllLearners[k], S, side_rows[s], cfg.learner));
          cand[s].push_back(&own[s].back());
        }
      }
      for (std::size_t a = 0; a < cand[0].size(); ++a)
        for (std::size_t b = 0; b < cand[1].size(); ++b) {
          std::vector<double> scores;
          for (auto r : val) {
            auto x = V1.features.row(r);
            scores.push_back(x[f] < t ? cand[0][a]->predict(x) : cand[1][b]->predict(x));
          }
          double loss = 1.0 - pair_auc(scores, vy);
          if (loss < best) {
            best = loss;
            best_f = f;
            best_t = t;
            best_below = static_cast<int>(a);
            best_above = static_cast<int>(b);
          }
        }
    }
  }
  EXPECT_EQ(got->feature, best_f);
  EXPECT_EQ(got->threshold, best_t);
  EXPECT_DOUBLE_EQ(got->joint_loss, best);
  EXPECT_EQ(static_cast<int>(got->below.kind), best_below / 2);
  EXPECT_EQ(got->below.train_node, best_below % 2 ? -1 : 0);
  EXPECT_EQ(static_cast<int>(got->at_or_above.kind), best_above / 2);
  EXPECT_EQ(got->at_or_above.train_node, best_above % 2 ? -1 : 0);
  EXPECT_EQ(best_f, 0u);
  EXPECT_LT(std::abs(best_t - 0.3), 0.35);
}

TEST(BestSplit, ThreadCountDoesNotChangeResult) {
  auto S = planted(7, 300, 0.0, 5);
  auto V1 = planted(8, 200, 0.0, 5);
  GrowthConfig one, four;
  one.min_leaf = four.min_leaf = 15;
  four.threads = 4;
  auto a = grow(S, V1, one), b = grow(S, V1, four);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].predictor, b.nodes[i].predictor);
    EXPECT_EQ(a.nodes[i].children, b.nodes[i].children);
  }
}

TEST(Grow, MinGainOneKeepsRoot) {
  GrowthConfig cfg;
  cfg.min_gain = 1.0;
  cfg.min_leaf = 10;
  auto tree = grow(planted(9, 300, 0.0), planted(10, 200, 0.0), cfg);
  EXPECT_EQ(tree.nodes.size(), 1u);
  EXPECT_TRUE(tree.nodes[0].constraints.empty());
}

TEST(Grow, PlantedRootSplitAndInvariants) {
  auto S = planted(11, 800, 0.0);
  auto V1 = planted(12, 400, 0.0);
  GrowthConfig cfg;
  cfg.min_leaf = 30;
  std::vector<SplitRecord> log;
  auto tree = grow(S, V1, cfg, &log);
  ASSERT_TRUE(tree.nodes[0].children);
  EXPECT_EQ(tree.nodes[0].children->feature_index, 0u);
  EXPECT_LT(std::abs(tree.nodes[0].children->threshold), 0.3);
  EXPECT_EQ(log.size(), (tree.nodes.size() - 1) / 2);
  for (const auto& rec : log) EXPECT_GT(rec.node_loss - rec.joint_loss, cfg.min_gain);
  for (const auto& n : tree.nodes) {
    auto path = tree.path_to(n.id);
    EXPECT_NE(std::find(path.begin(), path.end(), n.train_node_id), path.end());
    EXPECT_EQ(n.predictor.trained_on_node, n.train_node_id);
    if (n.children) {
      const auto& b = tree.node(n.children->below);
      const auto& a = tree.node(n.children->at_or_above);
      ASSERT_EQ(b.constraints.size(), n.constraints.size() + 1);
      EXPECT_TRUE(std::equal(n.constraints.begin(), n.constraints.end(), b.constraints.begin()));
      EXPECT_EQ(b.constraints.back().side, Side::below);
      EXPECT_EQ(a.constraints.back().side, Side::at_or_above);
    }
  }
}

TEST(Weights, SingleNodeIsOne) {
  auto S = planted(13, 200, 0.0);
  GrowthConfig cfg;
  cfg.min_gain = 1.0;
  auto tree = fit_path_weights(grow(S, planted(14, 100, 0.0), cfg), planted(15, 100, 0.0));
  ASSERT_EQ(tree.path_weights.size(), 1u);
  EXPECT_EQ(tree.path_weights.at(0), (std::vector<double>{1.0}));
}

TEST(Weights, ExactTerminalColumnWins) {
  Rng rng(3);
  Matrix a(30, 3);
  std::vector<double> y(30);
  for (std::size_t r = 0; r < 30; ++r) {
    y[r] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    a(r, 0) = rng.uniform();
    a(r, 1) = rng.uniform();
    a(r, 2) = y[r];
  }
  auto w = simplex_least_squares(a, y);
  EXPECT_NEAR(sse(a, y, w), 0.0, 1e-20);
  EXPECT_NEAR(w[2], 1.0, 1e-12);
}

TEST(Weights, VertexDominanceAndGridOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed + 70);
    const std::size_t k = 1 + seed % 10, n = 25;
    Matrix a(n, k);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      y[r] = rng.uniform() < 0.5 ? 1.0 : 0.0;
      for (std::size_t c = 0; c < k; ++c) a(r, c) = std::clamp(0.5 * y[r] + 0.6 * rng.uniform() - 0.1 * c, 0.0, 1.0);
    }
    auto w = simplex_least_squares(a, y);
    ASSERT_EQ(w.size(), k);
    double total = 0.0;
    for (double v : w) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    const double fitted = sse(a, y, w);
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> e(k, 0.0);
      e[c] = 1.0;
      EXPECT_LE(fitted, sse(a, y, e) * (1.0 + 1e-12) + 1e-15) << seed;
    }
    if (k == 3) {
      double grid = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 200; ++i)
        for (int j = 0; i + j <= 200; ++j) {
          std::vector<double> g{i / 200.0, j / 200.0, (200 - i - j) / 200.0};
          grid = std::min(grid, sse(a, y, g));
        }
      EXPECT_LE(fitted, grid + 1e-12);
    }
  }
}

TEST(Weights, EmptyLeafUniformAndUnconstrainedMode) {
  auto S = planted(16, 600, 0.0);
  auto V1 = planted(17, 300, 0.0);
  GrowthConfig cfg;
  auto tree = grow(S, V1, cfg);
  ASSERT_GT(tree.nodes.size(), 1u);
  // V2 rows that all land in one leaf leave every other leaf empty
  auto V2 = planted(27, 300, 0.0);
  const int kept = route(tree, V2.features.row(0)).leaf;
  std::vector<std::size_t> same;
  for (std::size_t i = 0; i < V2.size(); ++i)
    if (route(tree, V2.features.row(i)).leaf == kept) same.push_back(i);
  auto uniform = fit_path_weights(tree, V2.subset(same));
  for (int leaf : uniform.leaves()) {
    if (leaf == kept) continue;
    const auto& w = uniform.path_weights.at(leaf);
    EXPECT_EQ(w.size(), uniform.path_to(leaf).size());
    for (double v : w) EXPECT_DOUBLE_EQ(v, 1.0 / static_cast<double>(w.size()));
  }
  auto free = fit_path_weights(tree, planted(18, 300, 0.0), WeightMode::unconstrained);
  EXPECT_EQ(free.weight_mode, WeightMode::unconstrained);
  for (int leaf : free.leaves()) EXPECT_EQ(free.path_weights.at(leaf).size(), free.path_to(leaf).size());
}

TEST(Predict, HandBuiltArithmetic) {
  auto t = hand_tree(0.4, 0.8, 0.1, {0.25, 0.75});
  std::vector<double> x{-0.5};
  EXPECT_DOUBLE_EQ(predict_overall(t, x), 0.7);
  auto flat = hand_tree(0.4, 0.4, 0.4, {0.3, 0.7});
  EXPECT_DOUBLE_EQ(predict_overall(flat, x), 0.4);
  std::vector<double> wide{1.0, 2.0};
  EXPECT_THROW(predict_overall(t, wide), Error);
}

TEST(Route, BoundaryGoesAbove) {
  auto t = hand_tree(0.4, 0.8, 0.1, {0.25, 0.75});
  std::vector<double> at{0.0}, below{-1e-300};
  EXPECT_EQ(route(t, at).leaf, 2);
  EXPECT_EQ(route(t, at).path, (std::vector<int>{0, 2}));
  EXPECT_EQ(route(t, below).leaf, 1);
}

TEST(Route, PartitionOnGrownTree) {
  auto S = planted(19, 800, 0.0, 4);
  auto V1 = planted(20, 400, 0.0, 4);
  GrowthConfig cfg;
  cfg.min_leaf = 20;
  auto tree = fit_path_weights(grow(S, V1, cfg), planted(21, 400, 0.0, 4));
  Rng rng(22);
  const auto leaves = tree.leaves();
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.normal() * 1.5;
    auto r = route(tree, x);
    int accepted = 0;
    for (int leaf : leaves)
      if (satisfies_all(tree.node(leaf).constraints, x)) ++accepted;
    EXPECT_EQ(accepted, 1);
    EXPECT_TRUE(satisfies_all(tree.node(r.leaf).constraints, x));
    double p = predict_overall(tree, x);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    if (::testing::Test::HasFailure()) break;
  }
}

TEST(ModelIo, RoundTripBitwise) {
  auto S = planted(23, 600, 0.0);
  auto V1 = planted(24, 300, 0.0);
  auto tree = fit_path_weights(grow(S, V1, GrowthConfig{}), planted(25, 300, 0.0));
  tree.schema = Schema({{"a", FeatureKind::continuous, {}}, {"b", FeatureKind::continuous, {}}, {"c", FeatureKind::continuous, {}}});
  tree.schema_fingerprint = tree.schema.fingerprint();
  tree.fill_values = {0.1, 0.2, 0.3};
  tree.column_ranges = {{-3, 3}, {-3, 3}, {-3, 3}};
  auto path = (std::filesystem::temp_directory_path() / "tops_roundtrip.json").string();
  save_model(tree, path);
  auto back = load_model(path, &tree.schema);
  Rng rng(26);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    double a = predict_overall(tree, x), b = predict_overall(back, x);
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
  EXPECT_EQ(back.fill_values, tree.fill_values);
  EXPECT_EQ(back.path_weights, tree.path_weights);

  Schema other({{"z", FeatureKind::continuous, {}}});
  EXPECT_THROW(load_model(path, &other), Error);

  std::string text;
  {
    std::ifstream in(path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  EXPECT_THROW(load_model(path), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(load_model(path), Error);
}

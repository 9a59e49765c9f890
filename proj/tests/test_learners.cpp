#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tops/analysis.hpp"
#include "tops/error.hpp"
#include "tops/learners.hpp"

using namespace tops;
using test::iota;
using test::labeled_from;
using test::random_matrix;

namespace {

double logistic_loglik(const Matrix& x, const std::vector<std::uint8_t>& y, double beta, double b, double ridge) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double eta = beta * x(i, 0) + b;
    s += y[i] * eta - std::log1p(std::exp(eta));
  }
  return s - 0.5 * ridge * beta * beta;
}

// Breslow partial log-likelihood for one covariate, written out directly.
double cox_pl(const std::vector<double>& x, const std::vector<double>& t, const std::vector<std::uint8_t>& e,
              double beta) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!e[i]) continue;
    double risk = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (t[j] >= t[i]) risk += std::exp(beta * x[j]);
    s += beta * x[i] - std::log(risk);
  }
  return s;
}

double golden_max(auto f, double lo, double hi, double tol) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi, c = b - g * (b - a), d = a + g * (b - a);
  while (b - a > tol) {
    if (f(c) > f(d)) b = d;
    else a = c;
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return 0.5 * (a + b);
}

double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(a[i]));
  }
  return num / std::max(den, 1.0);
}

}  // namespace

TEST(Linear, ExactInterpolation) {
  Matrix x(2, 1);
  x(1, 0) = 1.0;
  std::vector<double> y{0.0, 1.0};
  auto p = fit_linear(x, y, 0.0);
  EXPECT_NEAR(p.coefficients[0], 1.0, 1e-12);
  EXPECT_NEAR(p.intercept(), 0.0, 1e-12);
}

TEST(Linear, ConstantTarget) {
  Rng rng(1);
  auto x = random_matrix(rng, 10, 3);
  std::vector<double> y(10, 0.3);
  auto p = fit_linear(x, y, 1e-6);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p.coefficients[j], 0.0, 1e-9);
  EXPECT_NEAR(p.intercept(), 0.3, 1e-9);
}

TEST(Linear, MatchesNormalEquations) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 5, 3);
    std::vector<double> y(5);
    for (auto& v : y) v = rng.uniform();
    for (double ridge : {0.0, 0.5}) {
      auto p = fit_linear(x, y, ridge);
      Eigen::MatrixXd a(5, 4);
      Eigen::VectorXd b(5);
      for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 3; ++c) a(r, c) = x(r, c);
        a(r, 3) = 1.0;
        b(r) = y[r];
      }
      Eigen::MatrixXd lhs = a.transpose() * a;
      for (int c = 0; c < 3; ++c) lhs(c, c) += ridge;
      Eigen::VectorXd sol = lhs.fullPivLu().solve(a.transpose() * b);
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(p.coefficients[c], sol(c), 1e-8) << seed;
    }
  }
}

TEST(Linear, SingularWithoutRidge) {
  Matrix x(4, 2);
  for (int r = 0; r < 4; ++r) {
    x(r, 0) = r;
    x(r, 1) = 2.0 * r;
  }
  std::vector<double> y{0, 1, 0, 1};
  try {
    fit_linear(x, y, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ridge > 0"), std::string::npos);
  }
  EXPECT_NO_THROW(fit_linear(x, y, 1e-3));
}

TEST(Linear, PredictionsClamped) {
  Predictor p{LearnerKind::linear, {10.0, 0.7}, std::nullopt, 90, 0};
  std::vector<double> hi{5.0}, lo{-5.0}, zero{0.0};
  EXPECT_EQ(p.predict(hi), 1.0);
  EXPECT_EQ(p.predict(lo), 0.0);
  Predictor c{LearnerKind::linear, {0.0, 0.7}, std::nullopt, 90, 0};
  EXPECT_DOUBLE_EQ(c.predict(hi), 0.7);
  std::vector<double> wide{1.0, 2.0};
  EXPECT_THROW(c.predict(wide), Error);
}

TEST(Logistic, Symmetry) {
  Matrix x(2, 1);
  std::vector<std::uint8_t> y{0, 1};
  auto p = fit_logistic(x, y, FitOptions{});
  EXPECT_NEAR(p.coefficients[0], 0.0, 1e-12);
  EXPECT_NEAR(p.intercept(), 0.0, 1e-12);
  std::vector<double> z{0.0};
  EXPECT_NEAR(p.predict(z), 0.5, 1e-12);
  Predictor zero{LearnerKind::logistic, {0.0, 0.0}, std::nullopt, 90, 0};
  EXPECT_EQ(zero.predict(z), 0.5);
}

TEST(Logistic, GridSearchOracle) {
  Rng rng(5);
  Matrix x(60, 1);
  std::vector<std::uint8_t> y(60);
  for (int i = 0; i < 60; ++i) {
    x(i, 0) = rng.normal();
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-(1.3 * x(i, 0) - 0.4))) ? 1 : 0;
  }
  const double ridge = 0.1;
  auto p = fit_logistic(x, y, FitOptions{ridge, 100, 1e-10});
  double cb = 0.0, cc = 0.0, step = 0.5;
  for (int level = 0; level < 6; ++level) {
    double best = -1e300, nb = cb, nc = cc;
    for (int i = -20; i <= 20; ++i)
      for (int j = -20; j <= 20; ++j) {
        double b = cb + i * step, c = cc + j * step;
        double v = logistic_loglik(x, y, b, c, ridge);
        if (v > best) {
          best = v;
          nb = b;
          nc = c;
        }
      }
    cb = nb;
    cc = nc;
    step /= 10.0;
  }
  EXPECT_NEAR(p.coefficients[0], cb, 1e-3);
  EXPECT_NEAR(p.intercept(), cc, 1e-3);
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed + 100);
    std::size_t n = 10 + rng.below(40), w = 1 + rng.below(4);
    auto x = random_matrix(rng, n, w);
    std::vector<std::uint8_t> y(n);
    for (auto& v : y) v = rng.uniform() < 0.5;
    std::vector<double> beta(w + 1), grad(w + 1), fd(w + 1);
    for (auto& b : beta) b = rng.normal() * 0.5;
    const double ridge = 0.3;
    objective::logistic(x, y, beta, ridge, grad);
    for (std::size_t j = 0; j <= w; ++j) {
      const double h = 1e-5;
      auto up = beta, dn = beta;
      up[j] += h;
      dn[j] -= h;
      fd[j] = (objective::logistic(x, y, up, ridge) - objective::logistic(x, y, dn, ridge)) / (2 * h);
    }
    EXPECT_LT(rel_err(grad, fd), 1e-6) << seed;
  }
}

TEST(Logistic, MonotoneTrace) {
  Rng rng(9);
  auto x = random_matrix(rng, 200, 4);
  std::vector<std::uint8_t> y(200);
  for (int i = 0; i < 200; ++i) y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-3.0 * x(i, 0) + x(i, 2))) ? 1 : 0;
  FitTrace trace;
  fit_logistic(x, y, FitOptions{}, &trace);
  ASSERT_GE(trace.objective.size(), 2u);
  for (std::size_t i = 1; i < trace.objective.size(); ++i) EXPECT_GE(trace.objective[i], trace.objective[i - 1]);
  EXPECT_LT(trace.gradient_norm, 1e-8 * 200);
}

TEST(Logistic, NonConvergenceCarriesGradient) {
  Rng rng(2);
  auto x = random_matrix(rng, 50, 2);
  std::vector<std::uint8_t> y(50);
  for (int i = 0; i < 50; ++i) y[i] = x(i, 0) + 0.3 * rng.normal() > 0;
  try {
    fit_logistic(x, y, FitOptions{1e-6, 1, 1e-14});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_GT(e.last_gradient_norm(), 0.0);
  }
}

TEST(Cox, ConstantFeatureGivesZero) {
  Matrix x(6, 1, 2.0);
  std::vector<double> t{1, 2, 3, 4, 5, 6};
  std::vector<std::uint8_t> e{1, 0, 1, 1, 0, 1};
  auto p = fit_cox(x, t, e, 3.5, FitOptions{});
  EXPECT_EQ(p.coefficients[0], 0.0);
  ASSERT_TRUE(p.baseline_survival);
  std::vector<double> any{123.0};
  EXPECT_DOUBLE_EQ(p.predict(any), *p.baseline_survival);
  auto km = kaplan_meier(t, e);
  EXPECT_NEAR(*p.baseline_survival, std::exp(-(1.0 / 6 + 1.0 / 4)), 1e-12);
  EXPECT_GT(km.at(3.5), 0.0);
}

TEST(Cox, TwoGroupMatchesOneDimensionalMaximum) {
  Rng rng(31);
  std::vector<double> xs, t;
  std::vector<std::uint8_t> e;
  for (int i = 0; i < 80; ++i) {
    double g = i % 2;
    xs.push_back(g);
    t.push_back(rng.exponential(g ? 2.0 : 1.0) + 1e-9 * i);
    e.push_back(rng.uniform() < 0.8);
  }
  Matrix x(80, 1);
  for (int i = 0; i < 80; ++i) x(i, 0) = xs[i];
  auto p = fit_cox(x, t, e, 0.5, FitOptions{0.0, 100, 1e-12});
  double oracle = golden_max([&](double b) { return cox_pl(xs, t, e, b); }, -5.0, 5.0, 1e-9);
  EXPECT_NEAR(p.coefficients[0], oracle, 1e-4);
}

TEST(Cox, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed + 900);
    std::size_t n = 10 + rng.below(40), w = 1 + rng.below(4);
    auto x = random_matrix(rng, n, w);
    std::vector<double> t(n);
    std::vector<std::uint8_t> e(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = std::round(rng.uniform(0, 10));  // ties exercise the Breslow grouping
      e[i] = rng.uniform() < 0.7;
    }
    e[0] = 1;
    std::vector<double> beta(w), grad(w), fd(w);
    for (auto& b : beta) b = rng.normal() * 0.5;
    const double ridge = 0.2;
    objective::cox(x, t, e, beta, ridge, grad);
    for (std::size_t j = 0; j < w; ++j) {
      const double h = 1e-5;
      auto up = beta, dn = beta;
      up[j] += h;
      dn[j] -= h;
      fd[j] = (objective::cox(x, t, e, up, ridge) - objective::cox(x, t, e, dn, ridge)) / (2 * h);
    }
    EXPECT_LT(rel_err(grad, fd), 1e-6) << seed;
  }
}

TEST(Cox, ObjectiveMatchesDirectFormula) {
  std::vector<double> xs{0.5, -1.0, 2.0, 0.0, 1.0};
  std::vector<double> t{3, 1, 4, 1.5, 9};
  std::vector<std::uint8_t> e{1, 1, 0, 1, 1};
  Matrix x(5, 1);
  for (int i = 0; i < 5; ++i) x(i, 0) = xs[i];
  std::vector<double> beta{0.37};
  EXPECT_NEAR(objective::cox(x, t, e, beta, 0.0), cox_pl(xs, t, e, 0.37), 1e-12);
}

TEST(Cox, TimeScalingInvariance) {
  Rng rng(77);
  auto x = random_matrix(rng, 120, 3);
  std::vector<double> t(120), t3(120);
  std::vector<std::uint8_t> e(120);
  for (int i = 0; i < 120; ++i) {
    t[i] = rng.exponential(std::exp(0.8 * x(i, 0) - 0.5 * x(i, 1)));
    t3[i] = 3.0 * t[i];
    e[i] = rng.uniform() < 0.75;
  }
  auto a = fit_cox(x, t, e, 0.7, FitOptions{});
  auto b = fit_cox(x, t3, e, 2.1, FitOptions{});
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(a.coefficients[j], b.coefficients[j], 1e-9);
  EXPECT_NEAR(*a.baseline_survival, *b.baseline_survival, 1e-9);
}

TEST(Cox, MonotoneTraceAndNoEvents) {
  Rng rng(78);
  auto x = random_matrix(rng, 100, 2);
  std::vector<double> t(100);
  std::vector<std::uint8_t> e(100, 1);
  for (int i = 0; i < 100; ++i) t[i] = rng.exponential(std::exp(x(i, 0)));
  FitTrace trace;
  fit_cox(x, t, e, 1.0, FitOptions{}, &trace);
  for (std::size_t i = 1; i < trace.objective.size(); ++i) EXPECT_GE(trace.objective[i], trace.objective[i - 1]);
  std::vector<std::uint8_t> none(100, 0);
  EXPECT_THROW(fit_cox(x, t, none, 1.0, FitOptions{}), Error);
}

TEST(Cox, NullCoefficientsGiveBaseline) {
  Predictor p{LearnerKind::cox, {0.0, 0.0, 0.0}, 0.62, 365, 0};
  std::vector<double> x{4.0, -2.0};
  EXPECT_DOUBLE_EQ(p.predict(x), 0.62);
  Predictor extreme{LearnerKind::cox, {800.0, 0.0, 0.0}, 0.62, 365, 0};
  double v = extreme.predict(x);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
}

TEST(Predictors, OutputsStayInUnitInterval) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> coef(4);
    for (auto& c : coef) c = rng.normal() * 50.0;
    std::vector<double> x(3);
    for (auto& v : x) v = rng.normal() * 100.0;
    for (auto kind : kAllLearners) {
      Predictor p{kind, coef, kind == LearnerKind::cox ? std::optional<double>(rng.uniform()) : std::nullopt, 1, 0};
      if (kind == LearnerKind::cox) p.coefficients.back() = 0.0;
      double v = p.predict(x);
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(FitBest, SeparableValidateReachesOne) {
  Rng rng(6);
  auto x = random_matrix(rng, 80, 2);
  std::vector<std::uint8_t> y(80);
  for (int i = 0; i < 80; ++i) y[i] = x(i, 0) > 0;
  auto l = labeled_from(x, y);
  auto rows = iota(80);
  auto best = fit_best(kAllLearners, l, rows, l, rows, LearnerOptions{});
  EXPECT_NEAR(best.loss, 0.0, 1e-12);
  std::vector<double> s(80);
  best.predictor.predict_rows(l.features, rows, s);
  EXPECT_DOUBLE_EQ(auc(s, y), 1.0);
}

TEST(FitBest, SingletonKind) {
  Rng rng(7);
  auto x = random_matrix(rng, 40, 2);
  std::vector<std::uint8_t> y(40);
  for (int i = 0; i < 40; ++i) y[i] = rng.uniform() < 0.5;
  y[0] = 0;
  y[1] = 1;
  auto l = labeled_from(x, y);
  auto rows = iota(40);
  LearnerKind only[] = {LearnerKind::linear};
  auto best = fit_best(only, l, rows, l, rows, LearnerOptions{});
  EXPECT_EQ(best.predictor.kind, LearnerKind::linear);
  EXPECT_EQ(best.candidates.size(), 1u);
}

TEST(FitBest, PlantedLogisticSelectedByExhaustiveComparison) {
  Rng rng(15);
  const std::size_t n = 1200;
  Matrix x(n, 2);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal() * 3.0;
    double eta = 6.0 * x(i, 0) + 0.8 * x(i, 1) + 2.0;
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-eta));
  }
  auto l = labeled_from(x, y);
  std::vector<std::size_t> train, val;
  for (std::size_t i = 0; i < n; ++i) (i % 2 ? val : train).push_back(i);
  LearnerOptions opt;
  auto best = fit_best(kAllLearners, l, train, l, val, opt);

  std::vector<std::uint8_t> yv;
  for (auto i : val) yv.push_back(y[i]);
  double best_loss = 2.0;
  LearnerKind best_kind = LearnerKind::linear;
  for (auto kind : kAllLearners) {
    auto p = fit_kind(kind, l, train, opt);
    std::vector<double> s(val.size());
    p.predict_rows(l.features, val, s);
    double loss = 1.0 - auc(s, yv);
    if (loss < best_loss) {
      best_loss = loss;
      best_kind = kind;
    }
  }
  EXPECT_EQ(best.predictor.kind, best_kind);
  EXPECT_DOUBLE_EQ(best.loss, best_loss);
  EXPECT_EQ(best_kind, LearnerKind::logistic);
  for (const auto& c : best.candidates) EXPECT_LE(best.loss, c.loss);
}

TEST(FitBest, AllFailuresAggregate) {
  Matrix x(4, 1);
  std::vector<std::uint8_t> y{1, 1, 1, 1};
  auto l = labeled_from(x, y);
  for (auto& e : l.event) e = 0;
  auto rows = iota(4);
  LearnerKind kinds[] = {LearnerKind::logistic, LearnerKind::cox};
  EXPECT_THROW(fit_best(kinds, l, rows, l, rows, LearnerOptions{}), Error);
}

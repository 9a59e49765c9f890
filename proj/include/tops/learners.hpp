#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tops/cohort.hpp"
#include "tops/matrix.hpp"

namespace tops {

enum class LearnerKind { linear = 0, logistic = 1, cox = 2 };

inline constexpr LearnerKind kAllLearners[] = {LearnerKind::linear, LearnerKind::logistic, LearnerKind::cox};

const char* to_string(LearnerKind k);
LearnerKind learner_from_string(const std::string& s);

/// A fitted base learner mapping an encoded feature vector to the
/// probability of surviving past `horizon`.
struct Predictor {
  LearnerKind kind = LearnerKind::linear;
  std::vector<double> coefficients;  // width + 1; last slot is the intercept (0 for Cox)
  std::optional<double> baseline_survival;  // Cox only: S0(horizon) at x = 0
  double horizon = 0.0;
  int trained_on_node = 0;

  std::size_t width() const noexcept { return coefficients.empty() ? 0 : coefficients.size() - 1; }
  double intercept() const noexcept { return coefficients.empty() ? 0.0 : coefficients.back(); }

  /// Always finite and in [0, 1]. Throws on width mismatch.
  double predict(std::span<const double> x) const;
  /// Scores rows `rows` of `x` into `out` (same length as rows).
  void predict_rows(const Matrix& x, std::span<const std::size_t> rows, std::span<double> out) const;

  bool operator==(const Predictor&) const = default;
};

struct FitOptions {
  double ridge = 1e-6;
  int max_iter = 100;
  double tol = 1e-8;
};

/// Penalized objective values after each accepted Newton step (index 0 is
/// the starting point).
struct FitTrace {
  std::vector<double> objective;
  int iterations = 0;
  double gradient_norm = 0.0;
};

// Core fits on a dense design (no intercept column; one is added internally).
Predictor fit_linear(const Matrix& x, std::span<const double> y, double ridge);
Predictor fit_logistic(const Matrix& x, std::span<const std::uint8_t> y, const FitOptions& opt,
                       FitTrace* trace = nullptr);
Predictor fit_cox(const Matrix& x, std::span<const double> time, std::span<const std::uint8_t> event,
                  double horizon, const FitOptions& opt, FitTrace* trace = nullptr);

// LabeledSet views: linear and logistic use the labeled rows among `rows`,
// Cox uses every row (excluded rows still carry valid time/event).
Predictor fit_linear(const LabeledSet& data, std::span<const std::size_t> rows, double ridge);
Predictor fit_logistic(const LabeledSet& data, std::span<const std::size_t> rows, const FitOptions& opt,
                       FitTrace* trace = nullptr);
Predictor fit_cox(const LabeledSet& data, std::span<const std::size_t> rows, const FitOptions& opt,
                  FitTrace* trace = nullptr);

struct LearnerOptions {
  double linear_ridge = 1e-6;
  FitOptions logistic{};
  FitOptions cox{};
};

Predictor fit_kind(LearnerKind kind, const LabeledSet& data, std::span<const std::size_t> rows,
                   const LearnerOptions& opt);

struct Candidate {
  LearnerKind kind;
  std::optional<Predictor> predictor;
  double loss = 1.0;  // 1 - AUC on the validation rows
  std::string error;  // set when the fit failed
};

struct BestFit {
  Predictor predictor;
  double loss = 1.0;
  std::vector<Candidate> candidates;  // in kind order
};

/// Fits each kind on `train_rows` of `train`, scores the labeled
/// `validate_rows` of `validate` and returns the minimizer of 1 - AUC
/// (ties: linear < logistic < cox).
BestFit fit_best(std::span<const LearnerKind> kinds, const LabeledSet& train,
                 std::span<const std::size_t> train_rows, const LabeledSet& validate,
                 std::span<const std::size_t> validate_rows, const LearnerOptions& opt);

namespace objective {

// Objective functions exposed for derivative checks. `beta` includes the
// intercept as its last entry for the logistic case. Gradients are written
// to `grad` when it is non-empty.

/// sum_i [y_i*eta_i - log(1 + e^eta_i)] - ridge/2 * ||beta[0..w)||^2
double logistic(const Matrix& x, std::span<const std::uint8_t> y, std::span<const double> beta,
                double ridge, std::span<double> grad = {});

/// Breslow partial log-likelihood minus ridge/2 * ||beta||^2.
double cox(const Matrix& x, std::span<const double> time, std::span<const std::uint8_t> event,
           std::span<const double> beta, double ridge, std::span<double> grad = {});

}  // namespace objective

}  // namespace tops

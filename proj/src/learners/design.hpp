#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tops/matrix.hpp"

namespace tops::detail {

/// Non-constant columns of `x`, mean-centred, optionally followed by a
/// column of ones. `active[j]` is the source column of design column j.
struct Design {
  Matrix x;
  std::vector<std::size_t> active;
  std::vector<double> means;  // per active column
  bool intercept = false;

  std::size_t penalized() const { return active.size(); }
};

Design make_design(const Matrix& x, std::span<const std::size_t> rows, bool intercept);

/// Map design-space coefficients back to width+1 source coefficients
/// (intercept last, adjusted for centring; dropped columns get 0).
std::vector<double> design_to_coefficients(const Design& d, std::span<const double> beta, std::size_t width);

/// Solve the symmetric system `a * out = b` (a is p x p, fully populated).
/// Returns false when the factorization fails or rcond < min_rcond.
bool solve_symmetric(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     double min_rcond);

struct LogisticEval {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> neg_hessian;  // p x p, only when requested
};

/// Penalized log-likelihood on a design whose last column is the intercept;
/// the first `penalized` coefficients carry the ridge term.
LogisticEval logistic_eval(const Matrix& design, std::span<const std::uint8_t> y,
                           std::span<const double> beta, double ridge, std::size_t penalized,
                           bool want_hessian);

/// Breslow partial log-likelihood. `design` rows must be sorted by time
/// descending; `groups` holds [begin, end) row ranges of equal time in that
/// order. Every coefficient is penalized.
struct CoxEval {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> neg_hessian;
};

struct TimeGroups {
  std::vector<std::size_t> order;  // source rows sorted by time descending (stable)
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
};

TimeGroups group_by_time(std::span<const double> time);

CoxEval cox_eval(const Matrix& sorted_design, std::span<const std::uint8_t> sorted_event,
                 const TimeGroups& groups, std::span<const double> beta, double ridge, bool want_hessian);

}  // namespace tops::detail

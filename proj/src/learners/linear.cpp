#include <cmath>

#include "design.hpp"
#include "tops/error.hpp"
#include "tops/kernels.hpp"
#include "tops/learners.hpp"

namespace tops {
namespace detail {

std::vector<double> design_to_coefficients(const Design& d, std::span<const double> beta, std::size_t width) {
  std::vector<double> coef(width + 1, 0.0);
  double shift = 0.0;
  for (std::size_t j = 0; j < d.active.size(); ++j) {
    coef[d.active[j]] = beta[j];
    shift += beta[j] * d.means[j];
  }
  if (d.intercept) coef[width] = beta[d.active.size()] - shift;
  return coef;
}

}  // namespace detail

Predictor fit_linear(const Matrix& x, std::span<const double> y, double ridge) {
  if (x.rows() < 2) throw Error(ErrorKind::domain, "linear fit needs at least 2 rows");
  if (y.size() != x.rows()) throw Error(ErrorKind::domain, "linear fit: label count mismatch");
  if (!(ridge >= 0.0)) throw Error(ErrorKind::domain, "ridge must be >= 0");

  std::vector<std::size_t> all(x.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const detail::Design d = detail::make_design(x, all, true);
  const std::size_t n = d.x.rows(), p = d.x.cols();

  const auto& k = kernels::active();
  std::vector<double> gram(p * p, 0.0), rhs(p, 0.0), ones(n, 1.0);
  k.weighted_gram(d.x.data(), n, p, ones.data(), gram.data());
  kernels::symmetrize(gram, p);
  k.weighted_colsum(d.x.data(), n, p, y.data(), rhs.data());
  for (std::size_t j = 0; j < d.penalized(); ++j) gram[j * p + j] += ridge;

  std::vector<double> beta(p, 0.0);
  if (!detail::solve_symmetric(gram, rhs, beta, ridge > 0.0 ? 0.0 : 1e-13))
    throw NumericError("linear fit: normal equations are singular; use ridge > 0");

  Predictor pred;
  pred.kind = LearnerKind::linear;
  pred.coefficients = detail::design_to_coefficients(d, beta, x.cols());
  for (double c : pred.coefficients)
    if (!std::isfinite(c)) throw NumericError("linear fit produced non-finite coefficients");
  return pred;
}

Predictor fit_linear(const LabeledSet& data, std::span<const std::size_t> rows, double ridge) {
  std::vector<std::size_t> used;
  std::vector<double> y;
  for (auto r : rows)
    if (data.label[r] >= 0) {
      used.push_back(r);
      y.push_back(data.label[r]);
    }
  Predictor p = fit_linear(data.features.gather(used), y, ridge);
  p.horizon = data.horizon;
  return p;
}

}  // namespace tops

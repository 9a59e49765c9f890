#include <algorithm>
#include <cmath>

#include "design.hpp"
#include "tops/error.hpp"
#include "tops/kernels.hpp"
#include "tops/learners.hpp"

namespace tops {

namespace detail {

LogisticEval logistic_eval(const Matrix& design, std::span<const std::uint8_t> y, std::span<const double> beta,
                           double ridge, std::size_t penalized, bool want_hessian) {
  const std::size_t n = design.rows(), p = design.cols();
  const auto& k = kernels::active();
  std::vector<double> eta(n);
  k.gemv(design.data(), n, p, beta.data(), 0.0, eta.data());

  LogisticEval out;
  out.grad.assign(p, 0.0);
  std::vector<double> resid(n), w(want_hessian ? n : 0);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = eta[i];
    // log(1 + e^eta) without overflow
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    value += (y[i] ? e : 0.0) - softplus;
    const double prob = e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
    resid[i] = static_cast<double>(y[i]) - prob;
    if (want_hessian) w[i] = prob * (1.0 - prob);
  }
  k.weighted_colsum(design.data(), n, p, resid.data(), out.grad.data());
  for (std::size_t j = 0; j < penalized; ++j) {
    value -= 0.5 * ridge * beta[j] * beta[j];
    out.grad[j] -= ridge * beta[j];
  }
  out.value = value;
  if (want_hessian) {
    out.neg_hessian.assign(p * p, 0.0);
    k.weighted_gram(design.data(), n, p, w.data(), out.neg_hessian.data());
    kernels::symmetrize(out.neg_hessian, p);
    for (std::size_t j = 0; j < penalized; ++j) out.neg_hessian[j * p + j] += ridge;
  }
  return out;
}

}  // namespace detail

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

Predictor fit_logistic(const Matrix& x, std::span<const std::uint8_t> y, const FitOptions& opt, FitTrace* trace) {
  if (y.size() != x.rows()) throw Error(ErrorKind::domain, "logistic fit: label count mismatch");
  if (!(opt.ridge > 0.0)) throw Error(ErrorKind::domain, "logistic fit needs ridge > 0");
  std::size_t pos = 0;
  for (auto v : y) pos += v ? 1 : 0;
  if (pos == 0 || pos == y.size()) throw Error(ErrorKind::domain, "logistic fit needs both labels present");

  std::vector<std::size_t> all(x.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const detail::Design d = detail::make_design(x, all, true);
  const std::size_t n = d.x.rows(), p = d.x.cols();
  const double scale = std::max<double>(1.0, static_cast<double>(n));

  std::vector<double> beta(p, 0.0);
  const double ybar = static_cast<double>(pos) / static_cast<double>(n);
  beta[p - 1] = std::log(ybar / (1.0 - ybar));

  FitTrace local;
  FitTrace& tr = trace ? *trace : local;
  tr = FitTrace{};

  auto cur = detail::logistic_eval(d.x, y, beta, opt.ridge, d.penalized(), true);
  tr.objective.push_back(cur.value);
  std::vector<double> step(p), cand(p);
  bool converged = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    tr.gradient_norm = inf_norm(cur.grad);
    if (tr.gradient_norm < opt.tol * scale) {
      converged = true;
      break;
    }
    if (!detail::solve_symmetric(cur.neg_hessian, cur.grad, step, 0.0))
      throw NumericError("logistic fit: Newton system is singular", tr.gradient_norm);
    // predicted gain below the objective's rounding level: nothing left to resolve
    double decrement = 0.0;
    for (std::size_t j = 0; j < step.size(); ++j) decrement += cur.grad[j] * step[j];
    if (decrement <= 1e-13 * std::max(1.0, std::abs(cur.value))) {
      converged = true;
      break;
    }
    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h < 50; ++h, t *= 0.5) {
      for (std::size_t j = 0; j < p; ++j) cand[j] = beta[j] + t * step[j];
      auto next = detail::logistic_eval(d.x, y, cand, opt.ridge, d.penalized(), true);
      if (std::isfinite(next.value) && next.value >= cur.value) {
        beta = cand;
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    tr.iterations = it + 1;
    if (!accepted) {
      // No representable ascent left; accept if the gradient is already small.
      if (tr.gradient_norm < std::sqrt(opt.tol) * scale) {
        converged = true;
        break;
      }
      throw NumericError("logistic fit: line search failed", tr.gradient_norm);
    }
    tr.objective.push_back(cur.value);
  }
  if (!converged) {
    tr.gradient_norm = inf_norm(cur.grad);
    if (tr.gradient_norm < opt.tol * scale) converged = true;
  }
  if (!converged)
    throw NumericError("logistic fit did not converge in " + std::to_string(opt.max_iter) +
                           " iterations (gradient norm " + std::to_string(tr.gradient_norm) + ")",
                       tr.gradient_norm);

  Predictor pred;
  pred.kind = LearnerKind::logistic;
  pred.coefficients = detail::design_to_coefficients(d, beta, x.cols());
  return pred;
}

Predictor fit_logistic(const LabeledSet& data, std::span<const std::size_t> rows, const FitOptions& opt,
                       FitTrace* trace) {
  std::vector<std::size_t> used;
  std::vector<std::uint8_t> y;
  for (auto r : rows)
    if (data.label[r] >= 0) {
      used.push_back(r);
      y.push_back(static_cast<std::uint8_t>(data.label[r]));
    }
  Predictor p = fit_logistic(data.features.gather(used), y, opt, trace);
  p.horizon = data.horizon;
  return p;
}

namespace objective {

double logistic(const Matrix& x, std::span<const std::uint8_t> y, std::span<const double> beta, double ridge,
                std::span<double> grad) {
  Matrix design(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto src = x.row(i);
    auto dst = design.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[x.cols()] = 1.0;
  }
  auto e = detail::logistic_eval(design, y, beta, ridge, x.cols(), false);
  if (!grad.empty()) std::copy(e.grad.begin(), e.grad.end(), grad.begin());
  return e.value;
}

}  // namespace objective

}  // namespace tops

#include <algorithm>
#include <cmath>
#include <numeric>

#include "design.hpp"
#include "tops/error.hpp"
#include "tops/kernels.hpp"
#include "tops/learners.hpp"

namespace tops {

namespace detail {

TimeGroups group_by_time(std::span<const double> time) {
  TimeGroups g;
  g.order.resize(time.size());
  std::iota(g.order.begin(), g.order.end(), std::size_t{0});
  std::stable_sort(g.order.begin(), g.order.end(), [&](std::size_t a, std::size_t b) { return time[a] > time[b]; });
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= g.order.size(); ++i) {
    if (i == g.order.size() || time[g.order[i]] != time[g.order[begin]]) {
      g.ranges.emplace_back(begin, i);
      begin = i;
    }
  }
  return g;
}

CoxEval cox_eval(const Matrix& design, std::span<const std::uint8_t> event, const TimeGroups& groups,
                 std::span<const double> beta, double ridge, bool want_hessian) {
  const std::size_t n = design.rows(), p = design.cols();
  const auto& k = kernels::active();
  std::vector<double> eta(n, 0.0);
  if (p > 0) k.gemv(design.data(), n, p, beta.data(), 0.0, eta.data());
  const double m = n ? *std::max_element(eta.begin(), eta.end()) : 0.0;
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(eta[i] - m);

  CoxEval out;
  out.grad.assign(p, 0.0);
  if (want_hessian) out.neg_hessian.assign(p * p, 0.0);
  double s0 = 0.0;
  std::vector<double> s1(p, 0.0), s2(want_hessian ? p * p : 0, 0.0), mean(p);
  double value = 0.0;

  for (const auto& [b, end] : groups.ranges) {
    const std::size_t len = end - b;
    for (std::size_t i = b; i < end; ++i) s0 += e[i];
    if (p > 0) {
      k.weighted_colsum(design.data() + b * p, len, p, e.data() + b, s1.data());
      if (want_hessian) k.weighted_gram(design.data() + b * p, len, p, e.data() + b, s2.data());
    }
    double d = 0.0;
    for (std::size_t i = b; i < end; ++i) {
      if (!event[i]) continue;
      d += 1.0;
      value += eta[i];
      if (p > 0) k.axpy(1.0, design.data() + i * p, out.grad.data(), p);
    }
    if (d == 0.0) continue;
    value -= d * (std::log(s0) + m);
    for (std::size_t j = 0; j < p; ++j) {
      mean[j] = s1[j] / s0;
      out.grad[j] -= d * mean[j];
    }
    if (want_hessian) {
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j)
          out.neg_hessian[i * p + j] += d * (s2[i * p + j] / s0 - mean[i] * mean[j]);
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    value -= 0.5 * ridge * beta[j] * beta[j];
    out.grad[j] -= ridge * beta[j];
  }
  if (want_hessian) {
    kernels::symmetrize(out.neg_hessian, p);
    for (std::size_t j = 0; j < p; ++j) out.neg_hessian[j * p + j] += ridge;
  }
  out.value = value;
  return out;
}

}  // namespace detail

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct SortedData {
  Matrix design;
  std::vector<std::uint8_t> event;
  std::vector<double> time;
  detail::TimeGroups groups;
};

SortedData sort_by_time(const Matrix& x, std::span<const double> time, std::span<const std::uint8_t> event) {
  SortedData s;
  s.groups = detail::group_by_time(time);
  s.design = x.gather(s.groups.order);
  for (auto r : s.groups.order) {
    s.event.push_back(event[r]);
    s.time.push_back(time[r]);
  }
  return s;
}

}  // namespace

Predictor fit_cox(const Matrix& x, std::span<const double> time, std::span<const std::uint8_t> event, double horizon,
                  const FitOptions& opt, FitTrace* trace) {
  if (x.rows() < 2) throw Error(ErrorKind::domain, "Cox fit needs at least 2 rows");
  if (time.size() != x.rows() || event.size() != x.rows())
    throw Error(ErrorKind::domain, "Cox fit: time/event length mismatch");
  if (!(opt.ridge >= 0.0)) throw Error(ErrorKind::domain, "ridge must be >= 0");
  if (std::none_of(event.begin(), event.end(), [](auto v) { return v != 0; }))
    throw Error(ErrorKind::domain, "Cox fit needs at least one event");

  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const detail::Design d = detail::make_design(x, all, false);
  const SortedData s = sort_by_time(d.x, time, event);
  const std::size_t p = d.x.cols();
  const double scale = std::max<double>(1.0, static_cast<double>(x.rows()));

  FitTrace local;
  FitTrace& tr = trace ? *trace : local;
  tr = FitTrace{};

  std::vector<double> beta(p, 0.0), step(p), cand(p);
  auto cur = detail::cox_eval(s.design, s.event, s.groups, beta, opt.ridge, true);
  tr.objective.push_back(cur.value);
  bool converged = p == 0;
  for (int it = 0; it < opt.max_iter && !converged; ++it) {
    tr.gradient_norm = inf_norm(cur.grad);
    if (tr.gradient_norm < opt.tol * scale) {
      converged = true;
      break;
    }
    if (!detail::solve_symmetric(cur.neg_hessian, cur.grad, step, 0.0))
      throw NumericError("Cox fit: Newton system is singular", tr.gradient_norm);
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
      auto next = detail::cox_eval(s.design, s.event, s.groups, cand, opt.ridge, true);
      if (std::isfinite(next.value) && next.value >= cur.value) {
        beta = cand;
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    tr.iterations = it + 1;
    if (!accepted) {
      if (tr.gradient_norm < std::sqrt(opt.tol) * scale) {
        converged = true;
        break;
      }
      throw NumericError("Cox fit: line search failed", tr.gradient_norm);
    }
    tr.objective.push_back(cur.value);
  }
  if (!converged) {
    tr.gradient_norm = inf_norm(cur.grad);
    converged = tr.gradient_norm < opt.tol * scale;
  }
  if (!converged)
    throw NumericError("Cox fit did not converge in " + std::to_string(opt.max_iter) + " iterations (gradient norm " +
                           std::to_string(tr.gradient_norm) + ")",
                       tr.gradient_norm);

  // Breslow cumulative baseline hazard at the horizon, for the centred
  // design, then moved to x = 0.
  const std::size_t n = s.design.rows();
  std::vector<double> eta(n, 0.0);
  if (p > 0) kernels::active().gemv(s.design.data(), n, p, beta.data(), 0.0, eta.data());
  const double m = n ? *std::max_element(eta.begin(), eta.end()) : 0.0;
  double risk = 0.0;
  double hazard_sum = 0.0;  // sum of d / sum_risk exp(eta - m)
  for (const auto& [b, end] : s.groups.ranges) {
    double deaths = 0.0;
    for (std::size_t i = b; i < end; ++i) {
      risk += std::exp(eta[i] - m);
      deaths += s.event[i] ? 1.0 : 0.0;
    }
    if (deaths > 0.0 && s.time[b] <= horizon) hazard_sum += deaths / risk;
  }
  double shift = 0.0;
  for (std::size_t j = 0; j < p; ++j) shift += beta[j] * d.means[j];

  Predictor pred;
  pred.kind = LearnerKind::cox;
  pred.horizon = horizon;
  pred.coefficients = detail::design_to_coefficients(d, beta, x.cols());
  pred.coefficients.back() = 0.0;
  if (hazard_sum <= 0.0) {
    pred.baseline_survival = 1.0;
  } else {
    const double log_h0 = std::log(hazard_sum) - m - shift;
    pred.baseline_survival = std::exp(-std::exp(std::min(log_h0, 700.0)));
  }
  return pred;
}

Predictor fit_cox(const LabeledSet& data, std::span<const std::size_t> rows, const FitOptions& opt, FitTrace* trace) {
  std::vector<double> time;
  std::vector<std::uint8_t> event;
  time.reserve(rows.size());
  event.reserve(rows.size());
  for (auto r : rows) {
    time.push_back(data.time[r]);
    event.push_back(data.event[r]);
  }
  return fit_cox(data.features.gather(rows), time, event, data.horizon, opt, trace);
}

namespace objective {

double cox(const Matrix& x, std::span<const double> time, std::span<const std::uint8_t> event,
           std::span<const double> beta, double ridge, std::span<double> grad) {
  const SortedData s = sort_by_time(x, time, event);
  auto e = detail::cox_eval(s.design, s.event, s.groups, beta, ridge, false);
  if (!grad.empty()) std::copy(e.grad.begin(), e.grad.end(), grad.begin());
  return e.value;
}

}  // namespace objective

}  // namespace tops

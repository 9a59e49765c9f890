#include <algorithm>
#include <cmath>
#include <numeric>

#include "tops/analysis.hpp"
#include "tops/error.hpp"

namespace tops {

double StepCurve::at(double t) const {
  if (times.empty() || t < times.front()) return 1.0;
  auto it = std::upper_bound(times.begin(), times.end(), t);
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

StepCurve kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> events) {
  if (times.empty()) throw Error(ErrorKind::domain, "Kaplan-Meier needs at least one subject");
  if (times.size() != events.size()) throw Error(ErrorKind::domain, "times and events differ in length");
  for (double t : times)
    if (!(t >= 0.0)) throw Error(ErrorKind::domain, "survival times must be >= 0");

  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });

  StepCurve curve;
  curve.times.push_back(0.0);
  curve.survival.push_back(1.0);
  double s = 1.0;
  std::size_t at_risk = times.size();
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = times[order[i]];
    std::size_t deaths = 0, leaving = 0;
    while (i < order.size() && times[order[i]] == t) {
      deaths += events[order[i]] ? 1 : 0;
      ++leaving;
      ++i;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      if (t == 0.0) {
        curve.survival.front() = s;
      } else {
        curve.times.push_back(t);
        curve.survival.push_back(s);
      }
    }
    at_risk -= leaving;
  }
  return curve;
}

SurvivalCurve::SurvivalCurve(std::vector<double> knots_t, std::vector<double> knots_s)
    : t_(std::move(knots_t)), s_(std::move(knots_s)) {
  if (t_.empty() || t_.size() != s_.size()) throw Error(ErrorKind::domain, "survival curve needs matching knots");
}

double SurvivalCurve::at(double t) const {
  if (t <= t_.front()) return s_.front();
  if (t >= t_.back()) return s_.back();
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - t_.begin());
  const std::size_t lo = hi - 1;
  const double f = (t - t_[lo]) / (t_[hi] - t_[lo]);
  // Convex combination keeps the value between the two (ordered) knots.
  return std::min(s_[lo], std::max(s_[hi], s_[lo] + f * (s_[hi] - s_[lo])));
}

std::vector<std::pair<double, double>> SurvivalCurve::sample(std::size_t points) const {
  std::vector<double> ts(t_.begin(), t_.end());
  if (points >= 2)
    for (std::size_t i = 0; i < points; ++i)
      ts.push_back(t_.back() * static_cast<double>(i) / static_cast<double>(points - 1));
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(ts.size());
  for (double t : ts) out.emplace_back(t, at(t));
  return out;
}

SurvivalCurve individual_curve(std::span<const double> probs, std::span<const double> horizons) {
  if (probs.size() != horizons.size())
    throw Error(ErrorKind::domain, "individual curve: " + std::to_string(probs.size()) + " probabilities for " +
                                       std::to_string(horizons.size()) + " horizons");
  std::vector<double> t{0.0}, s{1.0};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(horizons[i] > t.back())) throw Error(ErrorKind::domain, "horizons must be positive and ascending");
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) throw Error(ErrorKind::domain, "probabilities must lie in [0, 1]");
    t.push_back(horizons[i]);
    s.push_back(std::min(s.back(), probs[i]));  // running-minimum repair
  }
  return SurvivalCurve(std::move(t), std::move(s));
}

}  // namespace tops

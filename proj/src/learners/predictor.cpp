#include <algorithm>
#include <cmath>

#include "design.hpp"
#include "tops/error.hpp"
#include "tops/kernels.hpp"
#include "tops/learners.hpp"

namespace tops {

const char* to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::linear: return "linear";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::cox: return "cox";
  }
  return "?";
}

LearnerKind learner_from_string(const std::string& s) {
  if (s == "linear" || s == "Linear") return LearnerKind::linear;
  if (s == "logistic" || s == "Logistic") return LearnerKind::logistic;
  if (s == "cox" || s == "Cox") return LearnerKind::cox;
  throw Error(ErrorKind::data, "unknown learner kind '" + s + "'");
}

namespace {

double finish(LearnerKind kind, double eta, const std::optional<double>& baseline) {
  double p = 0.0;
  switch (kind) {
    case LearnerKind::linear: p = eta; break;
    case LearnerKind::logistic:
      p = eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
      break;
    case LearnerKind::cox: {
      const double s0 = baseline.value_or(1.0);
      if (s0 >= 1.0) {
        p = 1.0;
      } else if (s0 <= 0.0) {
        p = 0.0;
      } else {
        // s0^exp(eta) evaluated in log space
        const double log_h0 = std::log(-std::log(s0));
        p = std::exp(-std::exp(std::min(log_h0 + eta, 700.0)));
      }
      break;
    }
  }
  if (std::isnan(p)) throw NumericError("predictor produced NaN");
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

double Predictor::predict(std::span<const double> x) const {
  if (x.size() != width())
    throw Error(ErrorKind::data, "feature width " + std::to_string(x.size()) + " does not match predictor width " +
                                     std::to_string(width()));
  const double eta = kernels::active().dot(x.data(), coefficients.data(), x.size()) + intercept();
  return finish(kind, eta, baseline_survival);
}

void Predictor::predict_rows(const Matrix& x, std::span<const std::size_t> rows, std::span<double> out) const {
  if (x.cols() != width())
    throw Error(ErrorKind::data, "feature width " + std::to_string(x.cols()) + " does not match predictor width " +
                                     std::to_string(width()));
  const auto& k = kernels::active();
  const double b = intercept();
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[i] = finish(kind, k.dot(x.row(rows[i]).data(), coefficients.data(), x.cols()) + b, baseline_survival);
}

namespace detail {

Design make_design(const Matrix& x, std::span<const std::size_t> rows, bool intercept) {
  Design d;
  d.intercept = intercept;
  const std::size_t w = x.cols();
  for (std::size_t c = 0; c < w; ++c) {
    if (rows.empty()) break;
    const double first = x(rows[0], c);
    bool varies = false;
    double sum = 0.0;
    for (auto r : rows) {
      const double v = x(r, c);
      if (v != first) varies = true;
      sum += v;
    }
    if (varies) {
      d.active.push_back(c);
      d.means.push_back(sum / static_cast<double>(rows.size()));
    }
  }
  const std::size_t p = d.active.size() + (intercept ? 1 : 0);
  d.x = Matrix(rows.size(), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = x.row(rows[i]);
    auto dst = d.x.row(i);
    for (std::size_t j = 0; j < d.active.size(); ++j) dst[j] = src[d.active[j]] - d.means[j];
    if (intercept) dst[p - 1] = 1.0;
  }
  return d;
}

bool solve_symmetric(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     double min_rcond) {
  const auto p = static_cast<Eigen::Index>(b.size());
  if (p == 0) return true;
  Eigen::Map<const Eigen::MatrixXd> A(a.data(), p, p);
  Eigen::Map<const Eigen::VectorXd> B(b.data(), p);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) return false;
  if (ldlt.rcond() < min_rcond) return false;
  Eigen::VectorXd x = ldlt.solve(B);
  if (!x.allFinite()) return false;
  for (Eigen::Index i = 0; i < p; ++i) out[static_cast<std::size_t>(i)] = x[i];
  return true;
}

}  // namespace detail

}  // namespace tops

#include "tops/analysis.hpp"
#include "tops/error.hpp"
#include "tops/learners.hpp"

namespace tops {

Predictor fit_kind(LearnerKind kind, const LabeledSet& data, std::span<const std::size_t> rows,
                   const LearnerOptions& opt) {
  switch (kind) {
    case LearnerKind::linear: return fit_linear(data, rows, opt.linear_ridge);
    case LearnerKind::logistic: return fit_logistic(data, rows, opt.logistic);
    case LearnerKind::cox: return fit_cox(data, rows, opt.cox);
  }
  throw Error(ErrorKind::domain, "unknown learner kind");
}

BestFit fit_best(std::span<const LearnerKind> kinds, const LabeledSet& train, std::span<const std::size_t> train_rows,
                 const LabeledSet& validate, std::span<const std::size_t> validate_rows, const LearnerOptions& opt) {
  if (kinds.empty()) throw Error(ErrorKind::domain, "no learner kinds to choose from");
  if (train_rows.empty() || validate_rows.empty())
    throw Error(ErrorKind::domain, "fit_best needs nonempty train and validate sets");

  std::vector<std::size_t> vrows;
  std::vector<std::uint8_t> vlabels;
  for (auto r : validate_rows)
    if (validate.label[r] >= 0) {
      vrows.push_back(r);
      vlabels.push_back(static_cast<std::uint8_t>(validate.label[r]));
    }
  std::size_t pos = 0;
  for (auto l : vlabels) pos += l;
  if (pos == 0 || pos == vlabels.size())
    throw Error(ErrorKind::domain, "validation rows must contain both labels");

  // Canonical kind order makes the tie-break independent of the caller's order.
  std::vector<LearnerKind> ordered;
  for (auto k : kAllLearners)
    for (auto want : kinds)
      if (want == k) {
        ordered.push_back(k);
        break;
      }

  BestFit result;
  std::vector<double> scores(vrows.size());
  std::string failures;
  bool have = false;
  for (auto kind : ordered) {
    Candidate cand{kind, std::nullopt, 1.0, {}};
    try {
      Predictor p = fit_kind(kind, train, train_rows, opt);
      p.predict_rows(validate.features, vrows, scores);
      cand.loss = 1.0 - auc(scores, vlabels);
      cand.predictor = std::move(p);
      if (!have || cand.loss < result.loss) {
        result.predictor = *cand.predictor;
        result.loss = cand.loss;
        have = true;
      }
    } catch (const Error& e) {
      cand.error = e.what();
      failures += std::string(failures.empty() ? "" : "; ") + to_string(kind) + ": " + e.what();
    }
    result.candidates.push_back(std::move(cand));
  }
  if (!have) throw NumericError("every learner failed to fit: " + failures);
  return result;
}

}  // namespace tops

#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <thread>

#include "tops/analysis.hpp"
#include "tops/error.hpp"
#include "tops/tree.hpp"

namespace tops {

void GrowthConfig::validate() const {
  if (min_leaf < 2) throw Error(ErrorKind::usage, "min_leaf must be >= 2");
  if (thresholds_per_feature < 1) throw Error(ErrorKind::usage, "thresholds_per_feature must be >= 1");
  if (!(min_gain >= 0.0)) throw Error(ErrorKind::usage, "min_gain must be >= 0");
  if (learner_kinds.empty()) throw Error(ErrorKind::usage, "at least one learner kind is required");
}

const std::optional<Predictor>& FitCache::get(int node, LearnerKind kind, const LabeledSet& S,
                                              std::span<const std::size_t> rows, const LearnerOptions& opt) {
  const auto key = std::make_pair(node, static_cast<int>(kind));
  auto it = fits_.find(key);
  if (it != fits_.end()) return it->second;
  std::optional<Predictor> fit;
  try {
    fit = fit_kind(kind, S, rows, opt);
  } catch (const Error&) {
    fit.reset();
  }
  return fits_.emplace(key, std::move(fit)).first->second;
}

namespace {

struct SideCandidate {
  LearnerKind kind;
  std::size_t depth;  // of the training node; the new child sits at node depth + 1
  int train_node;     // -1 for the child itself
  const Predictor* predictor;
  SortedScores scores;
};

std::vector<LearnerKind> canonical_kinds(const std::vector<LearnerKind>& kinds) {
  std::vector<LearnerKind> out;
  for (auto k : kAllLearners)
    if (std::find(kinds.begin(), kinds.end(), k) != kinds.end()) out.push_back(k);
  return out;
}

// 0/1-valued columns (binary and one-hot) get the single cut 0.5; any
// other cut would induce the same partition.
bool zero_one(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

}  // namespace

std::optional<SplitDecision> best_split(const TreeOfPredictors& tree, int node_id, const std::vector<NodeRows>& rows,
                                        const LabeledSet& S, const LabeledSet& V1, const GrowthConfig& config,
                                        FitCache& cache) {
  const Node& node = tree.node(node_id);
  if (!node.is_leaf()) return std::nullopt;
  const NodeRows& nr = rows[static_cast<std::size_t>(node_id)];

  std::vector<std::uint8_t> vlabels;
  std::size_t vpos = 0;
  for (auto r : nr.validate) {
    vlabels.push_back(static_cast<std::uint8_t>(V1.label[r]));
    vpos += vlabels.back();
  }
  if (vpos == 0 || vpos == vlabels.size()) return std::nullopt;
  if (nr.train.size() < 2 * config.min_leaf) return std::nullopt;

  const auto kinds = canonical_kinds(config.learner_kinds);
  const auto path = tree.path_to(node_id);

  // Ancestor fits (including the node itself) and their V1(C) scores.
  struct Ancestor {
    LearnerKind kind;
    std::size_t depth;
    int id;
    const Predictor* predictor;
    std::vector<double> scores;  // over nr.validate
  };
  std::vector<Ancestor> ancestors;
  for (auto kind : kinds)
    for (std::size_t d = 0; d < path.size(); ++d) {
      const int a = path[d];
      const auto& fit = cache.get(a, kind, S, rows[static_cast<std::size_t>(a)].train, config.learner);
      if (!fit) continue;
      Ancestor anc{kind, d, a, &*fit, std::vector<double>(nr.validate.size())};
      fit->predict_rows(V1.features, nr.validate, anc.scores);
      ancestors.push_back(std::move(anc));
    }

  const std::size_t width = S.features.cols();
  const std::size_t child_depth = path.size();

  struct Best {
    double loss = 2.0;
    double threshold = 0.0;
    SideChoice below, above;
    bool found = false;
  };

  auto evaluate_feature = [&](std::size_t f) {
    Best best;
    std::vector<double> values;
    values.reserve(nr.train.size());
    for (auto r : nr.train) values.push_back(S.features(r, f));
    const auto cuts =
        candidate_thresholds(values, zero_one(values), config.thresholds_per_feature);

    for (double t : cuts) {
      std::array<std::vector<std::size_t>, 2> train_side, val_rows, val_pos;
      for (auto r : nr.train) train_side[S.features(r, f) < t ? 0 : 1].push_back(r);
      if (train_side[0].size() < config.min_leaf || train_side[1].size() < config.min_leaf) continue;
      for (std::size_t i = 0; i < nr.validate.size(); ++i) {
        const std::size_t s = V1.features(nr.validate[i], f) < t ? 0 : 1;
        val_rows[s].push_back(nr.validate[i]);
        val_pos[s].push_back(i);
      }

      std::array<std::vector<Predictor>, 2> own;  // child fits, kept alive for the pointers below
      std::array<std::vector<SideCandidate>, 2> side;
      for (std::size_t s = 0; s < 2; ++s) {
        own[s].reserve(kinds.size());
        std::vector<std::uint8_t> labels;
        for (auto p : val_pos[s]) labels.push_back(vlabels[p]);
        std::vector<double> buf(val_pos[s].size());
        for (auto kind : kinds) {
          for (const auto& anc : ancestors) {
            if (anc.kind != kind) continue;
            for (std::size_t i = 0; i < val_pos[s].size(); ++i) buf[i] = anc.scores[val_pos[s][i]];
            side[s].push_back({kind, anc.depth, anc.id, anc.predictor, SortedScores::from(buf, labels)});
          }
          try {
            own[s].push_back(fit_kind(kind, S, train_side[s], config.learner));
          } catch (const Error&) {
            continue;
          }
          own[s].back().predict_rows(V1.features, val_rows[s], buf);
          side[s].push_back({kind, child_depth, -1, &own[s].back(), SortedScores::from(buf, labels)});
        }
      }

      for (const auto& a : side[0])
        for (const auto& b : side[1]) {
          const auto value = auc_of_union(a.scores, b.scores);
          if (!value) continue;
          const double loss = 1.0 - *value;
          if (loss < best.loss) {
            best.loss = loss;
            best.threshold = t;
            best.below = {a.kind, a.train_node, *a.predictor};
            best.above = {b.kind, b.train_node, *b.predictor};
            best.found = true;
          }
        }
    }
    return best;
  };

  std::vector<Best> per_feature(width);
  std::vector<std::exception_ptr> errors(width);
  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(width)));
  if (workers <= 1) {
    for (std::size_t f = 0; f < width; ++f) per_feature[f] = evaluate_feature(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t f = next++; f < width; f = next++) {
          try {
            per_feature[f] = evaluate_feature(f);
          } catch (...) {
            errors[f] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Feature-order reduction reproduces the sequential lexicographic tie-break.
  std::optional<SplitDecision> out;
  for (std::size_t f = 0; f < width; ++f) {
    const Best& b = per_feature[f];
    if (!b.found) continue;
    if (!out || b.loss < out->joint_loss) out = SplitDecision{f, b.threshold, b.below, b.above, b.loss};
  }
  return out;
}

TreeOfPredictors grow(const LabeledSet& S, const LabeledSet& V1, const GrowthConfig& config,
                      std::vector<SplitRecord>* log) {
  config.validate();
  if (S.size() == 0 || V1.size() == 0) throw Error(ErrorKind::domain, "growth needs nonempty S and V1");
  if (S.features.cols() != V1.features.cols()) throw Error(ErrorKind::domain, "S and V1 widths differ");

  TreeOfPredictors tree;
  tree.horizon = S.horizon;

  std::vector<NodeRows> rows(1);
  rows[0].train.resize(S.size());
  for (std::size_t i = 0; i < S.size(); ++i) rows[0].train[i] = i;
  rows[0].validate = V1.included();

  const auto kinds = canonical_kinds(config.learner_kinds);
  Node root;
  root.id = 0;
  const auto counts = V1.class_counts();
  if (counts[0] > 0 && counts[1] > 0) {
    root.predictor = fit_best(kinds, S, rows[0].train, V1, rows[0].validate, config.learner).predictor;
  } else {
    // No loss is defined on a single-class V1; keep the first kind that fits.
    std::string failures;
    bool ok = false;
    for (auto kind : kinds) {
      try {
        root.predictor = fit_kind(kind, S, rows[0].train, config.learner);
        ok = true;
        break;
      } catch (const Error& e) {
        failures += std::string(failures.empty() ? "" : "; ") + to_string(kind) + ": " + e.what();
      }
    }
    if (!ok) throw NumericError("every learner failed to fit the root: " + failures);
  }
  root.predictor.trained_on_node = 0;
  root.train_node_id = 0;
  tree.nodes.push_back(root);

  FitCache cache;
  std::deque<int> frontier{0};
  std::vector<std::uint8_t> labels;
  std::vector<double> scores;
  while (!frontier.empty()) {
    const int id = frontier.front();
    frontier.pop_front();
    const NodeRows& nr = rows[static_cast<std::size_t>(id)];

    labels.clear();
    std::size_t pos = 0;
    for (auto r : nr.validate) {
      labels.push_back(static_cast<std::uint8_t>(V1.label[r]));
      pos += labels.back();
    }
    if (pos == 0 || pos == labels.size()) continue;
    scores.resize(nr.validate.size());
    tree.node(id).predictor.predict_rows(V1.features, nr.validate, scores);
    const double node_loss = 1.0 - auc(scores, labels);

    auto decision = best_split(tree, id, rows, S, V1, config, cache);
    if (!decision || !(node_loss - decision->joint_loss > config.min_gain)) continue;

    const int below_id = static_cast<int>(tree.nodes.size());
    const int above_id = below_id + 1;
    const Node parent = tree.node(id);
    NodeRows below_rows, above_rows;
    for (auto r : nr.train)
      (S.features(r, decision->feature) < decision->threshold ? below_rows : above_rows).train.push_back(r);
    for (auto r : nr.validate)
      (V1.features(r, decision->feature) < decision->threshold ? below_rows : above_rows).validate.push_back(r);

    auto make_child = [&](int child_id, Side side, SideChoice& choice) {
      Node child;
      child.id = child_id;
      child.parent = id;
      child.constraints = parent.constraints;
      child.constraints.push_back({decision->feature, decision->threshold, side});
      child.train_node_id = choice.train_node < 0 ? child_id : choice.train_node;
      child.predictor = std::move(choice.predictor);
      child.predictor.trained_on_node = child.train_node_id;
      return child;
    };
    tree.nodes[static_cast<std::size_t>(id)].children =
        Node::Children{decision->feature, decision->threshold, below_id, above_id};
    tree.nodes.push_back(make_child(below_id, Side::below, decision->below));
    tree.nodes.push_back(make_child(above_id, Side::at_or_above, decision->at_or_above));
    rows.push_back(std::move(below_rows));
    rows.push_back(std::move(above_rows));
    frontier.push_back(below_id);
    frontier.push_back(above_id);
    if (log) log->push_back({id, node_loss, decision->joint_loss});
  }
  return tree;
}

}  // namespace tops

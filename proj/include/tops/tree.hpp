#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tops/cohort.hpp"
#include "tops/constraint.hpp"
#include "tops/learners.hpp"

namespace tops {

struct Node {
  struct Children {
    std::size_t feature_index = 0;
    double threshold = 0.0;
    int below = -1;
    int at_or_above = -1;
    bool operator==(const Children&) const = default;
  };

  int id = 0;
  int parent = -1;
  std::vector<Constraint> constraints;  // root-to-node path
  Predictor predictor;
  std::optional<Children> children;
  int train_node_id = 0;  // node whose training rows fitted `predictor`

  bool is_leaf() const noexcept { return !children.has_value(); }
  std::size_t depth() const noexcept { return constraints.size(); }
};

enum class WeightMode { simplex, unconstrained };

/// Fitted tree of predictors for one horizon, plus the encoding metadata
/// needed to score raw requests.
struct TreeOfPredictors {
  std::vector<Node> nodes;  // indexed by id
  int root_id = 0;
  double horizon = 0.0;
  std::string schema_fingerprint;
  std::map<int, std::vector<double>> path_weights;  // leaf id -> weights over its root-to-leaf path
  WeightMode weight_mode = WeightMode::simplex;

  Schema schema;
  std::vector<double> fill_values;                  // per encoded column
  std::vector<std::array<double, 2>> column_ranges;  // training min/max per encoded column

  const Node& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  std::vector<int> leaves() const;
  std::vector<int> path_to(int id) const;  // root first
  std::size_t depth() const;
};

struct GrowthConfig {
  std::size_t min_leaf = 30;
  std::size_t thresholds_per_feature = 9;
  double min_gain = 1e-4;
  std::vector<LearnerKind> learner_kinds{LearnerKind::linear, LearnerKind::logistic, LearnerKind::cox};
  LearnerOptions learner{};
  std::uint64_t seed = 0;  // growth is deterministic; recorded for provenance
  unsigned threads = 1;    // candidate evaluation workers; results do not depend on it

  void validate() const;
};

/// Candidate cut points for one column among `values` (the node's training
/// rows). Binary columns give {0.5}; continuous ones up to `k` type-7
/// quantiles at j/(k+1), deduplicated, each leaving both sides nonempty.
std::vector<double> candidate_thresholds(std::span<const double> values, bool binary, std::size_t k);

struct SideChoice {
  LearnerKind kind = LearnerKind::linear;
  int train_node = -1;  // ancestor id, or -1 for the new child itself
  Predictor predictor;
};

struct SplitDecision {
  std::size_t feature = 0;
  double threshold = 0.0;
  SideChoice below;
  SideChoice at_or_above;
  double joint_loss = 1.0;
};

/// Row memberships of one node.
struct NodeRows {
  std::vector<std::size_t> train;     // indices into S (all rows)
  std::vector<std::size_t> validate;  // labeled indices into V1
};

/// Fits per (node, kind) on that node's training rows, reused across splits.
class FitCache {
 public:
  const std::optional<Predictor>& get(int node, LearnerKind kind, const LabeledSet& S,
                                      std::span<const std::size_t> rows, const LearnerOptions& opt);

 private:
  std::map<std::pair<int, int>, std::optional<Predictor>> fits_;
};

/// Exhaustive search over (feature, threshold, learner and training ancestor
/// per side) minimizing 1 - AUC of the two-sided predictor on V1(node).
std::optional<SplitDecision> best_split(const TreeOfPredictors& tree, int node_id,
                                        const std::vector<NodeRows>& rows, const LabeledSet& S,
                                        const LabeledSet& V1, const GrowthConfig& config, FitCache& cache);

struct SplitRecord {
  int node = 0;
  double node_loss = 0.0;
  double joint_loss = 0.0;
};

/// Grows the tree on S, choosing splits by V1 loss. Weights are left empty.
TreeOfPredictors grow(const LabeledSet& S, const LabeledSet& V1, const GrowthConfig& config,
                      std::vector<SplitRecord>* log = nullptr);

/// Minimizes ||y - A w||^2 over the probability simplex. `a` is rows x k.
std::vector<double> simplex_least_squares(const Matrix& a, std::span<const double> y);
/// Unconstrained least squares; nullopt when singular.
std::optional<std::vector<double>> unconstrained_least_squares(const Matrix& a, std::span<const double> y);

/// Per-leaf path predictions on the labeled V2 rows routed there.
struct LeafDesign {
  Matrix predictions;  // rows x path length
  std::vector<double> labels;
};
std::map<int, LeafDesign> leaf_designs(const TreeOfPredictors& tree, const LabeledSet& V2);

TreeOfPredictors fit_path_weights(TreeOfPredictors tree, const LabeledSet& V2,
                                  WeightMode mode = WeightMode::simplex);

struct Route {
  int leaf = 0;
  std::vector<int> path;  // root first
};

Route route(const TreeOfPredictors& tree, std::span<const double> x);
double predict_overall(const TreeOfPredictors& tree, std::span<const double> x);

nlohmann::json model_to_json(const TreeOfPredictors& tree);
TreeOfPredictors model_from_json(const nlohmann::json& j);
void save_model(const TreeOfPredictors& tree, const std::string& path);
/// When `expected` is given its fingerprint must match the model's.
TreeOfPredictors load_model(const std::string& path, const Schema* expected = nullptr);

}  // namespace tops

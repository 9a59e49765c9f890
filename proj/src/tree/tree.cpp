#include <algorithm>

#include "tops/error.hpp"
#include "tops/kernels.hpp"
#include "tops/tree.hpp"

namespace tops {

std::vector<int> TreeOfPredictors::leaves() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (n.is_leaf()) out.push_back(n.id);
  return out;
}

std::vector<int> TreeOfPredictors::path_to(int id) const {
  std::vector<int> path;
  for (int cur = id; cur >= 0; cur = node(cur).parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t TreeOfPredictors::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth());
  return d;
}

Route route(const TreeOfPredictors& tree, std::span<const double> x) {
  if (tree.nodes.empty()) throw Error(ErrorKind::data, "empty tree");
  const std::size_t width = tree.node(tree.root_id).predictor.width();
  if (x.size() != width)
    throw Error(ErrorKind::data, "feature width " + std::to_string(x.size()) + " does not match model width " +
                                     std::to_string(width));
  Route r;
  int cur = tree.root_id;
  while (true) {
    r.path.push_back(cur);
    const Node& n = tree.node(cur);
    if (n.is_leaf()) break;
    cur = x[n.children->feature_index] < n.children->threshold ? n.children->below : n.children->at_or_above;
  }
  r.leaf = cur;
  return r;
}

double predict_overall(const TreeOfPredictors& tree, std::span<const double> x) {
  const Route r = route(tree, x);
  auto it = tree.path_weights.find(r.leaf);
  if (it == tree.path_weights.end())
    throw Error(ErrorKind::data, "path weights not fitted for leaf " + std::to_string(r.leaf));
  const auto& w = it->second;
  double h = 0.0;
  for (std::size_t i = 0; i < r.path.size(); ++i) h += w[i] * tree.node(r.path[i]).predictor.predict(x);
  return std::clamp(h, 0.0, 1.0);
}

}  // namespace tops

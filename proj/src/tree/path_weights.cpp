#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "tops/error.hpp"
#include "tops/tree.hpp"

namespace tops {
namespace {

double sse(const Matrix& a, std::span<const double> y, std::span<const double> w) {
  double total = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double fit = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) fit += w[c] * a(r, c);
    const double e = y[r] - fit;
    total += e * e;
  }
  return total;
}

// Euclidean projection onto the probability simplex (sort-based).
void project_simplex(std::vector<double>& v) {
  std::vector<double> u(v);
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    const double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  for (auto& x : v) x = std::max(0.0, x - theta);
}

std::vector<double> projected_gradient(const Matrix& a, std::span<const double> y) {
  const std::size_t k = a.cols();
  Eigen::MatrixXd A(a.rows(), k);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < k; ++c) A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(r, c);
  Eigen::Map<const Eigen::VectorXd> Y(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::MatrixXd G = A.transpose() * A;
  const Eigen::VectorXd b = A.transpose() * Y;
  const double lipschitz = std::max(1e-12, G.eigenvalues().real().maxCoeff());
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  for (int it = 0; it < 20000; ++it) {
    Eigen::Map<Eigen::VectorXd> W(w.data(), static_cast<Eigen::Index>(k));
    const Eigen::VectorXd grad = G * W - b;
    std::vector<double> next(k);
    for (std::size_t c = 0; c < k; ++c) next[c] = w[c] - grad[static_cast<Eigen::Index>(c)] / lipschitz;
    project_simplex(next);
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) moved = std::max(moved, std::abs(next[c] - w[c]));
    w = std::move(next);
    if (moved < 1e-14) break;
  }
  return w;
}

}  // namespace

std::vector<double> simplex_least_squares(const Matrix& a, std::span<const double> y) {
  const std::size_t k = a.cols();
  if (k == 0) throw Error(ErrorKind::domain, "simplex least squares needs at least one column");
  if (a.rows() != y.size()) throw Error(ErrorKind::domain, "design and target lengths differ");

  std::vector<double> best(k, 0.0);
  best[0] = 1.0;
  double best_err = sse(a, y, best);
  auto consider = [&](const std::vector<double>& w) {
    const double e = sse(a, y, w);
    if (e < best_err) {
      best_err = e;
      best = w;
    }
  };

  if (k <= 8) {
    // The optimum lies in the relative interior of some face; on that face
    // it solves the equality-constrained problem, so enumerate every face.
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
      std::vector<std::size_t> support;
      for (std::size_t c = 0; c < k; ++c)
        if (mask & (1u << c)) support.push_back(c);
      const auto m = static_cast<Eigen::Index>(support.size());
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
          double g = 0.0;
          for (std::size_t r = 0; r < a.rows(); ++r) g += a(r, support[static_cast<std::size_t>(i)]) * a(r, support[static_cast<std::size_t>(j)]);
          kkt(i, j) = 2.0 * g;
        }
        double b = 0.0;
        for (std::size_t r = 0; r < a.rows(); ++r) b += a(r, support[static_cast<std::size_t>(i)]) * y[r];
        rhs(i) = 2.0 * b;
        kkt(i, m) = 1.0;
        kkt(m, i) = 1.0;
      }
      rhs(m) = 1.0;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd sol = lu.solve(rhs);
      std::vector<double> w(k, 0.0);
      bool feasible = true;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double v = sol(i);
        if (!std::isfinite(v) || v < -1e-12) {
          feasible = false;
          break;
        }
        w[support[static_cast<std::size_t>(i)]] = std::max(0.0, v);
      }
      if (!feasible) continue;
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      if (!(total > 0.0)) continue;
      for (auto& v : w) v /= total;
      consider(w);
    }
  } else {
    consider(projected_gradient(a, y));
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> vertex(k, 0.0);
      vertex[c] = 1.0;
      consider(vertex);
    }
  }
  return best;
}

std::optional<std::vector<double>> unconstrained_least_squares(const Matrix& a, std::span<const double> y) {
  const auto k = static_cast<Eigen::Index>(a.cols());
  Eigen::MatrixXd A(static_cast<Eigen::Index>(a.rows()), k);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(r, c);
  Eigen::Map<const Eigen::VectorXd> Y(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < k) return std::nullopt;
  const Eigen::VectorXd w = qr.solve(Y);
  if (!w.allFinite()) return std::nullopt;
  return std::vector<double>(w.data(), w.data() + k);
}

std::map<int, LeafDesign> leaf_designs(const TreeOfPredictors& tree, const LabeledSet& V2) {
  std::map<int, LeafDesign> out;
  for (int leaf : tree.leaves()) out[leaf].predictions = Matrix(0, tree.path_to(leaf).size());
  std::vector<double> row;
  for (auto r : V2.included()) {
    const auto x = V2.features.row(r);
    const Route rt = route(tree, x);
    row.resize(rt.path.size());
    for (std::size_t i = 0; i < rt.path.size(); ++i) row[i] = tree.node(rt.path[i]).predictor.predict(x);
    auto& d = out[rt.leaf];
    d.predictions.append_row(row);
    d.labels.push_back(V2.label[r]);
  }
  return out;
}

TreeOfPredictors fit_path_weights(TreeOfPredictors tree, const LabeledSet& V2, WeightMode mode) {
  if (V2.size() == 0) throw Error(ErrorKind::domain, "path weights need a nonempty V2");
  tree.weight_mode = mode;
  tree.path_weights.clear();
  for (auto& [leaf, design] : leaf_designs(tree, V2)) {
    const std::size_t len = design.predictions.cols();
    std::vector<double> uniform(len, 1.0 / static_cast<double>(len));
    if (design.predictions.rows() == 0) {
      tree.path_weights[leaf] = uniform;
      continue;
    }
    if (mode == WeightMode::simplex) {
      tree.path_weights[leaf] = simplex_least_squares(design.predictions, design.labels);
    } else {
      auto w = unconstrained_least_squares(design.predictions, design.labels);
      tree.path_weights[leaf] = w ? *w : uniform;
    }
  }
  return tree;
}

}  // namespace tops

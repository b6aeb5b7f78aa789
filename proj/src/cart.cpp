#include "solarcast/cart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "solarcast/error.hpp"
#include "tree_grower.hpp"

namespace solarcast {

namespace {

int depth_of(const std::vector<TreeNode>& nodes, int id) {
  const auto& n = nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return 0;
  return 1 + std::max(depth_of(nodes, n.left), depth_of(nodes, n.right));
}

// Copies the subtree at `id`, turning nodes with collapse[id] into leaves.
int copy_compact(const std::vector<TreeNode>& src, const std::vector<char>& collapse, int id,
                 std::vector<TreeNode>& dst) {
  const int out = static_cast<int>(dst.size());
  dst.push_back(src[static_cast<std::size_t>(id)]);
  if (dst.back().is_leaf() || collapse[static_cast<std::size_t>(id)]) {
    dst.back().feature = -1;
    dst.back().left = dst.back().right = -1;
    dst.back().threshold = 0.0;
    return out;
  }
  const int l = copy_compact(src, collapse, src[static_cast<std::size_t>(id)].left, dst);
  const int r = copy_compact(src, collapse, src[static_cast<std::size_t>(id)].right, dst);
  dst[static_cast<std::size_t>(out)].left = l;
  dst[static_cast<std::size_t>(out)].right = r;
  return out;
}

struct SubtreeStats {
  double sse = 0.0;
  int leaves = 0;
};

SubtreeStats subtree_stats(const std::vector<TreeNode>& nodes, int id,
                           std::vector<SubtreeStats>& out) {
  const auto& n = nodes[static_cast<std::size_t>(id)];
  SubtreeStats s;
  if (n.is_leaf()) {
    s = {n.sse, 1};
  } else {
    const auto l = subtree_stats(nodes, n.left, out);
    const auto r = subtree_stats(nodes, n.right, out);
    s = {l.sse + r.sse, l.leaves + r.leaves};
  }
  out[static_cast<std::size_t>(id)] = s;
  return s;
}

}  // namespace

int TreeModel::depth() const { return nodes.empty() ? 0 : depth_of(nodes, 0); }

int TreeModel::leaf_count() const {
  return static_cast<int>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double TreeModel::predict(const double* row) const {
  int id = 0;
  while (true) {
    const auto& n = nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf()) return n.value;
    id = row[n.feature] < n.threshold ? n.left : n.right;
  }
}

double TreeModel::training_sse() const {
  double s = 0.0;
  for (const auto& n : nodes)
    if (n.is_leaf()) s += n.sse;
  return s;
}

void CartParams::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ValidationError("CART alpha must be a finite value >= 0");
  if (max_depth < 1) throw ValidationError("CART max_depth must be positive");
  if (min_n < 1) throw ValidationError("CART min_n must be positive");
}

TreeModel fit_tree(const Eigen::Ref<const Eigen::MatrixXd>& X,
                   const Eigen::Ref<const Eigen::VectorXd>& y, const CartParams& params,
                   std::span<const double> weights) {
  params.validate();
  const Eigen::Index n = X.rows();
  if (n == 0 || X.cols() == 0) throw ValidationError("fit_tree: empty data");
  if (y.size() != n) throw ValidationError("fit_tree: X and y differ in length");
  if (!weights.empty() && static_cast<Eigen::Index>(weights.size()) != n)
    throw ValidationError("fit_tree: weights and y differ in length");
  if (!X.allFinite() || !y.allFinite()) throw ValidationError("fit_tree: non-finite input");

  detail::GrowerRows rows;
  rows.grad.resize(static_cast<std::size_t>(n));
  rows.hess.resize(static_cast<std::size_t>(n));
  rows.count.resize(static_cast<std::size_t>(n));
  rows.sq.resize(static_cast<std::size_t>(n));
  double sw = 0.0, swy = 0.0, swyy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    if (w < 0.0 || !std::isfinite(w)) throw ValidationError("fit_tree: weights must be >= 0");
    sw += w;
    swy += w * y[i];
    swyy += w * y[i] * y[i];
  }
  if (!(sw > 0.0)) throw ValidationError("fit_tree: all weights are zero");
  const double mean = swy / sw;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double w = weights.empty() ? 1.0 : weights[k];
    const double c = y[i] - mean;
    rows.grad[k] = -w * c;
    rows.hess[k] = w;
    rows.count[k] = w > 0.0 ? 1 : 0;
    rows.sq[k] = w * c * c;
  }

  detail::GrowerParams gp;
  gp.max_depth = params.max_depth;
  gp.min_n = params.min_n;
  gp.gain_floor = 1e-12 * swyy;

  const detail::SortedColumns sorted(X);
  TreeModel tree = detail::grow_tree(X, sorted, rows, gp, mean, nullptr);
  if (params.alpha > 0.0) tree = prune(tree, params.alpha * tree.nodes[0].sse);
  tree.alpha = params.alpha;
  return tree;
}

double predict_row(const TreeModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (x.size() != model.n_features)
    throw ValidationError("predict_row: expected " + std::to_string(model.n_features) +
                          " features, got " + std::to_string(x.size()));
  const Eigen::RowVectorXd row = x;
  return model.predict(row.data());
}

Eigen::VectorXd predict_tree(const TreeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() != model.n_features)
    throw ValidationError("predict_tree: expected " + std::to_string(model.n_features) +
                          " features, got " + std::to_string(X.cols()));
  Eigen::VectorXd out(X.rows());
  Eigen::RowVectorXd row(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    row = X.row(i);
    out[i] = model.predict(row.data());
  }
  return out;
}

std::vector<TreeModel> pruning_sequence(const TreeModel& model) {
  std::vector<TreeModel> seq{model};
  while (!seq.back().nodes[0].is_leaf()) {
    const auto& cur = seq.back();
    std::vector<SubtreeStats> stats(cur.nodes.size());
    subtree_stats(cur.nodes, 0, stats);
    double weakest = std::numeric_limits<double>::infinity();
    std::vector<double> link(cur.nodes.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < cur.nodes.size(); ++i) {
      if (cur.nodes[i].is_leaf()) continue;
      link[i] = (cur.nodes[i].sse - stats[i].sse) / (stats[i].leaves - 1);
      weakest = std::min(weakest, link[i]);
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(weakest));
    std::vector<char> collapse(cur.nodes.size(), 0);
    for (std::size_t i = 0; i < cur.nodes.size(); ++i)
      collapse[i] = link[i] <= weakest + tol ? 1 : 0;
    TreeModel next;
    next.n_features = cur.n_features;
    next.alpha = cur.alpha;
    copy_compact(cur.nodes, collapse, 0, next.nodes);
    seq.push_back(std::move(next));
  }
  return seq;
}

TreeModel prune(const TreeModel& model, double penalty) {
  if (model.nodes.empty()) throw ValidationError("prune: empty tree");
  if (penalty <= 0.0) return model;
  const auto seq = pruning_sequence(model);
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double cost = seq[i].training_sse() + penalty * seq[i].leaf_count();
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return seq[best];
}

nlohmann::json to_json(const TreeModel& model) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : model.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"value", n.value},
                     {"cover", n.cover},
                     {"sse", n.sse},
                     {"count", n.count}});
  }
  return {{"n_features", model.n_features}, {"alpha", model.alpha}, {"nodes", std::move(nodes)}};
}

TreeModel tree_from_json(const nlohmann::json& j) {
  TreeModel m;
  m.n_features = j.at("n_features").get<int>();
  m.alpha = j.value("alpha", 0.0);
  for (const auto& n : j.at("nodes")) {
    TreeNode t;
    t.feature = n.at("feature").get<int>();
    t.threshold = n.value("threshold", 0.0);
    t.left = n.value("left", -1);
    t.right = n.value("right", -1);
    t.value = n.at("value").get<double>();
    t.cover = n.value("cover", 0.0);
    t.sse = n.value("sse", 0.0);
    t.count = n.value("count", 0);
    m.nodes.push_back(t);
  }
  const int size = static_cast<int>(m.nodes.size());
  if (size == 0) throw ValidationError("tree JSON has no nodes");
  for (const auto& t : m.nodes) {
    if (t.is_leaf()) continue;
    if (t.left <= 0 || t.left >= size || t.right <= 0 || t.right >= size ||
        t.feature >= m.n_features)
      throw ValidationError("tree JSON has an inconsistent node");
  }
  return m;
}

}  // namespace solarcast

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

namespace solarcast {

/// One node of a binary regression tree. `feature < 0` marks a leaf.
///
/// Rows with `x[feature] < threshold` go left. `value` is the node's
/// prediction (kept on internal nodes too, so pruning can collapse them),
/// `cover` the sum of training weights that reached the node and `sse`
/// their weighted squared error around `value`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;
  double sse = 0.0;
  int count = 0;

  bool is_leaf() const { return feature < 0; }
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // root at index 0
  int n_features = 0;
  double alpha = 0.0;

  int depth() const;
  int leaf_count() const;
  double predict(const double* row) const;
  /// Sum of leaf SSE, i.e. the training error of the tree.
  double training_sse() const;
};

struct CartParams {
  double alpha = 0.0;  // cost complexity, relative to the root SSE
  int max_depth = 30;
  int min_n = 1;       // minimum training rows in every leaf

  void validate() const;
};

/// Greedy CART with sum-of-squares loss followed by weakest-link pruning.
///
/// Splits maximise the weighted SSE reduction over all (feature, midpoint)
/// candidates, ties going to the lowest feature index then the smallest
/// threshold. Growth stops at `max_depth`, when no split keeps `min_n` rows
/// on both sides, or when no split reduces SSE. The grown tree is then
/// pruned with penalty `alpha * root SSE` per leaf.
TreeModel fit_tree(const Eigen::Ref<const Eigen::MatrixXd>& X,
                   const Eigen::Ref<const Eigen::VectorXd>& y, const CartParams& params,
                   std::span<const double> weights = {});

double predict_row(const TreeModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);
Eigen::VectorXd predict_tree(const TreeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);

/// Weakest-link pruning sequence T0 (the input) ... root-only tree.
std::vector<TreeModel> pruning_sequence(const TreeModel& model);

/// Member of the pruning sequence minimising SSE + penalty * leaves
/// (largest tree on ties). `penalty` is in SSE units.
TreeModel prune(const TreeModel& model, double penalty);

nlohmann::json to_json(const TreeModel& model);
TreeModel tree_from_json(const nlohmann::json& j);

}  // namespace solarcast

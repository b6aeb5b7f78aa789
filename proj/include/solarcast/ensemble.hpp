#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "solarcast/cart.hpp"

namespace solarcast {

struct ForestParams {
  int n_trees = 600;
  int mtry = 0;   // features per split; 0 = max(1, p / 3)
  int min_n = 5;  // minimum bootstrap rows per leaf
  std::uint64_t seed = 0;
  bool reuse_seed = false;  // every tree draws the same bootstrap (tests only)
  int workers = 1;

  void validate(int n_features) const;
  int effective_mtry(int n_features) const;
};

struct BoostParams {
  int n_trees = 600;
  double eta = 0.1;
  double gamma = 0.0;
  int max_depth = 6;
  int min_n = 1;
  int mtry = 0;  // features per split; 0 = all
  double subsample = 1.0;
  double lambda = 1.0;
  std::uint64_t seed = 0;

  void validate(int n_features) const;
};

enum class ModelKind { tree, forest, boosted, linear };

std::string_view model_kind_name(ModelKind kind);

/// A fitted predictor of any supported kind.
///
/// forest:  mean of tree predictions.
/// boosted: base_score + tree_weight * sum of tree predictions.
/// tree:    the single tree.
/// linear:  intercept + coefficients . x.
struct EnsembleModel {
  ModelKind kind = ModelKind::linear;
  int n_features = 0;
  std::vector<TreeModel> trees;
  double tree_weight = 1.0;
  double base_score = 0.0;
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd feature_means;  // training means, used for linear attributions
  std::vector<std::string> feature_names;
  nlohmann::json params;  // hyperparameters as fitted, for the record
};

/// Training RMSE after each boosting round (index 0 = base score only).
using BoostTrace = std::vector<double>;

EnsembleModel fit_forest(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const ForestParams& params);

EnsembleModel fit_boosted(const Eigen::Ref<const Eigen::MatrixXd>& X,
                          const Eigen::Ref<const Eigen::VectorXd>& y, const BoostParams& params,
                          BoostTrace* trace = nullptr);

/// Single CART wrapped as a model.
EnsembleModel fit_single_tree(const Eigen::Ref<const Eigen::MatrixXd>& X,
                              const Eigen::Ref<const Eigen::VectorXd>& y,
                              const CartParams& params);

/// Least squares with intercept. Rank-deficient designs use the minimum-norm
/// solution and emit a warning.
EnsembleModel fit_linear(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y);

Eigen::VectorXd predict(const EnsembleModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X);

nlohmann::json to_json(const EnsembleModel& model);
EnsembleModel model_from_json(const nlohmann::json& j);

}  // namespace solarcast

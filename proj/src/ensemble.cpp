#include "solarcast/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "solarcast/error.hpp"
#include "solarcast/parallel.hpp"
#include "tree_grower.hpp"

namespace solarcast {

namespace {

void check_xy(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
              const char* who) {
  if (X.rows() == 0) throw ValidationError(std::string(who) + ": empty data");
  if (y.size() != X.rows()) throw ValidationError(std::string(who) + ": X and y differ in length");
  if (!X.allFinite() || !y.allFinite())
    throw ValidationError(std::string(who) + ": non-finite input");
}

Eigen::RowVectorXd to_row(const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::Index i) {
  return X.row(i);
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::tree: return "tree";
    case ModelKind::forest: return "forest";
    case ModelKind::boosted: return "boosted";
    case ModelKind::linear: return "linear";
  }
  return "?";
}

void ForestParams::validate(int n_features) const {
  if (n_trees < 1) throw ValidationError("forest n_trees must be positive");
  if (min_n < 1) throw ValidationError("forest min_n must be positive");
  const int m = effective_mtry(n_features);
  if (m < 1 || m > n_features)
    throw ValidationError("forest mtry must lie in [1, " + std::to_string(n_features) + "]");
}

int ForestParams::effective_mtry(int n_features) const {
  return mtry == 0 ? std::max(1, n_features / 3) : mtry;
}

void BoostParams::validate(int n_features) const {
  if (n_trees < 0) throw ValidationError("boosting n_trees must be >= 0");
  if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("boosting eta must lie in (0, 1]");
  if (!(gamma >= 0.0)) throw ValidationError("boosting gamma must be >= 0");
  if (max_depth < 1) throw ValidationError("boosting max_depth must be positive");
  if (min_n < 1) throw ValidationError("boosting min_n must be positive");
  if (mtry < 0 || mtry > n_features)
    throw ValidationError("boosting mtry must lie in [1, " + std::to_string(n_features) + "]");
  if (!(subsample > 0.0 && subsample <= 1.0))
    throw ValidationError("boosting subsample must lie in (0, 1]");
  if (!(lambda >= 0.0)) throw ValidationError("boosting lambda must be >= 0");
}

EnsembleModel fit_forest(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const ForestParams& params) {
  check_xy(X, y, "fit_forest");
  const int p = static_cast<int>(X.cols());
  params.validate(p);
  const auto n = static_cast<std::size_t>(X.rows());
  const double mean = y.mean();

  const detail::SortedColumns sorted(X);
  detail::GrowerParams gp;
  gp.max_depth = 64;
  gp.min_n = params.min_n;
  gp.mtry = params.effective_mtry(p) == p ? 0 : params.effective_mtry(p);
  gp.gain_floor = 1e-12 * y.squaredNorm();

  EnsembleModel model;
  model.kind = ModelKind::forest;
  model.n_features = p;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  model.tree_weight = 1.0 / params.n_trees;

  parallel_for(model.trees.size(), params.workers, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(params.seed, params.reuse_seed ? 0 : t));
    detail::GrowerRows rows;
    rows.count.assign(n, 0);
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) ++rows.count[draw(rng)];
    rows.grad.resize(n);
    rows.hess.resize(n);
    rows.sq.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = rows.count[i];
      const double c = y[static_cast<Eigen::Index>(i)] - mean;
      rows.grad[i] = -w * c;
      rows.hess[i] = w;
      rows.sq[i] = w * c * c;
    }
    model.trees[t] = detail::grow_tree(X, sorted, rows, gp, mean, &rng);
  });

  model.params = {{"n_trees", params.n_trees},
                  {"mtry", params.effective_mtry(p)},
                  {"min_n", params.min_n},
                  {"seed", params.seed}};
  return model;
}

EnsembleModel fit_boosted(const Eigen::Ref<const Eigen::MatrixXd>& X,
                          const Eigen::Ref<const Eigen::VectorXd>& y, const BoostParams& params,
                          BoostTrace* trace) {
  check_xy(X, y, "fit_boosted");
  const int p = static_cast<int>(X.cols());
  params.validate(p);
  const auto n = static_cast<std::size_t>(X.rows());

  EnsembleModel model;
  model.kind = ModelKind::boosted;
  model.n_features = p;
  model.base_score = y.mean();
  model.tree_weight = params.eta;

  const detail::SortedColumns sorted(X);
  detail::GrowerParams gp;
  gp.max_depth = params.max_depth;
  gp.min_n = params.min_n;
  gp.mtry = params.mtry == p ? 0 : params.mtry;
  gp.lambda = params.lambda;
  gp.gamma = params.gamma;
  gp.boosting_gain = true;

  std::mt19937_64 rng(derive_seed(params.seed, 0));
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(X.rows(), model.base_score);
  if (trace) trace->push_back(std::sqrt((pred - y).squaredNorm() / static_cast<double>(n)));

  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));
  std::vector<std::size_t> perm(n);
  detail::GrowerRows rows;
  rows.grad.resize(n);
  rows.hess.assign(n, 1.0);
  rows.count.assign(n, 1);
  Eigen::RowVectorXd row(p);

  for (int k = 0; k < params.n_trees; ++k) {
    if (take < n) {
      std::iota(perm.begin(), perm.end(), 0);
      std::fill(rows.count.begin(), rows.count.end(), 0);
      for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(perm[i], perm[pick(rng)]);
        rows.count[perm[i]] = 1;
      }
    }
    double g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      rows.grad[i] = pred[ii] - y[ii];
      rows.hess[i] = rows.count[i] > 0 ? 1.0 : 0.0;
      g2 += rows.grad[i] * rows.grad[i];
    }
    gp.gain_floor = 1e-14 * g2;
    TreeModel tree = detail::grow_tree(X, sorted, rows, gp, 0.0, &rng);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      row = X.row(i);
      pred[i] += params.eta * tree.predict(row.data());
    }
    model.trees.push_back(std::move(tree));
    if (trace) trace->push_back(std::sqrt((pred - y).squaredNorm() / static_cast<double>(n)));
  }

  model.params = {{"n_trees", params.n_trees}, {"eta", params.eta},
                  {"gamma", params.gamma},     {"max_depth", params.max_depth},
                  {"min_n", params.min_n},     {"mtry", params.mtry == 0 ? p : params.mtry},
                  {"subsample", params.subsample}, {"lambda", params.lambda},
                  {"seed", params.seed}};
  return model;
}

EnsembleModel fit_single_tree(const Eigen::Ref<const Eigen::MatrixXd>& X,
                              const Eigen::Ref<const Eigen::VectorXd>& y,
                              const CartParams& params) {
  check_xy(X, y, "fit_tree");
  EnsembleModel model;
  model.kind = ModelKind::tree;
  model.n_features = static_cast<int>(X.cols());
  model.trees.push_back(fit_tree(X, y, params));
  model.params = {{"alpha", params.alpha},
                  {"max_depth", params.max_depth},
                  {"min_n", params.min_n}};
  return model;
}

EnsembleModel fit_linear(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y) {
  check_xy(X, y, "fit_linear");
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();

  EnsembleModel model;
  model.kind = ModelKind::linear;
  model.n_features = static_cast<int>(p);
  model.feature_means = X.colwise().mean().transpose();

  // Centre, solve for slopes, recover the intercept; equivalent to fitting [1 X]
  // but better conditioned.
  const Eigen::MatrixXd Xc = X.rowwise() - model.feature_means.transpose();
  const double ymean = y.mean();
  if (p == 0) {
    model.coefficients.resize(0);
    model.intercept = ymean;
    return model;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xc);
  const Eigen::Index full = std::min(n - 1, p);
  if (cod.rank() < full || cod.rank() < p)
    warn("fit_linear: design matrix is rank deficient (rank " + std::to_string(cod.rank()) +
         " of " + std::to_string(p) + "); using the minimum-norm solution");
  model.coefficients = cod.solve((y.array() - ymean).matrix());
  model.intercept = ymean - model.feature_means.dot(model.coefficients);
  return model;
}

Eigen::VectorXd predict(const EnsembleModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() != model.n_features)
    throw ValidationError("predict: expected " + std::to_string(model.n_features) +
                          " features, got " + std::to_string(X.cols()));
  const Eigen::Index n = X.rows();
  if (model.kind == ModelKind::linear) {
    if (model.n_features == 0) return Eigen::VectorXd::Constant(n, model.intercept);
    return (X * model.coefficients).array() + model.intercept;
  }
  Eigen::VectorXd out(n);
  Eigen::RowVectorXd row(X.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    row = to_row(X, i);
    double s = 0.0;
    for (const auto& t : model.trees) s += t.predict(row.data());
    switch (model.kind) {
      case ModelKind::forest: out[i] = s / static_cast<double>(model.trees.size()); break;
      case ModelKind::boosted: out[i] = model.base_score + model.tree_weight * s; break;
      default: out[i] = s; break;
    }
  }
  return out;
}

nlohmann::json to_json(const EnsembleModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) trees.push_back(to_json(t));
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"kind", model_kind_name(model.kind)},
          {"n_features", model.n_features},
          {"feature_names", model.feature_names},
          {"tree_weight", model.tree_weight},
          {"base_score", model.base_score},
          {"intercept", model.intercept},
          {"coefficients", vec(model.coefficients)},
          {"feature_means", vec(model.feature_means)},
          {"params", model.params},
          {"trees", std::move(trees)}};
}

EnsembleModel model_from_json(const nlohmann::json& j) {
  EnsembleModel m;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "tree") m.kind = ModelKind::tree;
  else if (kind == "forest") m.kind = ModelKind::forest;
  else if (kind == "boosted") m.kind = ModelKind::boosted;
  else if (kind == "linear") m.kind = ModelKind::linear;
  else throw ValidationError("unknown model kind '" + kind + "'");
  m.n_features = j.at("n_features").get<int>();
  m.feature_names = j.value("feature_names", std::vector<std::string>{});
  m.tree_weight = j.value("tree_weight", 1.0);
  m.base_score = j.value("base_score", 0.0);
  m.intercept = j.value("intercept", 0.0);
  auto vec = [](const std::vector<double>& v) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  m.coefficients = vec(j.value("coefficients", std::vector<double>{}));
  m.feature_means = vec(j.value("feature_means", std::vector<double>{}));
  m.params = j.value("params", nlohmann::json::object());
  for (const auto& t : j.value("trees", nlohmann::json::array())) m.trees.push_back(tree_from_json(t));
  if (m.kind == ModelKind::linear && m.coefficients.size() != m.n_features)
    throw ValidationError("linear model JSON: coefficient count does not match n_features");
  if (m.kind != ModelKind::linear && m.trees.empty() && m.kind != ModelKind::boosted)
    throw ValidationError("tree model JSON has no trees");
  return m;
}

}  // namespace solarcast

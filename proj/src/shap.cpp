#include "solarcast/shap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "solarcast/csv.hpp"
#include "solarcast/error.hpp"
#include "solarcast/parallel.hpp"

namespace solarcast {

namespace {

struct PathElement {
  int feature = -1;
  double zero = 0.0;
  double one = 0.0;
  double weight = 0.0;
};

void extend_path(PathElement* path, int depth, double zero, double one, int feature) {
  path[depth] = {feature, zero, one, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].weight += one * path[i].weight * (i + 1) / (depth + 1.0);
    path[i].weight = zero * path[i].weight * (depth - i) / (depth + 1.0);
  }
}

void unwind_path(PathElement* path, int depth, int index) {
  const double one = path[index].one;
  const double zero = path[index].zero;
  double next = path[depth].weight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next * (depth + 1.0) / ((i + 1.0) * one);
      next = tmp - path[i].weight * zero * (depth - i) / (depth + 1.0);
    } else {
      path[i].weight = path[i].weight * (depth + 1.0) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero = path[i + 1].zero;
    path[i].one = path[i + 1].one;
  }
}

double unwound_sum(const PathElement* path, int depth, int index) {
  const double one = path[index].one;
  const double zero = path[index].zero;
  double next = path[depth].weight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = next * (depth + 1.0) / ((i + 1.0) * one);
      total += tmp;
      next = path[i].weight - tmp * zero * (depth - i) / (depth + 1.0);
    } else if (zero != 0.0) {
      total += path[i].weight / zero / ((depth - i) / (depth + 1.0));
    }
  }
  return total;
}

struct Walker {
  const TreeModel& tree;
  const double* x;
  double* phi;
  double scale;

  void recurse(int node, PathElement* parent_path, int depth, double zero, double one,
               int feature) const {
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth + 1, path);
    extend_path(path, depth, zero, one, feature);

    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
    if (nd.is_leaf()) {
      for (int i = 1; i <= depth; ++i) {
        const double w = unwound_sum(path, depth, i);
        phi[path[i].feature] += scale * w * (path[i].one - path[i].zero) * nd.value;
      }
      return;
    }
    const TreeNode& l = tree.nodes[static_cast<std::size_t>(nd.left)];
    const TreeNode& r = tree.nodes[static_cast<std::size_t>(nd.right)];
    if (!(nd.cover > 0.0) || !(l.cover >= 0.0) || !(r.cover >= 0.0))
      throw ExplainError("tree node without cover counts; refit the model so covers are recorded");
    const bool go_left = x[nd.feature] < nd.threshold;
    const int hot = go_left ? nd.left : nd.right;
    const int cold = go_left ? nd.right : nd.left;
    const double hot_zero = (go_left ? l.cover : r.cover) / nd.cover;
    const double cold_zero = (go_left ? r.cover : l.cover) / nd.cover;

    double in_zero = 1.0, in_one = 1.0;
    int index = 0;
    for (; index <= depth; ++index)
      if (path[index].feature == nd.feature) break;
    if (index != depth + 1) {
      in_zero = path[index].zero;
      in_one = path[index].one;
      unwind_path(path, depth, index);
      depth -= 1;
    }
    recurse(hot, path, depth + 1, hot_zero * in_zero, in_one, nd.feature);
    recurse(cold, path, depth + 1, cold_zero * in_zero, 0.0, nd.feature);
  }
};

double expected_value(const TreeModel& tree, int node) {
  const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
  if (nd.is_leaf()) return nd.value;
  const double cl = tree.nodes[static_cast<std::size_t>(nd.left)].cover;
  const double cr = tree.nodes[static_cast<std::size_t>(nd.right)].cover;
  if (!(cl + cr > 0.0))
    throw ExplainError("tree node without cover counts; refit the model so covers are recorded");
  return (cl * expected_value(tree, nd.left) + cr * expected_value(tree, nd.right)) / (cl + cr);
}

Eigen::VectorXd mean_abs(const Eigen::MatrixXd& v) {
  if (v.rows() == 0) return Eigen::VectorXd::Zero(v.cols());
  return v.cwiseAbs().colwise().mean().transpose();
}

}  // namespace

double tree_shap_row(const TreeModel& tree, const double* x, double* phi, double scale) {
  if (tree.nodes.empty()) throw ExplainError("empty tree");
  if (!(tree.nodes[0].cover > 0.0))
    throw ExplainError("tree root without cover counts; refit the model so covers are recorded");
  const int d = tree.depth();
  std::vector<PathElement> storage(static_cast<std::size_t>((d + 2) * (d + 3) / 2));
  Walker{tree, x, phi, scale}.recurse(0, storage.data(), 0, 1.0, 1.0, -1);
  return expected_value(tree, 0);
}

ShapMatrix tree_shap(const EnsembleModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                     int workers) {
  if (X.cols() != model.n_features)
    throw ValidationError("tree_shap: model expects " + std::to_string(model.n_features) +
                          " features, got " + std::to_string(X.cols()));
  ShapMatrix out;
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();

  if (model.kind == ModelKind::linear) {
    if (model.feature_means.size() != p)
      throw ExplainError("linear model lacks training means; refit to record them");
    out.base = model.intercept + model.coefficients.dot(model.feature_means);
    out.values = (X.rowwise() - model.feature_means.transpose()).array().rowwise() *
                 model.coefficients.transpose().array();
    return out;
  }
  if (model.trees.empty()) throw ExplainError("model has no trees");

  double scale = 1.0;
  double offset = 0.0;
  switch (model.kind) {
    case ModelKind::forest: scale = 1.0 / static_cast<double>(model.trees.size()); break;
    case ModelKind::boosted:
      scale = model.tree_weight;
      offset = model.base_score;
      break;
    default: break;
  }

  double base = 0.0;
  for (const auto& t : model.trees) {
    if (t.nodes.empty() || !(t.nodes[0].cover > 0.0))
      throw ExplainError("tree root without cover counts; refit the model so covers are recorded");
    base += scale * expected_value(t, 0);
  }
  out.base = offset + base;

  // Row-major scratch so each row's attributions are contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> phi =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(n, p);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    const Eigen::RowVectorXd row = X.row(static_cast<Eigen::Index>(i));
    double* dst = phi.data() + static_cast<Eigen::Index>(i) * p;
    for (const auto& t : model.trees) tree_shap_row(t, row.data(), dst, scale);
  });
  out.values = phi;
  return out;
}

ShapReport single_report(const ShapMatrix& shap, const std::vector<FeatureInfo>& columns,
                         Date month) {
  if (static_cast<std::size_t>(shap.values.cols()) != columns.size())
    throw ValidationError("single_report: column metadata does not match the matrix");
  ShapReport r;
  r.columns = columns;
  MonthlyShap m;
  m.month = month;
  m.rows = static_cast<std::size_t>(shap.values.rows());
  m.base = shap.base;
  m.mean_abs = mean_abs(shap.values);
  r.overall = m.mean_abs;
  r.months.push_back(std::move(m));
  return r;
}

ShapReport monthly_schedule(const ModelFactory& factory, const WindowPlan& plan,
                            const FeatureMatrix& features,
                            std::span<const std::size_t> eligible_rows,
                            const ShapScheduleOptions& options,
                            std::vector<ShapMatrix>* matrices) {
  if (plan.slices.empty()) throw PlanningError("monthly_schedule needs a non-empty plan");
  const Date period_start = plan.slices.front().eval_start;
  const Date period_end = plan.slices.back().eval_end;

  std::map<Date, std::size_t> first_slice;
  for (std::size_t s = 0; s < plan.slices.size(); ++s)
    first_slice.emplace(first_of_month(plan.slices[s].eval_start), s);

  std::map<Date, std::vector<std::size_t>> month_rows;
  for (std::size_t r : eligible_rows) {
    const Date d = features.timestamps.at(r).local_date();
    if (d < period_start || d > period_end) continue;
    month_rows[first_of_month(d)].push_back(r);
  }

  ShapReport report;
  report.columns = features.columns;
  report.overall = Eigen::VectorXd::Zero(features.cols());
  if (matrices) matrices->clear();
  for (const auto& [month, slice] : first_slice) {
    auto it = month_rows.find(month);
    if (it == month_rows.end() || it->second.empty()) {
      warn("SHAP: no rows for " + format_date(month) + ", month skipped");
      continue;
    }
    std::vector<std::size_t> rows = it->second;
    std::sort(rows.begin(), rows.end());
    const std::size_t cap = options.max_rows_per_month;
    if (cap > 0 && rows.size() > cap) {
      std::vector<std::size_t> kept;
      for (std::size_t i = 0; i < cap; ++i) kept.push_back(rows[i * rows.size() / cap]);
      rows = std::move(kept);
    }
    const EnsembleModel model = factory(plan.slices[slice]);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      X.row(static_cast<Eigen::Index>(i)) = features.values.row(static_cast<Eigen::Index>(rows[i]));
    ShapMatrix shap = tree_shap(model, X, options.workers);
    MonthlyShap m;
    m.month = month;
    m.rows = rows.size();
    m.base = shap.base;
    m.mean_abs = mean_abs(shap.values);
    m.row_index = rows;
    report.overall += m.mean_abs;
    report.months.push_back(std::move(m));
    if (matrices) matrices->push_back(std::move(shap));
  }
  if (!report.months.empty()) report.overall /= static_cast<double>(report.months.size());
  return report;
}

ShapViews aggregate_views(const ShapReport& report) {
  ShapViews v;
  std::map<int, double> loc;
  std::map<MetVariable, std::pair<double, int>> var;
  std::vector<std::pair<std::string, double>> angles;
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    const auto& info = report.columns[c];
    const double value = report.overall.size() > 0 ? report.overall[static_cast<Eigen::Index>(c)] : 0.0;
    if (info.kind != FeatureInfo::Kind::meteo) {
      angles.emplace_back(info.name(), value);
      continue;
    }
    loc[info.location] += value;
    auto& acc = var[info.variable];
    acc.first += value;
    acc.second += 1;
    v.heatmap.push_back({info.location, info.variable, value});
  }
  v.locations.assign(loc.begin(), loc.end());
  for (MetVariable mv : kAllVariables) {
    const auto it = var.find(mv);
    if (it != var.end())
      v.features.emplace_back(std::string(variable_name(mv)), it->second.first / it->second.second);
  }
  v.features.insert(v.features.end(), angles.begin(), angles.end());
  return v;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  return out;
}

std::string location_label(int id) { return id < 0 ? "avg" : std::to_string(id); }

}  // namespace

void write_views(const ShapReport& report, const ShapViews& views,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "location_importance.csv");
    out << "location,importance\n";
    for (const auto& [id, v] : views.locations) out << location_label(id) << ',' << format_number(v) << '\n';
  }
  {
    std::vector<std::size_t> order(views.features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return views.features[a].second > views.features[b].second;
    });
    auto out = open_out(dir / "feature_importance.csv");
    out << "feature,importance,rank\n";
    for (std::size_t r = 0; r < order.size(); ++r)
      out << views.features[order[r]].first << ',' << format_number(views.features[order[r]].second)
          << ',' << r + 1 << '\n';
  }
  {
    auto out = open_out(dir / "heatmap.csv");
    out << "location,variable,value\n";
    for (const auto& h : views.heatmap)
      out << location_label(h.location) << ',' << variable_name(h.variable) << ','
          << format_number(h.value) << '\n';
  }
  {
    auto out = open_out(dir / "monthly.csv");
    out << "month,rows,base";
    for (const auto& c : report.columns) out << ',' << c.name();
    out << '\n';
    for (const auto& m : report.months) {
      out << format_date(m.month) << ',' << m.rows << ',' << format_number(m.base);
      for (Eigen::Index c = 0; c < m.mean_abs.size(); ++c) out << ',' << format_number(m.mean_abs[c]);
      out << '\n';
    }
  }
}

void write_shap_rows(const ShapMatrix& shap, std::span<const Timestamp> timestamps,
                     const std::vector<std::string>& names, const std::filesystem::path& path) {
  if (timestamps.size() != static_cast<std::size_t>(shap.values.rows()) ||
      names.size() != static_cast<std::size_t>(shap.values.cols()))
    throw ValidationError("write_shap_rows: shape mismatch");
  auto out = open_out(path);
  out << "timestamp,base";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < shap.values.rows(); ++i) {
    out << format_timestamp(timestamps[static_cast<std::size_t>(i)]) << ',' << format_number(shap.base);
    for (Eigen::Index c = 0; c < shap.values.cols(); ++c) out << ',' << format_number(shap.values(i, c));
    out << '\n';
  }
}

}  // namespace solarcast

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "solarcast/cart.hpp"
#include "solarcast/dataset.hpp"
#include "solarcast/ensemble.hpp"
#include "solarcast/harness.hpp"

namespace solarcast {

/// Attributions: rows x features, plus the model's base value.
/// base + values.row(i).sum() equals the model prediction for row i.
struct ShapMatrix {
  Eigen::MatrixXd values;
  double base = 0.0;
};

/// Path-dependent TreeSHAP values of one tree for one row, added into `phi`
/// scaled by `scale`. Returns the tree's expected value under its covers.
/// Throws ExplainError if any reachable node has no cover.
double tree_shap_row(const TreeModel& tree, const double* x, double* phi, double scale = 1.0);

/// Exact attributions for every row. Trees use the tree-path conditional
/// expectation from training covers; linear models use coef * (x - mean).
ShapMatrix tree_shap(const EnsembleModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                     int workers = 1);

struct MonthlyShap {
  Date month;  // first day of the month
  std::size_t rows = 0;
  double base = 0.0;
  Eigen::VectorXd mean_abs;  // per feature
  std::vector<std::size_t> row_index;  // explained feature rows, in order
};

struct ShapReport {
  std::vector<FeatureInfo> columns;
  std::vector<MonthlyShap> months;
  Eigen::VectorXd overall;  // mean over months of mean_abs
};

/// Fits the model used to explain the slice's evaluation month.
using ModelFactory = std::function<EnsembleModel(const WindowSlice&)>;

struct ShapScheduleOptions {
  std::size_t max_rows_per_month = 0;  // 0 = every eligible row; else an even stride
  int workers = 1;
};

/// One model per test month, fitted on the training span of the month's
/// first slice and explained on that month's eligible rows.
ShapReport monthly_schedule(const ModelFactory& factory, const WindowPlan& plan,
                            const FeatureMatrix& features,
                            std::span<const std::size_t> eligible_rows,
                            const ShapScheduleOptions& options = {},
                            std::vector<ShapMatrix>* matrices = nullptr);

/// Report over a single attribution matrix.
ShapReport single_report(const ShapMatrix& shap, const std::vector<FeatureInfo>& columns,
                         Date month = {});

struct HeatmapEntry {
  int location = -1;
  MetVariable variable = MetVariable::SNR;
  double value = 0.0;
};

struct ShapViews {
  std::vector<std::pair<int, double>> locations;         // summed over met variables
  std::vector<std::pair<std::string, double>> features;  // mean over locations; angles as is
  std::vector<HeatmapEntry> heatmap;
};

ShapViews aggregate_views(const ShapReport& report);

/// location_importance.csv, feature_importance.csv, heatmap.csv, monthly.csv.
void write_views(const ShapReport& report, const ShapViews& views,
                 const std::filesystem::path& dir);

/// One row per explained observation: timestamp, base, one column per feature.
void write_shap_rows(const ShapMatrix& shap, std::span<const Timestamp> timestamps,
                     const std::vector<std::string>& names, const std::filesystem::path& path);

}  // namespace solarcast

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "solarcast/backtest_result.hpp"
#include "solarcast/dataset.hpp"
#include "solarcast/ensemble.hpp"
#include "solarcast/geo.hpp"

namespace solarcast {

enum class Method { LR, RT, RF, XGBoost };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct ModelConfiguration {
  Method method = Method::LR;
  FeatureSet features = FeatureSet::a;
  SelectionMode grid = SelectionMode::average;
  int k = 0;  // clusters; ignored in average mode

  /// e.g. "XGBoost-b-k12", "LR-a-average".
  std::string id() const;
};

ModelConfiguration parse_configuration(std::string_view id);

/// Cartesian product in method-major order.
std::vector<ModelConfiguration> configuration_matrix(std::span<const Method> methods,
                                                     std::span<const FeatureSet> sets,
                                                     std::span<const int> grids);

enum class ParamScale { linear, log, integer };

struct ParamRange {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  ParamScale scale = ParamScale::linear;

  void validate() const;
};

/// Tunable parameters of a method. `n_features` bounds mtry.
std::vector<ParamRange> default_ranges(Method method, int n_features);

nlohmann::json to_json(const ParamRange& r);
ParamRange param_range_from_json(const nlohmann::json& j);

struct HyperCandidate {
  Method method = Method::LR;
  std::map<std::string, double> values;

  double get(std::string_view name, double fallback) const;
};

nlohmann::json to_json(const HyperCandidate& c);
HyperCandidate candidate_from_json(const nlohmann::json& j);

/// Latin hypercube design of `n` candidates.
///
/// Each dimension is cut into `n` equal-width intervals on its declared scale
/// (log spacing for `log`; [lo, hi + 1) floored for `integer`) and candidate i
/// draws uniformly inside interval perm_d[i], with one seeded permutation per
/// dimension.
std::vector<HyperCandidate> latin_hypercube(Method method, std::span<const ParamRange> ranges,
                                            int n, std::uint64_t seed);

enum class WindowMode { validation, test };

/// Date spans are inclusive.
struct WindowSlice {
  Date train_start;
  Date train_end;
  Date eval_start;
  Date eval_end;
};

struct WindowPlan {
  WindowMode mode = WindowMode::test;
  std::vector<WindowSlice> slices;
};

struct WindowSpec {
  WindowMode mode = WindowMode::test;
  std::optional<Date> period_start;  // default: first date + train_days + gap_days
  int train_days = 1095;
  int gap_days = 1;    // whole days between train end and evaluation start
  int slice_days = 1;
  int n_slices = 545;  // <= 0: as many as the timeline holds
  int cadence_days = 1;  // test mode: the model is refitted every this many slices
};

WindowSpec standard_validation_spec();  // evaluation from 2021-01-05, 731 training days, 12 x 30 days
WindowSpec standard_test_spec();        // 2022-01-01, 545 daily slices, one-day gap

nlohmann::json to_json(const WindowSpec& s);
WindowSpec window_spec_from_json(const nlohmann::json& j, WindowMode mode);

/// Slices for a timeline of local dates [first, last].
///
/// Validation slices follow one another, each trained on the `train_days`
/// ending `gap_days` before it. A final validation slice that runs past the
/// timeline is truncated. Test slices with cadence c share the training span
/// of the first slice of their group of c. Throws PlanningError when the
/// history cannot hold the first training span or the requested slices.
WindowPlan plan_windows(Date first, Date last, const WindowSpec& spec);
WindowPlan plan_windows(std::span<const Timestamp> timeline, const WindowSpec& spec);

/// Model-ready data: features and load factor, plus the capacity and
/// actual generation needed to score forecasts in MW.
struct PreparedData {
  FeatureMatrix features;
  Eigen::VectorXd target;    // load factor
  Eigen::VectorXd capacity;  // IC_t, MW
  Eigen::VectorXd asg;       // actual generation, MW
  std::vector<Date> outlier_days;
  HourRange hours;

  /// Row positions by local date, in timestamp order.
  const std::map<Date, std::vector<std::size_t>>& by_date() const;
  void reindex();

 private:
  std::map<Date, std::vector<std::size_t>> by_date_;
};

PreparedData prepare_data(const ObservationTable& table, const AssembledData& assembled,
                          std::vector<Date> outlier_days, HourRange hours = {});

/// Rows usable for training over [start, end]: modeled hours, outlier days dropped.
std::vector<std::size_t> training_rows(const PreparedData& data, Date start, Date end);
/// Rows of one day inside the modeled hours (outlier days kept).
std::vector<std::size_t> forecast_rows(const PreparedData& data, Date day);

struct FitSettings {
  int n_trees = 600;
  int workers = 1;
  std::uint64_t seed = 0;
};

/// Fits `method` with hyperparameters `params` (missing names fall back to defaults).
EnsembleModel fit_model(Method method, const HyperCandidate& params,
                        const Eigen::Ref<const Eigen::MatrixXd>& X,
                        const Eigen::Ref<const Eigen::VectorXd>& y, const FitSettings& settings);

/// Fits on the training rows of a date span.
EnsembleModel fit_on_span(Method method, const HyperCandidate& params, const PreparedData& data,
                          Date train_start, Date train_end, const FitSettings& settings);

struct CandidateScore {
  double rmse = 0.0;  // MW, pooled over every validation time point
  bool failed = false;
  std::string error;
};

/// Index of the lowest RMSE among non-failed scores, first on ties.
/// Throws ComputationError if every candidate failed.
std::size_t select_best(std::span<const CandidateScore> scores);

struct TuneResult {
  std::size_t best_index = 0;
  HyperCandidate best;
  std::vector<CandidateScore> scores;
};

/// Evaluates every candidate on every validation slice and keeps the best.
TuneResult tune(const ModelConfiguration& config, const PreparedData& data,
                const WindowPlan& plan, std::span<const HyperCandidate> candidates,
                const FitSettings& settings);

/// Rolling test backtest producing 24 hourly MW values per forecast day.
BacktestResult backtest(const ModelConfiguration& config, const HyperCandidate& params,
                        const PreparedData& data, const WindowPlan& plan,
                        const FitSettings& settings);

}  // namespace solarcast

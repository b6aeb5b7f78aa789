#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "solarcast/backtest_result.hpp"

namespace solarcast {

struct AggregateMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double smape = 0.0;            // 2 * sum|f - a| / sum(f + a)
  bool smape_undefined = false;  // sum(f + a) == 0; smape reported as 0
};

AggregateMetrics aggregate_metrics(std::span<const double> actual, std::span<const double> forecast);
AggregateMetrics aggregate_metrics(const BacktestResult& result);

struct DailyMetrics {
  Date date;
  double rmse = 0.0;
  double mae = 0.0;
  double smape = 0.0;
};

std::vector<DailyMetrics> daily_metrics(const BacktestResult& result);
/// Running sums of the daily series.
std::vector<DailyMetrics> cumulative_metrics(std::span<const DailyMetrics> daily);

enum class LossKind { squared, absolute, smape };
std::string_view loss_kind_name(LossKind kind);

/// Per-observation losses. The SMAPE term is 2|f - a| / (f + a), zero when f + a == 0.
struct LossSeries {
  Eigen::VectorXd squared;
  Eigen::VectorXd absolute;
  Eigen::VectorXd smape;

  const Eigen::VectorXd& get(LossKind kind) const;
};

LossSeries loss_series(std::span<const double> actual, std::span<const double> forecast);

struct McsOptions {
  int bootstrap = 1000;
  int block_length = 24;
  std::uint64_t seed = 0;
};

/// Model Confidence Set with the range statistic T_R = max |t_ij|.
///
/// `elimination` lists model indices in the order they left the set; the last
/// entry is the final survivor. `pvalues[i]` is model i's MCS p-value
/// (running maximum along the elimination order, 1 for the survivor).
struct McsResult {
  std::vector<int> elimination;
  std::vector<double> pvalues;
  std::vector<bool> in_99;  // p >= 0.01
  std::vector<bool> in_90;  // p >= 0.10
};

/// `losses` is observations x models, aligned rows.
McsResult model_confidence_set(const Eigen::Ref<const Eigen::MatrixXd>& losses,
                               const McsOptions& options = {});

}  // namespace solarcast

#pragma once

#include <array>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "solarcast/timestamp.hpp"

namespace solarcast {

/// One forecast day: 24 wall-clock hourly slots in MW.
struct BacktestDay {
  Date date;
  std::array<double, 24> actual{};
  std::array<double, 24> forecast{};
};

struct BacktestResult {
  std::string config_id;
  std::vector<BacktestDay> days;  // ascending by date
  nlohmann::json params;          // hyperparameters used
  std::vector<Date> skipped;      // forecast days dropped for data gaps

  /// Hourly values flattened day-major (day 0 hour 0, day 0 hour 1, ...).
  std::vector<double> actual_series() const;
  std::vector<double> forecast_series() const;
};

/// CSV: date,hour,actual_mw,forecast_mw,config_id. Rows day-major, 24 per day.
void write_backtest_csv(const BacktestResult& result, const std::filesystem::path& path);
BacktestResult read_backtest_csv(const std::filesystem::path& path);

}  // namespace solarcast

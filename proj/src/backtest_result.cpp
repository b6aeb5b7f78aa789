#include "solarcast/backtest_result.hpp"

#include <fstream>
#include <map>

#include "solarcast/csv.hpp"
#include "solarcast/error.hpp"

namespace solarcast {

std::vector<double> BacktestResult::actual_series() const {
  std::vector<double> out;
  out.reserve(days.size() * 24);
  for (const auto& d : days) out.insert(out.end(), d.actual.begin(), d.actual.end());
  return out;
}

std::vector<double> BacktestResult::forecast_series() const {
  std::vector<double> out;
  out.reserve(days.size() * 24);
  for (const auto& d : days) out.insert(out.end(), d.forecast.begin(), d.forecast.end());
  return out;
}

void write_backtest_csv(const BacktestResult& result, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  out << "date,hour,actual_mw,forecast_mw,config_id\n";
  for (const auto& d : result.days) {
    const std::string date = format_date(d.date);
    for (int h = 0; h < 24; ++h)
      out << date << ',' << h << ',' << format_number(d.actual[static_cast<std::size_t>(h)]) << ','
          << format_number(d.forecast[static_cast<std::size_t>(h)]) << ',' << result.config_id
          << '\n';
  }
}

BacktestResult read_backtest_csv(const std::filesystem::path& path) {
  CsvReader csv(path);
  const auto cd = csv.column("date");
  const auto ch = csv.column("hour");
  const auto ca = csv.column("actual_mw");
  const auto cf = csv.column("forecast_mw");
  const auto cc = csv.column("config_id");
  BacktestResult result;
  std::map<Date, std::pair<BacktestDay, std::array<bool, 24>>> days;
  while (csv.next()) {
    Date d;
    try {
      d = parse_date(csv.field(cd));
    } catch (const ValidationError& e) {
      csv.fail(cd, e.what());
    }
    const auto h = csv.integer(ch);
    if (h < 0 || h > 23) csv.fail(ch, "hour must lie in [0, 23]");
    const std::string id(csv.field(cc));
    if (result.config_id.empty()) result.config_id = id;
    else if (id != result.config_id) csv.fail(cc, "mixed config ids in one file");
    auto& [day, seen] = days[d];
    day.date = d;
    const auto hh = static_cast<std::size_t>(h);
    if (seen[hh]) csv.fail(ch, "duplicate hour for " + format_date(d));
    seen[hh] = true;
    day.actual[hh] = csv.number(ca);
    day.forecast[hh] = csv.number(cf);
  }
  for (auto& [date, entry] : days) {
    for (bool s : entry.second)
      if (!s) throw IngestionError(path.string() + ": day " + format_date(date) + " lacks hours");
    result.days.push_back(entry.first);
  }
  return result;
}

}  // namespace solarcast

#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "solarcast/geo.hpp"
#include "solarcast/timestamp.hpp"

namespace solarcast {

enum class MetVariable { SNR, SSD, T2m, RH, WCI, TCC };

inline constexpr std::array<MetVariable, 6> kAllVariables = {
    MetVariable::SNR, MetVariable::SSD, MetVariable::T2m,
    MetVariable::RH,  MetVariable::WCI, MetVariable::TCC};

std::string_view variable_name(MetVariable v);
MetVariable parse_variable(std::string_view name);

struct CapacityAnchor {
  Timestamp t;
  double mw = 0.0;
};

/// Hourly observations keyed by timestamp.
///
/// `asg` and every meteorological series are aligned with `timestamps`.
/// Capacity anchors are sparse and kept as read.
struct ObservationTable {
  std::vector<Timestamp> timestamps;
  Eigen::VectorXd asg;
  std::vector<CapacityAnchor> capacity;
  std::map<std::pair<int, MetVariable>, Eigen::VectorXd> meteo;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(timestamps.size()); }
  bool has_series(int cell, MetVariable v) const { return meteo.count({cell, v}) != 0; }
  const Eigen::VectorXd& series(int cell, MetVariable v) const;

  /// Rows at the given positions, in the given order.
  ObservationTable select(std::span<const std::size_t> rows) const;
};

/// Header names of the input files.
struct CsvSchema {
  std::string timestamp = "timestamp";
  std::string asg = "asg_mw";
  std::string capacity = "ic_mw";
  std::string cell_id = "cell_id";
  std::string variable = "variable";
  std::string value = "value";
  std::string lon = "lon";
  std::string lat = "lat";
};

struct DataPaths {
  std::filesystem::path asg;       // timestamp, asg_mw
  std::filesystem::path capacity;  // timestamp, ic_mw
  std::filesystem::path meteo;     // timestamp, cell_id, variable, value (long format)
};

/// Reads and validates the three observation files.
///
/// Rows are sorted by timestamp. Duplicate timestamps, bound violations
/// (ASG >= 0, RH in [0, 100], TCC in [0, 1]), unparseable values and
/// meteorological series with missing hours raise IngestionError naming
/// the file, line and column.
ObservationTable load_csv(const DataPaths& paths, const CsvSchema& schema = {});

SpatialGrid load_grid(const std::filesystem::path& path, const CsvSchema& schema = {});

/// Installed capacity interpolated onto a timeline.
struct CapacityCurve {
  std::vector<Timestamp> timeline;
  Eigen::VectorXd ic;

  /// Capacity at a timeline point; throws ValidationError if `t` is not on the curve.
  double at(const Timestamp& t) const;
};

/// Piecewise-linear in time between anchors, held constant beyond either end.
CapacityCurve interpolate_capacity(std::vector<CapacityAnchor> anchors,
                                   std::span<const Timestamp> timeline);

/// Load factor ASG / IC. Throws ComputationError if any IC <= 0.
Eigen::VectorXd make_load_factor(const ObservationTable& table, const CapacityCurve& cap);

/// max(lf, 0) * IC_t.
double denormalize_forecast(double lf, const CapacityCurve& cap, const Timestamp& t);

struct HourRange {
  int first = 5;
  int last = 21;  // inclusive
  bool contains(int hour) const { return hour >= first && hour <= last; }
  int count() const { return last - first + 1; }
};

/// Positions of rows whose wall-clock hour lies in `keep`.
std::vector<std::size_t> rows_in_hours(std::span<const Timestamp> timestamps, HourRange keep = {});
ObservationTable filter_hours(const ObservationTable& table, HourRange keep = {});

/// Scatters forecasts made for wall-clock `hours` into a 24-slot day, zero elsewhere.
std::array<double, 24> expand_to_24h(std::span<const int> hours, std::span<const double> values);
/// Same, for forecasts covering `keep` in order.
std::array<double, 24> expand_to_24h(std::span<const double> values, HourRange keep = {});

/// Positions of rows whose local date is not listed.
std::vector<std::size_t> rows_excluding_days(std::span<const Timestamp> timestamps,
                                             std::span<const Date> days);
ObservationTable exclude_outlier_days(const ObservationTable& table, std::span<const Date> days);

enum class FeatureSet { a, b };

/// Meteorological variables of a feature set: (a) SNR only, (b) all six.
std::span<const MetVariable> feature_variables(FeatureSet set);
FeatureSet parse_feature_set(std::string_view tag);
std::string_view feature_set_name(FeatureSet set);

struct FeatureInfo {
  enum class Kind { meteo, zenith, azimuth };
  Kind kind = Kind::meteo;
  MetVariable variable = MetVariable::SNR;
  int location = -1;  // cell id; -1 for the averaged pseudo-location or angles

  std::string name() const;
};

/// Column-major design matrix plus column metadata.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<FeatureInfo> columns;
  std::vector<Timestamp> timestamps;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  std::vector<std::string> names() const;
  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
};

struct AssemblyOptions {
  /// Solar angles are evaluated at row timestamp + this offset (0 = hour start).
  int solar_offset_minutes = 0;
};

struct AssembledData {
  FeatureMatrix features;
  Eigen::VectorXd target;  // load factor, aligned with features
  CapacityCurve capacity;
};

/// Feature matrix and load-factor target for a grid selection and feature set.
///
/// Columns: for each selected location the feature set's variables, then
/// zenith and azimuth at `refloc`. In average mode each variable is the
/// plain mean over every cell of the selection.
AssembledData assemble_features(const ObservationTable& table, const GridSelection& selection,
                                FeatureSet set, const GeoCoordinate& refloc,
                                const AssemblyOptions& options = {});

}  // namespace solarcast

#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "solarcast/dataset.hpp"
#include "solarcast/geo.hpp"
#include "solarcast/harness.hpp"

namespace solarcast {

/// {"mode", "k", "objective", "representatives": [{id, lon, lat}], "assignment": {id: cluster}}
nlohmann::json to_json(const GridSelection& s);
GridSelection selection_from_json(const nlohmann::json& j);

/// Selection tag used in file and configuration names: "k5", "average".
std::string selection_tag(SelectionMode mode, int k);

/// Writes features.csv (timestamp + one column per feature),
/// target.csv (timestamp, asg_mw, ic_mw, load_factor) and feature_schema.json.
void write_prepared(const FeatureMatrix& features, const Eigen::VectorXd& target,
                    const Eigen::VectorXd& capacity, const Eigen::VectorXd& asg,
                    const std::filesystem::path& dir);

/// Reads the files written by write_prepared. Outlier days and modeled hours
/// are supplied by the caller.
PreparedData read_prepared(const std::filesystem::path& dir, std::vector<Date> outlier_days,
                           HourRange hours = {});

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; parent directories are created.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

/// 64-bit FNV-1a hash of a byte string, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace solarcast

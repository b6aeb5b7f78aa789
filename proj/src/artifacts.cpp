#include "solarcast/artifacts.hpp"

#include <cstdio>
#include <fstream>

#include "solarcast/csv.hpp"
#include "solarcast/error.hpp"

namespace solarcast {

nlohmann::json to_json(const GridSelection& s) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& r : s.representatives)
    reps.push_back({{"id", r.id}, {"lon", r.coord.lon}, {"lat", r.coord.lat}});
  nlohmann::json assign = nlohmann::json::object();
  for (const auto& [id, c] : s.assignment) assign[std::to_string(id)] = c;
  return {{"mode", s.mode == SelectionMode::average ? "average" : "clustered"},
          {"k", s.k},
          {"objective", s.objective},
          {"representatives", reps},
          {"assignment", assign}};
}

GridSelection selection_from_json(const nlohmann::json& j) {
  GridSelection s;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "average") s.mode = SelectionMode::average;
  else if (mode == "clustered") s.mode = SelectionMode::clustered;
  else throw ValidationError("unknown selection mode '" + mode + "'");
  s.k = j.at("k").get<int>();
  s.objective = j.value("objective", 0.0);
  for (const auto& r : j.at("representatives"))
    s.representatives.push_back(
        {r.at("id").get<int>(), GeoCoordinate::checked(r.at("lon").get<double>(), r.at("lat").get<double>())});
  for (const auto& [id, c] : j.at("assignment").items()) s.assignment[std::stoi(id)] = c.get<int>();
  if (s.mode == SelectionMode::clustered && static_cast<int>(s.representatives.size()) != s.k)
    throw ValidationError("selection lists " + std::to_string(s.representatives.size()) +
                          " representatives for k = " + std::to_string(s.k));
  return s;
}

std::string selection_tag(SelectionMode mode, int k) {
  return mode == SelectionMode::average ? "average" : "k" + std::to_string(k);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  return out;
}

const char* kind_name(FeatureInfo::Kind k) {
  switch (k) {
    case FeatureInfo::Kind::zenith: return "zenith";
    case FeatureInfo::Kind::azimuth: return "azimuth";
    case FeatureInfo::Kind::meteo: break;
  }
  return "meteo";
}

FeatureInfo::Kind parse_kind(const std::string& s) {
  if (s == "zenith") return FeatureInfo::Kind::zenith;
  if (s == "azimuth") return FeatureInfo::Kind::azimuth;
  if (s == "meteo") return FeatureInfo::Kind::meteo;
  throw ValidationError("unknown feature kind '" + s + "'");
}

}  // namespace

void write_prepared(const FeatureMatrix& features, const Eigen::VectorXd& target,
                    const Eigen::VectorXd& capacity, const Eigen::VectorXd& asg,
                    const std::filesystem::path& dir) {
  const auto n = features.rows();
  if (target.size() != n || capacity.size() != n || asg.size() != n)
    throw ValidationError("write_prepared: columns differ in length");
  {
    auto out = open_out(dir / "features.csv");
    out << "timestamp";
    for (const auto& name : features.names()) out << ',' << name;
    out << '\n';
    for (Eigen::Index i = 0; i < n; ++i) {
      out << format_timestamp(features.timestamps[static_cast<std::size_t>(i)]);
      for (Eigen::Index c = 0; c < features.cols(); ++c) out << ',' << format_number(features.values(i, c));
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "target.csv");
    out << "timestamp,asg_mw,ic_mw,load_factor\n";
    for (Eigen::Index i = 0; i < n; ++i)
      out << format_timestamp(features.timestamps[static_cast<std::size_t>(i)]) << ','
          << format_number(asg[i]) << ',' << format_number(capacity[i]) << ','
          << format_number(target[i]) << '\n';
  }
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : features.columns) {
    nlohmann::json e = {{"name", c.name()}, {"kind", kind_name(c.kind)}};
    if (c.kind == FeatureInfo::Kind::meteo) {
      e["variable"] = variable_name(c.variable);
      e["location"] = c.location;
    }
    cols.push_back(e);
  }
  write_json({{"rows", n}, {"columns", cols}}, dir / "feature_schema.json");
}

PreparedData read_prepared(const std::filesystem::path& dir, std::vector<Date> outlier_days,
                           HourRange hours) {
  const auto schema = read_json(dir / "feature_schema.json");
  PreparedData d;
  for (const auto& c : schema.at("columns")) {
    FeatureInfo info;
    info.kind = parse_kind(c.at("kind").get<std::string>());
    if (info.kind == FeatureInfo::Kind::meteo) {
      info.variable = parse_variable(c.at("variable").get<std::string>());
      info.location = c.at("location").get<int>();
    }
    if (info.name() != c.at("name").get<std::string>())
      throw IngestionError("feature_schema.json: column '" + c.at("name").get<std::string>() +
                           "' does not match its kind and location");
    d.features.columns.push_back(info);
  }
  const auto p = static_cast<Eigen::Index>(d.features.columns.size());
  const auto n = schema.at("rows").get<Eigen::Index>();
  d.features.values.resize(n, p);
  d.target.resize(n);
  d.capacity.resize(n);
  d.asg.resize(n);

  CsvReader f(dir / "features.csv");
  const auto ts = f.column("timestamp");
  std::vector<std::size_t> cols;
  for (const auto& c : d.features.columns) cols.push_back(f.column(c.name()));
  Eigen::Index i = 0;
  while (f.next()) {
    if (i >= n) f.fail(ts, "more rows than feature_schema.json declares");
    d.features.timestamps.push_back(parse_timestamp(f.field(ts)));
    for (Eigen::Index c = 0; c < p; ++c) d.features.values(i, c) = f.number(cols[static_cast<std::size_t>(c)]);
    ++i;
  }
  if (i != n)
    throw IngestionError((dir / "features.csv").string() + ": " + std::to_string(i) + " rows, schema declares " +
                         std::to_string(n));

  CsvReader t(dir / "target.csv");
  const auto tts = t.column("timestamp"), ta = t.column("asg_mw"), tc = t.column("ic_mw"),
             tl = t.column("load_factor");
  i = 0;
  while (t.next()) {
    if (i >= n) t.fail(tts, "more rows than features.csv");
    if (!(parse_timestamp(t.field(tts)) == d.features.timestamps[static_cast<std::size_t>(i)]))
      t.fail(tts, "timestamp differs from features.csv");
    d.asg[i] = t.number(ta);
    d.capacity[i] = t.number(tc);
    d.target[i] = t.number(tl);
    ++i;
  }
  if (i != n) throw IngestionError((dir / "target.csv").string() + ": row count differs from features.csv");
  d.outlier_days = std::move(outlier_days);
  d.hours = hours;
  d.reindex();
  return d;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace solarcast

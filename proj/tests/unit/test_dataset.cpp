#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "solarcast/dataset.hpp"
#include "solarcast/error.hpp"
#include "solarcast/synth.hpp"
#include "support.hpp"

using namespace solarcast;

namespace {

// Two local days of hourly rows at +01:00 for two cells, all six variables.
struct Fixture {
  std::vector<std::string> asg_rows, meteo_rows;
  std::string capacity = "timestamp,ic_mw\n2021-03-01T00:00:00+01:00,4000\n2021-03-03T00:00:00+01:00,4100\n";

  Fixture() {
    for (int d = 1; d <= 2; ++d)
      for (int h = 0; h < 24; ++h) {
        char ts[40];
        std::snprintf(ts, sizeof ts, "2021-03-%02dT%02d:00:00+01:00", d, h);
        const double g = (h >= 7 && h <= 17) ? 100.0 * (6 - std::abs(h - 12)) : 0.0;
        asg_rows.push_back(std::string(ts) + "," + std::to_string(g));
        for (int cell : {1, 2})
          for (MetVariable v : kAllVariables) {
            double x = 10.0 * cell + h;
            if (v == MetVariable::RH) x = 60.0 + h;
            if (v == MetVariable::TCC) x = 0.02 * h;
            meteo_rows.push_back(std::string(ts) + "," + std::to_string(cell) + "," +
                                 std::string(variable_name(v)) + "," + std::to_string(x));
          }
      }
  }

  DataPaths write(const test::TempDir& dir) const {
    auto join = [](const std::string& head, const std::vector<std::string>& rows) {
      std::string s = head + "\n";
      for (const auto& r : rows) s += r + "\n";
      return s;
    };
    test::write_file(dir / "asg.csv", join("timestamp,asg_mw", asg_rows));
    test::write_file(dir / "meteo.csv", join("timestamp,cell_id,variable,value", meteo_rows));
    test::write_file(dir / "capacity.csv", capacity);
    return {dir / "asg.csv", dir / "capacity.csv", dir / "meteo.csv"};
  }
};

std::string error_of(const DataPaths& p) {
  try {
    load_csv(p);
  } catch (const IngestionError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("well-formed fixture loads") {
  test::TempDir dir("ds_ok");
  const auto t = load_csv(Fixture().write(dir));
  CHECK(t.rows() == 48);
  CHECK(t.capacity.size() == 2);
  CHECK(t.meteo.size() == 12);
  CHECK(t.series(2, MetVariable::SNR)[5] == doctest::Approx(25.0));
  CHECK(std::is_sorted(t.timestamps.begin(), t.timestamps.end()));
}

TEST_CASE("bound violations are rejected with the row") {
  test::TempDir dir("ds_rh");
  Fixture f;
  auto& row = f.meteo_rows[3];  // cell 1, RH, first hour
  REQUIRE(row.find(",RH,") != std::string::npos);
  row = row.substr(0, row.rfind(',')) + ",135";
  const std::string msg = error_of(f.write(dir));
  CHECK(msg.find("RH") != std::string::npos);
  CHECK(msg.find("[0, 100]") != std::string::npos);
  CHECK(msg.find("meteo.csv:5") != std::string::npos);

  Fixture g;
  g.asg_rows[2] = g.asg_rows[2].substr(0, g.asg_rows[2].find(',')) + ",-1";
  CHECK(error_of(g.write(dir)).find("ASG") != std::string::npos);

  Fixture h;
  auto& tcc = h.meteo_rows[5];
  REQUIRE(tcc.find(",TCC,") != std::string::npos);
  tcc = tcc.substr(0, tcc.rfind(',')) + ",1.5";
  CHECK(error_of(h.write(dir)).find("TCC") != std::string::npos);
}

TEST_CASE("malformed input names file, row and column") {
  test::TempDir dir("ds_bad");
  Fixture f;
  f.asg_rows[4] = f.asg_rows[4].substr(0, f.asg_rows[4].find(',')) + ",abc";
  const std::string msg = error_of(f.write(dir));
  CHECK(msg.find("asg.csv:6") != std::string::npos);
  CHECK(msg.find("asg_mw") != std::string::npos);

  Fixture d;
  d.asg_rows.push_back(d.asg_rows[10]);
  CHECK(error_of(d.write(dir)).find("duplicate") != std::string::npos);

  Fixture m;
  m.meteo_rows.erase(m.meteo_rows.begin() + 40);
  CHECK(error_of(m.write(dir)).find("has no value") != std::string::npos);

  test::write_file(dir / "asg.csv", "time,asg_mw\n");
  CHECK_THROWS_AS(load_csv({dir / "asg.csv", dir / "capacity.csv", dir / "meteo.csv"}), IngestionError);
}

TEST_CASE("shuffled rows load identically") {
  test::TempDir a("ds_sorted"), b("ds_shuffled");
  Fixture f;
  const auto t1 = load_csv(f.write(a));
  std::mt19937_64 rng(1);
  std::shuffle(f.asg_rows.begin(), f.asg_rows.end(), rng);
  std::shuffle(f.meteo_rows.begin(), f.meteo_rows.end(), rng);
  const auto t2 = load_csv(f.write(b));
  CHECK(t1.timestamps == t2.timestamps);
  CHECK(t1.asg == t2.asg);
  CHECK(t1.meteo == t2.meteo);
}

TEST_CASE("capacity interpolation") {
  const auto t0 = parse_timestamp("2021-01-01T00:00:00Z");
  const auto t1 = t0 + std::chrono::hours(12);
  const auto t2 = t0 + std::chrono::hours(24);
  const std::vector<CapacityAnchor> anchors{{t0, 100.0}, {t2, 200.0}};
  const std::vector<Timestamp> tl{t0 + std::chrono::hours(-5), t0, t1, t2, t2 + std::chrono::hours(3)};
  const auto c = interpolate_capacity(anchors, tl);
  CHECK(c.ic[0] == 100.0);
  CHECK(c.ic[1] == 100.0);
  CHECK(c.ic[2] == doctest::Approx(150.0));
  CHECK(c.ic[3] == 200.0);
  CHECK(c.ic[4] == 200.0);
  CHECK(c.at(t1) == doctest::Approx(150.0));
  CHECK_THROWS_AS(c.at(t0 + std::chrono::hours(1)), ValidationError);
  CHECK_THROWS_AS(interpolate_capacity({anchors[0]}, tl), ValidationError);

  // Monotone anchors give a monotone curve.
  std::vector<CapacityAnchor> many;
  std::vector<Timestamp> dense;
  for (int i = 0; i < 10; ++i) many.push_back({t0 + std::chrono::hours(24 * 7 * i), 3369.0 + 469.0 * i});
  for (int h = 0; h < 24 * 7 * 9; h += 5) dense.push_back(t0 + std::chrono::hours(h));
  const auto curve = interpolate_capacity(many, dense);
  for (Eigen::Index i = 1; i < curve.ic.size(); ++i) CHECK(curve.ic[i] >= curve.ic[i - 1]);
  CHECK(curve.ic[0] == doctest::Approx(3369.0));
}

TEST_CASE("load factor and the inverse transform") {
  test::TempDir dir("ds_lf");
  const auto t = load_csv(Fixture().write(dir));
  const auto cap = interpolate_capacity(t.capacity, t.timestamps);
  const auto lf = make_load_factor(t, cap);
  CHECK(lf[0] == 0.0);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    CHECK(std::abs(lf[i] * cap.ic[i] - t.asg[i]) <= 1e-12 * std::max(1.0, t.asg[i]));
    CHECK(denormalize_forecast(lf[i], cap, t.timestamps[static_cast<std::size_t>(i)]) ==
          doctest::Approx(t.asg[i]).epsilon(1e-12));
  }

  ObservationTable u;
  u.timestamps = {t.timestamps[0], t.timestamps[1]};
  u.asg = Eigen::Vector2d(0.0, 6000.0);
  CapacityCurve flat{u.timestamps, Eigen::Vector2d(6000.0, 6000.0)};
  const auto y = make_load_factor(u, flat);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 1.0);
  CHECK(denormalize_forecast(-0.02, flat, u.timestamps[0]) == 0.0);
  CHECK(denormalize_forecast(0.5, flat, u.timestamps[0]) == 3000.0);
  CapacityCurve broken{u.timestamps, Eigen::Vector2d(6000.0, 0.0)};
  CHECK_THROWS_AS(make_load_factor(u, broken), ComputationError);
}

TEST_CASE("hour filtering and 24-hour expansion") {
  test::TempDir dir("ds_hours");
  const auto t = load_csv(Fixture().write(dir));
  const auto once = filter_hours(t);
  CHECK(once.rows() == 34);
  const auto twice = filter_hours(once);
  CHECK(twice.timestamps == once.timestamps);
  for (const auto& ts : once.timestamps) CHECK(HourRange{}.contains(ts.local_hour()));

  std::vector<double> f(17);
  for (int i = 0; i < 17; ++i) f[static_cast<std::size_t>(i)] = i + 1.0;
  const auto day = expand_to_24h(f);
  for (int h = 0; h < 24; ++h) {
    if (h < 5 || h > 21) CHECK(day[static_cast<std::size_t>(h)] == 0.0);
    else CHECK(day[static_cast<std::size_t>(h)] == h - 4.0);
  }
  CHECK_THROWS_AS(expand_to_24h(std::vector<double>(16)), ValidationError);
}

TEST_CASE("outlier days") {
  std::vector<Timestamp> ts;
  for (int h = 0; h < 72; ++h) ts.push_back(parse_timestamp("2022-03-31T00:00:00+02:00") + std::chrono::hours(h));
  const std::vector<Date> april_first{make_date(2022, 4, 1)};
  const auto kept = rows_excluding_days(ts, april_first);
  CHECK(kept.size() == 48);
  for (auto r : kept) CHECK(ts[r].local_date() != make_date(2022, 4, 1));
  CHECK(rows_excluding_days(ts, {}).size() == 72);
  const std::vector<Date> absent{make_date(2019, 1, 1)};
  CHECK(rows_excluding_days(ts, absent).size() == 72);
}

TEST_CASE("feature assembly column counts and metadata") {
  const auto grid = load_grid(SOLARCAST_DATA "/belgium_grid.csv");
  SynthParams p;
  p.days = 2;
  const auto ds = synthesize(grid, p);
  const GeoCoordinate ref{4.64, 50.65};
  const auto k12 = kmeans_haversine(grid, 12, {.seed = 1});
  const auto k5 = kmeans_haversine(grid, 5, {.seed = 1});
  const auto avg = average_selection(grid);
  CHECK(assemble_features(ds.table, k12, FeatureSet::a, ref).features.cols() == 14);
  CHECK(assemble_features(ds.table, k12, FeatureSet::b, ref).features.cols() == 74);
  CHECK(assemble_features(ds.table, k5, FeatureSet::b, ref).features.cols() == 32);
  CHECK(assemble_features(ds.table, k5, FeatureSet::a, ref).features.cols() == 7);
  const auto av = assemble_features(ds.table, avg, FeatureSet::b, ref);
  CHECK(av.features.cols() == 8);
  CHECK(av.features.rows() == ds.table.rows());
  CHECK((av.features.values.array() == av.features.values.array()).all());

  const auto fm = assemble_features(ds.table, k5, FeatureSet::b, ref).features;
  std::set<std::string> names;
  for (const auto& c : fm.columns) names.insert(c.name());
  CHECK(names.size() == 32);
  CHECK(fm.columns[30].kind == FeatureInfo::Kind::zenith);
  CHECK(fm.columns[31].kind == FeatureInfo::Kind::azimuth);
  for (int i = 0; i < 30; ++i) {
    CHECK(fm.columns[static_cast<std::size_t>(i)].variable == kAllVariables[static_cast<std::size_t>(i % 6)]);
    CHECK(fm.columns[static_cast<std::size_t>(i)].location == k5.representatives[static_cast<std::size_t>(i / 6)].id);
  }
}

TEST_CASE("average mode is the plain mean over cells") {
  ObservationTable t;
  t.timestamps = {parse_timestamp("2021-06-01T12:00:00+02:00")};
  t.asg = Eigen::VectorXd::Constant(1, 10.0);
  t.capacity = {{t.timestamps[0], 100.0}, {t.timestamps[0] + std::chrono::hours(1), 100.0}};
  t.meteo[{1, MetVariable::SNR}] = Eigen::VectorXd::Constant(1, 10.0);
  t.meteo[{2, MetVariable::SNR}] = Eigen::VectorXd::Constant(1, 20.0);
  SpatialGrid g{{{1, {4.0, 50.0}}, {2, {5.0, 51.0}}}};
  const auto a = assemble_features(t, average_selection(g), FeatureSet::a, {4.64, 50.65});
  CHECK(a.features.values(0, 0) == 15.0);
  SpatialGrid one{{{1, {4.0, 50.0}}}};
  CHECK(assemble_features(t, average_selection(one), FeatureSet::a, {4.64, 50.65}).features.values(0, 0) == 10.0);
  // Set (b) needs series that are absent.
  try {
    assemble_features(t, average_selection(g), FeatureSet::b, {4.64, 50.65});
    FAIL("expected an assembly error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("SSD") != std::string::npos);
  }
}

}  // TEST_SUITE

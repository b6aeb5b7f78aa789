#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "solarcast/error.hpp"
#include "solarcast/harness.hpp"
#include "solarcast/metrics.hpp"
#include "solarcast/pipeline.hpp"
#include "support.hpp"

using namespace solarcast;
using std::chrono::days;
using std::chrono::hours;

namespace {

// Hourly rows at local wall-clock hours (+01:00), a shaped load factor,
// constant capacity of 1000 MW.
PreparedData hourly_data(Date first, int n_days, std::uint64_t seed, double noise = 0.05) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  const auto n = static_cast<Eigen::Index>(n_days) * 24;
  PreparedData d;
  d.features.values.resize(n, 3);
  d.features.columns = {FeatureInfo{FeatureInfo::Kind::meteo, MetVariable::SNR, 0},
                        FeatureInfo{FeatureInfo::Kind::meteo, MetVariable::TCC, 0},
                        FeatureInfo{FeatureInfo::Kind::zenith, MetVariable::SNR, -1}};
  d.target.resize(n);
  d.capacity = Eigen::VectorXd::Constant(n, 1000.0);
  d.asg.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Timestamp t{std::chrono::sys_seconds(first) + hours(i) - hours(1), 60};
    d.features.timestamps.push_back(t);
    const int h = t.local_hour();
    const double sun = std::max(0.0, std::sin((h - 5) * M_PI / 17.0));
    const double cloud = std::clamp(0.5 + 0.3 * z(rng), 0.0, 1.0);
    d.features.values(i, 0) = sun * (1 - 0.7 * cloud);
    d.features.values(i, 1) = cloud;
    d.features.values(i, 2) = 90 - 60 * sun;
    d.target[i] = std::max(0.0, 0.6 * d.features.values(i, 0) + noise * z(rng));
    d.asg[i] = d.target[i] * 1000.0;
  }
  d.reindex();
  return d;
}

WindowSpec small_test(int train, int n, int cadence = 1) {
  WindowSpec s;
  s.mode = WindowMode::test;
  s.train_days = train;
  s.gap_days = 1;
  s.slice_days = 1;
  s.n_slices = n;
  s.cadence_days = cadence;
  return s;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("run configuration range overrides") {
  const auto j = nlohmann::json::parse(R"({
    "configurations": ["XGBoost-b-k5"],
    "tuning": {"candidates": 3, "ranges": {"XGBoost": [
      {"name": "gamma", "lo": 0, "hi": 0.5, "scale": "linear"},
      {"name": "eta", "lo": 0.05, "hi": 0.1, "scale": "log"}]}}})");
  const auto c = parse_run_config(j, ".");
  REQUIRE(c.ranges.count(Method::XGBoost) == 1);
  const auto& r = c.ranges.at(Method::XGBoost);
  REQUIRE(r.size() == 2);
  CHECK(r[0].name == "gamma");
  CHECK(r[0].hi == 0.5);
  CHECK(r[1].scale == ParamScale::log);
  CHECK(c.candidates == 3);
  auto bad = j;
  bad["tuning"]["bogus"] = 1;
  CHECK_THROWS_AS(parse_run_config(bad, "."), ValidationError);
}

TEST_CASE("configuration ids") {
  ModelConfiguration c{Method::XGBoost, FeatureSet::b, SelectionMode::clustered, 12};
  CHECK(c.id() == "XGBoost-b-k12");
  const auto back = parse_configuration("XGBoost-b-k12");
  CHECK(back.method == Method::XGBoost);
  CHECK(back.k == 12);
  CHECK(parse_configuration("LR-a-average").grid == SelectionMode::average);
  CHECK(parse_configuration("RF-a-k5").id() == "RF-a-k5");
  CHECK_THROWS(parse_configuration("SVM-a-k5"));
  CHECK_THROWS(parse_configuration("RF-c-k5"));
  const std::vector<Method> ms{Method::LR, Method::RF};
  const std::vector<FeatureSet> fs{FeatureSet::a, FeatureSet::b};
  const std::vector<int> gs{0, 5, 12};
  const auto matrix = configuration_matrix(ms, fs, gs);
  CHECK(matrix.size() == 12);
  std::set<std::string> ids;
  for (const auto& m : matrix) ids.insert(m.id());
  CHECK(ids.size() == 12);
  CHECK(matrix.front().id() == "LR-a-average");
  CHECK(matrix.back().id() == "RF-b-k12");
}

TEST_CASE("latin hypercube stratifies every dimension") {
  const auto ranges = default_ranges(Method::XGBoost, 32);
  REQUIRE(ranges.size() == 6);
  for (int n : {2, 7, 20}) {
    const auto cands = latin_hypercube(Method::XGBoost, ranges, n, 42);
    REQUIRE(cands.size() == static_cast<std::size_t>(n));
    for (const auto& r : ranges) {
      std::vector<int> strata;
      for (const auto& c : cands) {
        const double v = c.values.at(r.name);
        CHECK(v >= r.lo);
        CHECK(v <= r.hi);
        if (r.scale == ParamScale::integer) CHECK(v == std::floor(v));
        if (r.scale == ParamScale::integer) continue;
        const double u = r.scale == ParamScale::log
                             ? (std::log(v) - std::log(r.lo)) / (std::log(r.hi) - std::log(r.lo))
                             : (v - r.lo) / (r.hi - r.lo);
        strata.push_back(std::min(n - 1, static_cast<int>(u * n)));
      }
      std::sort(strata.begin(), strata.end());
      if (!strata.empty())
        for (int i = 0; i < static_cast<int>(strata.size()); ++i) CHECK(strata[i] == i);
    }
  }
  // Integer dimension with as many levels as candidates hits every level once.
  const std::vector<ParamRange> levels{{"min_n", 1, 10, ParamScale::integer}};
  const auto c = latin_hypercube(Method::RF, levels, 10, 3);
  std::set<double> seen;
  for (const auto& x : c) seen.insert(x.values.at("min_n"));
  CHECK(seen.size() == 10);

  const auto a = latin_hypercube(Method::XGBoost, ranges, 8, 1);
  CHECK(to_json(a[3]) == to_json(latin_hypercube(Method::XGBoost, ranges, 8, 1)[3]));
  CHECK(candidate_from_json(to_json(a[3])).values == a[3].values);

  const std::vector<ParamRange> bad{{"eta", 0.3, 0.3, ParamScale::log}};
  CHECK_THROWS_AS(latin_hypercube(Method::XGBoost, bad, 4, 0), ValidationError);
  const std::vector<ParamRange> neg{{"eta", -1, 0.3, ParamScale::log}};
  CHECK_THROWS_AS(latin_hypercube(Method::XGBoost, neg, 4, 0), ValidationError);
  CHECK_THROWS_AS(latin_hypercube(Method::XGBoost, ranges, 0, 0), ValidationError);
  CHECK(default_ranges(Method::LR, 10).empty());
  CHECK(default_ranges(Method::RF, 1)[0].hi == 2);
  CHECK(param_range_from_json(to_json(ranges[3])).scale == ParamScale::log);
}

TEST_CASE("standard calendars") {
  const Date first = make_date(2019, 1, 1), last = make_date(2023, 6, 29);
  const auto val = plan_windows(first, last, standard_validation_spec());
  REQUIRE(val.slices.size() == 12);
  CHECK(val.slices[0].train_start == make_date(2019, 1, 5));
  CHECK(val.slices[0].train_end == make_date(2021, 1, 4));
  CHECK(val.slices[0].eval_start == make_date(2021, 1, 5));
  CHECK(val.slices[11].eval_end == make_date(2021, 12, 30));
  for (const auto& s : val.slices) {
    CHECK((s.eval_end - s.eval_start).count() == 29);
    CHECK((s.train_end - s.train_start).count() + 1 == 731);
    CHECK(s.train_end < s.eval_start);
  }

  const auto test = plan_windows(first, last, standard_test_spec());
  REQUIRE(test.slices.size() == 545);
  CHECK(test.slices.front().eval_start == make_date(2022, 1, 1));
  CHECK(test.slices.front().train_start == make_date(2019, 1, 1));
  CHECK(test.slices.front().train_end == make_date(2021, 12, 30));
  CHECK(test.slices.back().eval_start == make_date(2023, 6, 29));
  for (std::size_t i = 0; i < test.slices.size(); ++i) {
    const auto& s = test.slices[i];
    CHECK(s.eval_start == s.eval_end);
    CHECK(s.train_end == s.eval_start - days(2));
    CHECK((s.train_end - s.train_start).count() + 1 == 1095);
    if (i > 0) CHECK(s.eval_start == test.slices[i - 1].eval_start + days(1));
  }
}

TEST_CASE("insufficient history is reported with the shortfall") {
  const Date first = make_date(2019, 1, 1);
  const Date last = first + days(799);
  try {
    plan_windows(first, last, standard_test_spec());
    FAIL("expected PlanningError");
  } catch (const PlanningError& e) {
    CHECK(std::string(e.what()).find("short by") != std::string::npos);
  }
  auto spec = standard_test_spec();
  spec.period_start.reset();
  CHECK_THROWS_AS(plan_windows(first, last, spec), PlanningError);
  spec.n_slices = 0;  // as many as fit
  const auto p = plan_windows(first, first + days(1200), spec);
  CHECK(p.slices.back().eval_start == first + days(1200));
  CHECK(p.slices.front().eval_start == first + days(1096));
}

TEST_CASE("truncated final validation slice") {
  WindowSpec s = standard_validation_spec();
  s.period_start.reset();
  s.train_days = 100;
  s.n_slices = 3;
  test::WarningCapture w;
  const auto p = plan_windows(make_date(2020, 1, 1), make_date(2020, 1, 1) + days(100 + 75 - 1), s);
  REQUIRE(p.slices.size() == 3);
  CHECK((p.slices[2].eval_end - p.slices[2].eval_start).count() + 1 == 15);
  CHECK(w.messages.size() == 1);
  CHECK_THROWS_AS(plan_windows(make_date(2020, 1, 1), make_date(2020, 1, 1) + days(100 + 55), s),
                  PlanningError);
}

TEST_CASE("cadence shares training spans") {
  const auto p = plan_windows(make_date(2020, 1, 1), make_date(2020, 12, 31), small_test(200, 20, 7));
  for (std::size_t i = 0; i < p.slices.size(); ++i) {
    const auto& head = p.slices[(i / 7) * 7];
    CHECK(p.slices[i].train_end == head.train_end);
    CHECK(p.slices[i].train_start == head.train_start);
    CHECK(p.slices[i].train_end < p.slices[i].eval_start - days(1));
  }
}

TEST_CASE("training and forecast rows") {
  const auto d = hourly_data(make_date(2021, 3, 1), 10, 1);
  for (const auto& [date, rows] : d.by_date()) CHECK(rows.size() == 24);
  const auto fr = forecast_rows(d, make_date(2021, 3, 4));
  CHECK(fr.size() == 17);
  for (std::size_t r : fr) CHECK(d.hours.contains(d.features.timestamps[r].local_hour()));
  PreparedData out = d;
  out.outlier_days = {make_date(2021, 3, 4)};
  out.reindex();
  CHECK(training_rows(out, make_date(2021, 3, 3), make_date(2021, 3, 5)).size() == 34);
  CHECK(forecast_rows(out, make_date(2021, 3, 4)).size() == 17);
  CHECK(forecast_rows(out, make_date(2022, 1, 1)).empty());
}

TEST_CASE("tuning") {
  const auto d = hourly_data(make_date(2021, 1, 1), 80, 2);
  WindowSpec vs;
  vs.mode = WindowMode::validation;
  vs.train_days = 40;
  vs.gap_days = 0;
  vs.slice_days = 10;
  vs.n_slices = 3;
  const auto plan = plan_windows(d.features.timestamps, vs);
  const ModelConfiguration rt{Method::RT, FeatureSet::a, SelectionMode::average, 0};
  FitSettings fs;
  fs.n_trees = 20;

  const auto ranges = default_ranges(Method::RT, 3);
  const auto cands = latin_hypercube(Method::RT, ranges, 6, 5);
  const auto one = tune(rt, d, plan, std::span(cands).first(1), fs);
  CHECK(one.best_index == 0);
  CHECK(one.best.values == cands[0].values);

  const auto all = tune(rt, d, plan, cands, fs);
  REQUIRE(all.scores.size() == 6);
  for (const auto& s : all.scores) CHECK(s.rmse >= all.scores[all.best_index].rmse);

  // Direct recomputation of one candidate's pooled MW error.
  double se = 0;
  std::size_t count = 0;
  for (const auto& sl : plan.slices) {
    const auto m = fit_on_span(Method::RT, cands[2], d, sl.train_start, sl.train_end, fs);
    for (std::size_t r : training_rows(d, sl.eval_start, sl.eval_end)) {
      const Eigen::MatrixXd row = d.features.values.row(static_cast<Eigen::Index>(r));
      const double f = std::max(0.0, predict(m, row)[0]) * 1000.0;
      se += std::pow(f - d.asg[static_cast<Eigen::Index>(r)], 2);
      ++count;
    }
  }
  CHECK(all.scores[2].rmse == doctest::Approx(std::sqrt(se / count)).epsilon(1e-10));

  // A candidate forced to a constant predictor loses to the others.
  std::vector<HyperCandidate> with_bad = cands;
  HyperCandidate root{Method::RT, {{"alpha", 1.0}, {"MaxDepth", 1}, {"min_n", 2}}};
  with_bad.insert(with_bad.begin(), root);
  const auto dom = tune(rt, d, plan, with_bad, fs);
  CHECK(dom.best_index != 0);

  // Reordering candidates moves the argmin with them.
  std::vector<HyperCandidate> rev(cands.rbegin(), cands.rend());
  const auto r = tune(rt, d, plan, rev, fs);
  CHECK(r.best.values == all.best.values);

  const ModelConfiguration lr{Method::LR, FeatureSet::a, SelectionMode::average, 0};
  CHECK_THROWS_WITH_AS(tune(lr, d, plan, cands, fs), "LR-a-average: no tunable parameters",
                       ValidationError);

  std::vector<CandidateScore> failed(3);
  for (auto& s : failed) s.failed = true;
  CHECK_THROWS_AS(select_best(failed), ComputationError);
  failed[1] = {5.0, false, ""};
  CHECK(select_best(failed) == 1);
}

TEST_CASE("backtest") {
  const auto d = hourly_data(make_date(2021, 1, 1), 90, 3);
  const auto plan = plan_windows(d.features.timestamps, small_test(50, 30, 1));
  REQUIRE(plan.slices.size() == 30);
  FitSettings fs;
  fs.n_trees = 15;
  fs.seed = 11;
  const ModelConfiguration rf{Method::RF, FeatureSet::a, SelectionMode::average, 0};
  const HyperCandidate p{Method::RF, {{"mtry", 2}, {"min_n", 5}}};
  const auto res = backtest(rf, p, d, plan, fs);
  REQUIRE(res.days.size() == 30);
  CHECK(res.skipped.empty());
  CHECK(res.config_id == "RF-a-average");
  for (std::size_t i = 1; i < res.days.size(); ++i) CHECK(res.days[i - 1].date < res.days[i].date);

  // Manual loop over three forecast days.
  for (std::size_t s : {0, 13, 29}) {
    const auto& sl = plan.slices[s];
    const auto m = fit_on_span(Method::RF, p, d, sl.train_start, sl.train_end, fs);
    const auto rows = forecast_rows(d, sl.eval_start);
    std::array<double, 24> expect{};
    for (std::size_t r : rows) {
      const Eigen::MatrixXd row = d.features.values.row(static_cast<Eigen::Index>(r));
      expect[static_cast<std::size_t>(d.features.timestamps[r].local_hour())] =
          std::max(0.0, predict(m, row)[0]) * 1000.0;
    }
    CHECK(res.days[s].date == sl.eval_start);
    for (int h = 0; h < 24; ++h) {
      CHECK(res.days[s].forecast[h] == doctest::Approx(expect[h]).epsilon(1e-12));
      CHECK(res.days[s].actual[h] ==
            d.asg[static_cast<Eigen::Index>(d.by_date().at(sl.eval_start)[h])]);
    }
    for (int h : {0, 1, 2, 3, 4, 22, 23}) CHECK(res.days[s].forecast[h] == 0.0);
  }

  fs.workers = 3;
  const auto again = backtest(rf, p, d, plan, fs);
  for (std::size_t i = 0; i < res.days.size(); ++i) CHECK(again.days[i].forecast == res.days[i].forecast);

  const auto weekly = backtest(rf, p, d, plan_windows(d.features.timestamps, small_test(50, 30, 7)), fs);
  CHECK(weekly.days.size() == 30);
  CHECK(weekly.days[0].forecast == res.days[0].forecast);
}

TEST_CASE("constant target backtests to the constant") {
  auto d = hourly_data(make_date(2021, 1, 1), 40, 4);
  d.target.setConstant(0.25);
  for (Eigen::Index i = 0; i < d.asg.size(); ++i)
    d.asg[i] = d.hours.contains(d.features.timestamps[static_cast<std::size_t>(i)].local_hour()) ? 250.0 : 0.0;
  const auto plan = plan_windows(d.features.timestamps, small_test(20, 10));
  FitSettings fs;
  fs.n_trees = 10;
  test::WarningCapture w;  // constant design columns are rank deficient for LR
  for (Method m : {Method::LR, Method::RT, Method::RF, Method::XGBoost}) {
    const ModelConfiguration c{m, FeatureSet::a, SelectionMode::average, 0};
    const auto res = backtest(c, HyperCandidate{m, {}}, d, plan, fs);
    const auto met = aggregate_metrics(res);
    CAPTURE(method_name(m));
    CHECK(met.rmse < 1e-6);
  }
}

TEST_CASE("days with missing hours are skipped and recorded") {
  auto full = hourly_data(make_date(2021, 1, 1), 40, 5);
  // Drop the 12:00 row of one test day.
  const Date hole = make_date(2021, 2, 3);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < full.features.timestamps.size(); ++i) {
    const auto& t = full.features.timestamps[i];
    if (!(t.local_date() == hole && t.local_hour() == 12)) keep.push_back(i);
  }
  PreparedData d;
  d.features = full.features.select_rows(keep);
  d.target.resize(static_cast<Eigen::Index>(keep.size()));
  d.capacity.resize(d.target.size());
  d.asg.resize(d.target.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(keep[i]);
    d.target[static_cast<Eigen::Index>(i)] = full.target[k];
    d.capacity[static_cast<Eigen::Index>(i)] = full.capacity[k];
    d.asg[static_cast<Eigen::Index>(i)] = full.asg[k];
  }
  d.reindex();
  const auto plan = plan_windows(d.features.timestamps, small_test(25, 10));
  test::WarningCapture w;
  const ModelConfiguration lr{Method::LR, FeatureSet::a, SelectionMode::average, 0};
  const auto res = backtest(lr, {}, d, plan, {});
  CHECK(res.days.size() == 9);
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0] == hole);
  CHECK(!w.messages.empty());
}

}  // TEST_SUITE

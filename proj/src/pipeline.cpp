#include "solarcast/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <set>

#include "solarcast/parallel.hpp"
#include "solarcast/artifacts.hpp"
#include "solarcast/csv.hpp"
#include "solarcast/error.hpp"
#include "solarcast/geo.hpp"
#include "solarcast/shap.hpp"
#include "solarcast/solarpos.hpp"

namespace solarcast {

const char* const kVersion = "0.1.0";

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("unknown configuration key '" + where + "." + key + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p))
    throw IngestionError(what + " not found: '" + p.string() + "'");
}

std::vector<ModelConfiguration> parse_configurations(const json& j) {
  if (j.is_array()) {
    std::vector<ModelConfiguration> out;
    for (const auto& id : j) out.push_back(parse_configuration(id.get<std::string>()));
    return out;
  }
  check_keys(j, {"methods", "feature_sets", "grids"}, "configurations");
  std::vector<Method> methods;
  for (const auto& m : j.value("methods", json::array({"LR", "RT", "RF", "XGBoost"})))
    methods.push_back(parse_method(m.get<std::string>()));
  std::vector<FeatureSet> sets;
  for (const auto& s : j.value("feature_sets", json::array({"a", "b"})))
    sets.push_back(parse_feature_set(s.get<std::string>()));
  std::vector<int> grids;
  for (const auto& g : j.value("grids", json::array({5, 12}))) {
    if (g.is_string() && g.get<std::string>() == "average") grids.push_back(0);
    else grids.push_back(g.get<int>());
  }
  return configuration_matrix(methods, sets, grids);
}

// Stage timing and seeds appended to out/manifest.json.
class Manifest {
 public:
  Manifest(const RunConfig& c, std::string stage)
      : config_(c), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

  json& extra() { return extra_; }

  void commit() {
    const fs::path path = config_.out / "manifest.json";
    json m = fs::exists(path) ? read_json(path) : json::object();
    m["version"] = kVersion;
    m["config_path"] = config_.config_path.string();
    m["config_hash"] = fnv1a_hex(config_.raw.dump());
    m["seed"] = config_.seed;
    m["workers"] = config_.workers;
    m["seeds"] = {{"synth", config_.synth.seed},
                  {"kmeans", config_.stage_seed("kmeans")},
                  {"fit", config_.stage_seed("fit")},
                  {"mcs", config_.mcs.seed}};
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json entry = {{"seconds", seconds}};
    for (const auto& [k, v] : extra_.items()) entry[k] = v;
    m["stages"][stage_] = entry;
    write_json(m, path);
  }

 private:
  const RunConfig& config_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
  json extra_ = json::object();
};

GeoCoordinate reference_for(const RunConfig& c, const SpatialGrid& grid) {
  if (c.refloc) return *c.refloc;
  const auto coords = grid.coordinates();
  return reference_coordinate(coords);
}

PreparedData load_prepared(const RunConfig& c, const ModelConfiguration& m) {
  const fs::path dir = prepared_dir(c, m);
  require_file(dir / "feature_schema.json", "prepared features for " + m.id() + " (run 'prepare')");
  return read_prepared(dir, c.outliers, c.hours);
}

HyperCandidate load_tuned(const RunConfig& c, const ModelConfiguration& m) {
  const fs::path p = tuned_path(c, m);
  require_file(p, "tuned parameters for " + m.id() + " (run 'tune')");
  const json j = read_json(p);
  return candidate_from_json({{"method", method_name(m.method)}, {"values", j.at("params")}});
}

FitSettings fit_settings(const RunConfig& c) {
  return {c.n_trees, c.workers, c.stage_seed("fit")};
}

// Console figures only; artifacts keep full precision.
std::string brief(double v) {
  std::ostringstream s;
  s << std::setprecision(5) << v;
  return s.str();
}

std::string month_tag(Date d) { return format_date(d).substr(0, 7); }

}  // namespace

std::uint64_t RunConfig::stage_seed(std::string_view stage) const {
  return derive_seed(seed, fnv1a(stage));
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  check_keys(j, {"out", "seed", "workers", "data", "synth", "clustering", "configurations", "refloc",
                 "solar_offset_minutes", "hours", "outliers", "n_trees", "tuning", "validation",
                 "test", "mcs", "explain"},
             "config");
  RunConfig c;
  c.raw = j;
  c.out = resolve(base_dir, j.value("out", std::string("out")));
  c.seed = j.value("seed", std::uint64_t{0});
  c.workers = j.value("workers", 1);
  if (c.workers < 1) throw ValidationError("workers must be >= 1");

  const json data = j.value("data", json::object());
  check_keys(data, {"dir", "asg", "capacity", "meteo", "grid"}, "data");
  c.data_dir = data.contains("dir") ? resolve(base_dir, data["dir"].get<std::string>()) : c.out / "data";
  c.data.asg = resolve(c.data_dir, data.value("asg", std::string("asg.csv")));
  c.data.capacity = resolve(c.data_dir, data.value("capacity", std::string("capacity.csv")));
  c.data.meteo = resolve(c.data_dir, data.value("meteo", std::string("meteo.csv")));
  c.grid_path = resolve(c.data_dir, data.value("grid", std::string("grid.csv")));

  json synth = j.value("synth", json::object());
  check_keys(synth, {"start", "days", "seed", "noise", "clouds", "temp_coeff", "efficiency", "ac_limit",
                     "ic_start", "ic_end", "refloc", "grid"},
             "synth");
  if (synth.contains("grid")) c.synth_grid = resolve(base_dir, synth["grid"].get<std::string>());
  c.synth = synth_params_from_json(synth);
  if (!synth.contains("seed")) c.synth.seed = c.seed;

  const json cl = j.value("clustering", json::object());
  check_keys(cl, {"restarts", "max_iterations"}, "clustering");
  c.kmeans_restarts = cl.value("restarts", c.kmeans_restarts);
  c.kmeans_iterations = cl.value("max_iterations", c.kmeans_iterations);

  c.configurations = parse_configurations(j.value("configurations", json::object()));
  if (c.configurations.empty()) throw ValidationError("configuration matrix is empty");

  if (j.contains("refloc")) {
    const auto& r = j["refloc"];
    if (!(r.is_string() && r.get<std::string>() == "auto"))
      c.refloc = GeoCoordinate::checked(r.at(0).get<double>(), r.at(1).get<double>());
  } else {
    c.refloc = GeoCoordinate{4.64, 50.65};
  }
  c.solar_offset_minutes = j.value("solar_offset_minutes", 0);
  if (j.contains("hours")) {
    c.hours = {j["hours"].at(0).get<int>(), j["hours"].at(1).get<int>()};
    if (c.hours.first < 0 || c.hours.last > 23 || c.hours.first > c.hours.last)
      throw ValidationError("hours must be [first, last] within 0..23");
  }
  for (const auto& d : j.value("outliers", json::array())) c.outliers.push_back(parse_date(d.get<std::string>()));

  c.n_trees = j.value("n_trees", c.n_trees);
  if (c.n_trees < 1) throw ValidationError("n_trees must be >= 1");
  const json tuning = j.value("tuning", json::object());
  check_keys(tuning, {"candidates", "ranges"}, "tuning");
  c.candidates = tuning.value("candidates", c.candidates);
  if (c.candidates < 1) throw ValidationError("tuning.candidates must be >= 1");
  const json range_overrides = tuning.value("ranges", json::object());
  for (const auto& [name, list] : range_overrides.items()) {
    auto& v = c.ranges[parse_method(name)];
    for (const auto& r : list) {
      v.push_back(param_range_from_json(r));
      v.back().validate();
    }
  }
  const auto window_keys = {"period_start", "train_days", "gap_days", "slice_days", "n_slices", "cadence_days"};
  if (j.contains("validation")) {
    check_keys(j["validation"], window_keys, "validation");
    c.validation = window_spec_from_json(j["validation"], WindowMode::validation);
  }
  if (j.contains("test")) {
    check_keys(j["test"], window_keys, "test");
    c.test = window_spec_from_json(j["test"], WindowMode::test);
  }

  const json mcs = j.value("mcs", json::object());
  check_keys(mcs, {"bootstrap", "block_length"}, "mcs");
  c.mcs.bootstrap = mcs.value("bootstrap", c.mcs.bootstrap);
  c.mcs.block_length = mcs.value("block_length", c.mcs.block_length);
  c.mcs.seed = c.stage_seed("mcs");

  const json ex = j.value("explain", json::object());
  check_keys(ex, {"configurations", "max_rows_per_month"}, "explain");
  for (const auto& id : ex.value("configurations", json::array())) {
    c.explain.push_back(id.get<std::string>());
    parse_configuration(c.explain.back());
  }
  c.shap_rows_per_month = ex.value("max_rows_per_month", std::size_t{0});
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  require_file(path, "configuration file");
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  RunConfig c = parse_run_config(j, fs::absolute(path).parent_path());
  c.config_path = fs::absolute(path);
  return c;
}

void restrict_configurations(RunConfig& config, const std::vector<std::string>& ids) {
  std::vector<ModelConfiguration> keep;
  for (const auto& id : ids) {
    const auto it = std::find_if(config.configurations.begin(), config.configurations.end(),
                                 [&](const ModelConfiguration& m) { return m.id() == id; });
    if (it == config.configurations.end())
      throw ValidationError("configuration '" + id + "' is not in the configured matrix");
    keep.push_back(*it);
  }
  config.configurations = std::move(keep);
}

fs::path selection_path(const RunConfig& c, SelectionMode mode, int k) {
  return c.out / "selection" / (selection_tag(mode, k) + ".json");
}
fs::path prepared_dir(const RunConfig& c, const ModelConfiguration& m) {
  return c.out / "prepared" / (std::string(feature_set_name(m.features)) + "-" + selection_tag(m.grid, m.k));
}
fs::path tuned_path(const RunConfig& c, const ModelConfiguration& m) {
  return c.out / "tuned" / (m.id() + ".json");
}
fs::path backtest_path(const RunConfig& c, const ModelConfiguration& m) {
  return c.out / "backtest" / (m.id() + ".csv");
}
fs::path model_path(const RunConfig& c, const ModelConfiguration& m) {
  return c.out / "models" / (m.id() + ".json");
}
fs::path shap_dir(const RunConfig& c, const ModelConfiguration& m) { return c.out / "shap" / m.id(); }

void cmd_synth(const RunConfig& c) {
  Manifest manifest(c, "synth");
  if (c.synth_grid.empty()) throw ValidationError("synth.grid is required for the synth stage");
  require_file(c.synth_grid, "synth grid");
  const auto grid = load_grid(c.synth_grid);
  const auto data = synthesize(grid, c.synth);
  write_dataset(data, c.data_dir);
  manifest.extra()["rows"] = data.table.rows();
  manifest.extra()["dir"] = c.data_dir.string();
  std::cout << "synth: " << data.table.rows() << " hourly rows, " << grid.cells.size() << " cells -> "
            << c.data_dir.string() << '\n';
  manifest.commit();
}

void cmd_cluster(const RunConfig& c) {
  Manifest manifest(c, "cluster");
  require_file(c.grid_path, "grid file");
  const auto grid = load_grid(c.grid_path);
  std::set<std::pair<SelectionMode, int>> done;
  for (const auto& m : c.configurations) {
    const int k = m.grid == SelectionMode::average ? 0 : m.k;
    if (!done.insert({m.grid, k}).second) continue;
    GridSelection sel;
    json j;
    if (m.grid == SelectionMode::average) {
      sel = average_selection(grid);
      j = to_json(sel);
    } else {
      KMeansTrace trace;
      sel = kmeans_haversine(grid, k, {c.stage_seed("kmeans"), c.kmeans_restarts, c.kmeans_iterations}, &trace);
      j = to_json(sel);
      j["trace"] = trace;
    }
    write_json(j, selection_path(c, m.grid, k));
    std::cout << "cluster: " << selection_tag(m.grid, k) << " objective " << brief(sel.objective)
              << " km^2\n";
  }
  manifest.commit();
}

void cmd_prepare(const RunConfig& c) {
  Manifest manifest(c, "prepare");
  require_file(c.grid_path, "grid file");
  const auto grid = load_grid(c.grid_path);
  const auto table = load_csv(c.data);
  const GeoCoordinate ref = reference_for(c, grid);
  std::set<std::string> done;
  for (const auto& m : c.configurations) {
    const fs::path dir = prepared_dir(c, m);
    if (!done.insert(dir.string()).second) continue;
    const fs::path sp = selection_path(c, m.grid, m.k);
    require_file(sp, "grid selection (run 'cluster')");
    const auto sel = selection_from_json(read_json(sp));
    for (int id : sel.location_ids()) grid.cell(id);  // selection must match the grid
    const auto a = assemble_features(table, sel, m.features, ref, {c.solar_offset_minutes});
    write_prepared(a.features, a.target, a.capacity.ic, table.asg, dir);
    std::cout << "prepare: " << dir.filename().string() << " " << a.features.rows() << " x "
              << a.features.cols() << '\n';
  }
  manifest.extra()["refloc"] = {ref.lon, ref.lat};
  manifest.commit();
}

void cmd_tune(const RunConfig& c) {
  Manifest manifest(c, "tune");
  for (const auto& m : c.configurations) {
    const auto data = load_prepared(c, m);
    json out = {{"config_id", m.id()}, {"method", method_name(m.method)}};
    if (m.method == Method::LR) {
      out["params"] = json::object();
      out["note"] = "no tunable parameters";
      write_json(out, tuned_path(c, m));
      std::cout << "tune: " << m.id() << " (nothing to tune)\n";
      continue;
    }
    const auto plan = plan_windows(data.features.timestamps, c.validation);
    const auto it = c.ranges.find(m.method);
    const auto ranges = it != c.ranges.end() ? it->second
                                             : default_ranges(m.method, static_cast<int>(data.features.cols()));
    const std::uint64_t lhs_seed = c.stage_seed("lhs:" + m.id());
    const auto cands = latin_hypercube(m.method, ranges, c.candidates, lhs_seed);
    const auto res = tune(m, data, plan, cands, fit_settings(c));
    out["params"] = to_json(res.best)["values"];
    out["best_index"] = res.best_index;
    out["validation_rmse"] = res.scores[res.best_index].rmse;
    out["lhs_seed"] = lhs_seed;
    out["ranges"] = json::array();
    for (const auto& r : ranges) out["ranges"].push_back(to_json(r));
    json scores = json::array();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      json s = {{"values", to_json(cands[i])["values"]}, {"failed", res.scores[i].failed}};
      if (res.scores[i].failed) s["error"] = res.scores[i].error;
      else s["rmse"] = res.scores[i].rmse;
      scores.push_back(s);
    }
    out["candidates"] = scores;
    out["validation_slices"] = plan.slices.size();
    write_json(out, tuned_path(c, m));
    std::cout << "tune: " << m.id() << " validation RMSE " << brief(res.scores[res.best_index].rmse)
              << " MW\n";
  }
  manifest.commit();
}

void cmd_backtest(const RunConfig& c) {
  Manifest manifest(c, "backtest");
  for (const auto& m : c.configurations) {
    const auto data = load_prepared(c, m);
    const auto params = load_tuned(c, m);
    const auto plan = plan_windows(data.features.timestamps, c.test);
    const auto settings = fit_settings(c);
    const auto res = backtest(m, params, data, plan, settings);
    write_backtest_csv(res, backtest_path(c, m));
    // Model of the last training span, kept for inspection and explanation.
    const auto& last = plan.slices.back();
    const auto model = fit_on_span(m.method, params, data, last.train_start, last.train_end, settings);
    json mj = to_json(model);
    mj["config_id"] = m.id();
    mj["train_start"] = format_date(last.train_start);
    mj["train_end"] = format_date(last.train_end);
    write_json(mj, model_path(c, m));
    json skipped = json::array();
    for (Date d : res.skipped) skipped.push_back(format_date(d));
    manifest.extra()["skipped"][m.id()] = skipped;
    const auto met = aggregate_metrics(res);
    std::cout << "backtest: " << m.id() << " " << res.days.size() << " days, RMSE " << brief(met.rmse)
              << " MW\n";
  }
  manifest.commit();
}

void cmd_evaluate(const RunConfig& c, const std::vector<fs::path>& inputs) {
  Manifest manifest(c, "evaluate");
  std::vector<fs::path> files = inputs;
  if (files.empty())
    for (const auto& m : c.configurations) files.push_back(backtest_path(c, m));
  std::vector<BacktestResult> results;
  std::vector<std::string> names;
  for (const auto& f : files) {
    require_file(f, "backtest result (run 'backtest')");
    results.push_back(read_backtest_csv(f));
    std::string name = results.back().config_id;
    if (std::find(names.begin(), names.end(), name) != names.end()) name += "#" + f.stem().string();
    while (std::find(names.begin(), names.end(), name) != names.end()) name += "'";
    names.push_back(name);
  }
  if (results.empty()) throw ValidationError("evaluate needs at least one backtest result");

  // Align on the days every result forecast.
  std::set<Date> common;
  for (const auto& d : results[0].days) common.insert(d.date);
  for (std::size_t r = 1; r < results.size(); ++r) {
    std::set<Date> mine;
    for (const auto& d : results[r].days) mine.insert(d.date);
    std::set<Date> both;
    std::set_intersection(common.begin(), common.end(), mine.begin(), mine.end(), std::inserter(both, both.end()));
    common = std::move(both);
  }
  if (common.empty()) throw ComputationError("backtest results share no forecast day");
  for (auto& res : results) {
    const std::size_t before = res.days.size();
    std::erase_if(res.days, [&](const BacktestDay& d) { return !common.count(d.date); });
    if (res.days.size() != before)
      warn(res.config_id + ": " + std::to_string(before - res.days.size()) + " days outside the common span dropped");
  }

  const std::size_t n_models = results.size();
  const auto n_obs = static_cast<Eigen::Index>(common.size() * 24);
  std::vector<AggregateMetrics> agg;
  std::vector<LossSeries> losses;
  for (const auto& res : results) {
    agg.push_back(aggregate_metrics(res));
    losses.push_back(loss_series(res.actual_series(), res.forecast_series()));
  }

  const LossKind kinds[] = {LossKind::squared, LossKind::absolute, LossKind::smape};
  std::vector<McsResult> mcs;
  for (LossKind kind : kinds) {
    if (n_models < 2) {
      mcs.push_back({{0}, {1.0}, {true}, {true}});
      continue;
    }
    Eigen::MatrixXd L(n_obs, static_cast<Eigen::Index>(n_models));
    for (std::size_t m = 0; m < n_models; ++m) L.col(static_cast<Eigen::Index>(m)) = losses[m].get(kind);
    mcs.push_back(model_confidence_set(L, c.mcs));
  }
  if (n_models < 2) warn("evaluate: a single result; the confidence set is trivially that model");

  const fs::path dir = c.out / "evaluation";
  fs::create_directories(dir);
  {
    std::ofstream t(dir / "table.csv");
    t << "config_id,rmse,mae,smape,rmse_mcs99,rmse_mcs90,mae_mcs99,mae_mcs90,smape_mcs99,smape_mcs90,"
         "rmse_p,mae_p,smape_p\n";
    for (std::size_t m = 0; m < n_models; ++m) {
      t << names[m] << ',' << format_number(agg[m].rmse) << ',' << format_number(agg[m].mae) << ','
        << format_number(agg[m].smape);
      for (const auto& r : mcs) t << ',' << (r.in_99[m] ? 1 : 0) << ',' << (r.in_90[m] ? 1 : 0);
      for (const auto& r : mcs) t << ',' << format_number(r.pvalues[m]);
      t << '\n';
    }
  }
  {
    std::ofstream d(dir / "daily.csv"), cu(dir / "cumulative.csv");
    d << "config_id,date,rmse,mae,smape\n";
    cu << "config_id,date,rmse,mae,smape\n";
    for (std::size_t m = 0; m < n_models; ++m) {
      const auto daily = daily_metrics(results[m]);
      const auto cum = cumulative_metrics(daily);
      for (std::size_t i = 0; i < daily.size(); ++i) {
        d << names[m] << ',' << format_date(daily[i].date) << ',' << format_number(daily[i].rmse) << ','
          << format_number(daily[i].mae) << ',' << format_number(daily[i].smape) << '\n';
        cu << names[m] << ',' << format_date(cum[i].date) << ',' << format_number(cum[i].rmse) << ','
           << format_number(cum[i].mae) << ',' << format_number(cum[i].smape) << '\n';
      }
    }
  }
  json summary = {{"days", common.size()}, {"bootstrap", c.mcs.bootstrap}, {"block_length", c.mcs.block_length},
                  {"models", json::array()}};
  for (std::size_t m = 0; m < n_models; ++m) {
    json e = {{"config_id", names[m]}, {"rmse", agg[m].rmse}, {"mae", agg[m].mae}, {"smape", agg[m].smape}};
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string key(loss_kind_name(kinds[k]));
      e["mcs"][key] = {{"p", mcs[k].pvalues[m]}, {"in_99", static_cast<bool>(mcs[k].in_99[m])},
                       {"in_90", static_cast<bool>(mcs[k].in_90[m])}};
    }
    summary["models"].push_back(e);
    std::cout << "evaluate: " << names[m] << " RMSE " << brief(agg[m].rmse) << " MAE "
              << brief(agg[m].mae) << " SMAPE " << brief(agg[m].smape) << '\n';
  }
  write_json(summary, dir / "evaluation.json");
  manifest.commit();
}

void cmd_explain(const RunConfig& c) {
  Manifest manifest(c, "explain");
  std::vector<ModelConfiguration> targets;
  if (c.explain.empty()) {
    targets = c.configurations;
  } else {
    for (const auto& id : c.explain) targets.push_back(parse_configuration(id));
  }
  const auto settings = fit_settings(c);
  for (const auto& m : targets) {
    const auto data = load_prepared(c, m);
    const auto params = load_tuned(c, m);
    const auto plan = plan_windows(data.features.timestamps, c.test);
    std::vector<std::size_t> eligible;
    for (Date d = plan.slices.front().eval_start; d <= plan.slices.back().eval_end; d += std::chrono::days(1))
      for (std::size_t r : forecast_rows(data, d)) eligible.push_back(r);

    std::vector<EnsembleModel> models;
    ModelFactory factory = [&](const WindowSlice& s) {
      models.push_back(fit_on_span(m.method, params, data, s.train_start, s.train_end, settings));
      return models.back();
    };
    std::vector<ShapMatrix> matrices;
    const auto report = monthly_schedule(factory, plan, data.features, eligible,
                                         {c.shap_rows_per_month, c.workers}, &matrices);
    if (report.months.empty()) throw ExplainError(m.id() + ": no month to explain");

    // The factory runs only for months with rows, so models line up with months.
    double max_err = 0.0, max_pred = 0.0;
    const fs::path dir = shap_dir(c, m);
    const auto names = data.features.names();
    for (std::size_t k = 0; k < report.months.size(); ++k) {
      const auto& month = report.months[k];
      const Eigen::MatrixXd X = data.features.select_rows(month.row_index).values;
      const Eigen::VectorXd pred = predict(models[k], X);
      const Eigen::VectorXd recon = matrices[k].values.rowwise().sum().array() + matrices[k].base;
      max_err = std::max(max_err, (pred - recon).cwiseAbs().maxCoeff());
      max_pred = std::max(max_pred, pred.cwiseAbs().maxCoeff());
      std::vector<Timestamp> stamps;
      for (std::size_t r : month.row_index) stamps.push_back(data.features.timestamps[r]);
      write_shap_rows(matrices[k], stamps, names, dir / "rows" / (month_tag(month.month) + ".csv"));
    }
    if (max_err > 1e-8 * std::max(1.0, max_pred))
      warn(m.id() + ": attribution additivity error " + format_number(max_err));
    const auto views = aggregate_views(report);
    write_views(report, views, dir);

    auto ranked = views.features;
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    json summary = {{"config_id", m.id()},
                    {"months", report.months.size()},
                    {"max_additivity_error", max_err},
                    {"ranking", json::array()}};
    for (const auto& [name, value] : ranked) summary["ranking"].push_back({{"feature", name}, {"importance", value}});
    write_json(summary, dir / "summary.json");
    std::cout << "explain: " << m.id() << " " << report.months.size() << " months, top feature "
              << ranked.front().first << '\n';
  }
  manifest.commit();
}

void run_command(const std::string& name, const RunConfig& config) {
  if (name == "synth") cmd_synth(config);
  else if (name == "cluster") cmd_cluster(config);
  else if (name == "prepare") cmd_prepare(config);
  else if (name == "tune") cmd_tune(config);
  else if (name == "backtest") cmd_backtest(config);
  else if (name == "evaluate") cmd_evaluate(config);
  else if (name == "explain") cmd_explain(config);
  else if (name == "all") {
    for (const char* s : {"cluster", "prepare", "tune", "backtest", "evaluate", "explain"}) run_command(s, config);
  } else {
    throw ValidationError("unknown command '" + name + "'");
  }
}

}  // namespace solarcast

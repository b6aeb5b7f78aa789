#include "solarcast/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "solarcast/error.hpp"
#include "solarcast/parallel.hpp"

namespace solarcast {

namespace {

using std::chrono::days;

int day_count(Date a, Date b) { return static_cast<int>((b - a).count()); }

double unit_draw(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
  return out;
}

int as_int(double v) { return static_cast<int>(std::llround(v)); }

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::LR: return "LR";
    case Method::RT: return "RT";
    case Method::RF: return "RF";
    case Method::XGBoost: return "XGBoost";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::LR, Method::RT, Method::RF, Method::XGBoost})
    if (method_name(m) == name) return m;
  throw ValidationError("unknown method '" + std::string(name) + "' (LR, RT, RF, XGBoost)");
}

std::string ModelConfiguration::id() const {
  std::string out = std::string(method_name(method)) + "-" + std::string(feature_set_name(features));
  out += grid == SelectionMode::average ? "-average" : "-k" + std::to_string(k);
  return out;
}

ModelConfiguration parse_configuration(std::string_view id) {
  const auto p1 = id.find('-');
  const auto p2 = p1 == std::string_view::npos ? p1 : id.find('-', p1 + 1);
  if (p2 == std::string_view::npos)
    throw ValidationError("configuration id '" + std::string(id) + "' is not method-set-grid");
  ModelConfiguration c;
  c.method = parse_method(id.substr(0, p1));
  c.features = parse_feature_set(id.substr(p1 + 1, p2 - p1 - 1));
  const auto grid = id.substr(p2 + 1);
  if (grid == "average") {
    c.grid = SelectionMode::average;
  } else if (grid.size() > 1 && grid[0] == 'k') {
    c.grid = SelectionMode::clustered;
    try {
      c.k = std::stoi(std::string(grid.substr(1)));
    } catch (const std::exception&) {
      throw ValidationError("bad grid tag '" + std::string(grid) + "'");
    }
    if (c.k < 1) throw ValidationError("bad grid tag '" + std::string(grid) + "'");
  } else {
    throw ValidationError("bad grid tag '" + std::string(grid) + "' (average or kN)");
  }
  return c;
}

std::vector<ModelConfiguration> configuration_matrix(std::span<const Method> methods,
                                                     std::span<const FeatureSet> sets,
                                                     std::span<const int> grids) {
  std::vector<ModelConfiguration> out;
  for (Method m : methods)
    for (FeatureSet s : sets)
      for (int k : grids) {
        ModelConfiguration c;
        c.method = m;
        c.features = s;
        c.grid = k <= 0 ? SelectionMode::average : SelectionMode::clustered;
        c.k = std::max(k, 0);
        out.push_back(c);
      }
  return out;
}

void ParamRange::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw ValidationError("range '" + name + "' needs lo < hi");
  if (scale == ParamScale::log && !(lo > 0.0))
    throw ValidationError("log range '" + name + "' needs lo > 0");
  if (scale == ParamScale::integer && (lo != std::floor(lo) || hi != std::floor(hi)))
    throw ValidationError("integer range '" + name + "' needs integral bounds");
}

std::vector<ParamRange> default_ranges(Method method, int n_features) {
  const double p = std::max(1, n_features);
  const ParamRange alpha{"alpha", 1e-5, 1e-1, ParamScale::log};
  const ParamRange depth{"MaxDepth", 2, 12, ParamScale::integer};
  const ParamRange min_n{"min_n", 2, 40, ParamScale::integer};
  // A one-feature design has mtry fixed at 1; the range is widened so it
  // stays valid and the draw is clamped by the fitter.
  const ParamRange mtry{"mtry", 1, std::max(2.0, p), ParamScale::integer};
  const ParamRange eta{"eta", 0.01, 0.3, ParamScale::log};
  const ParamRange gamma{"gamma", 0, 10, ParamScale::linear};
  const ParamRange sub{"SubSample", 0.5, 1.0, ParamScale::linear};
  switch (method) {
    case Method::LR: return {};
    case Method::RT: return {alpha, depth, min_n};
    case Method::RF: return {mtry, min_n};
    case Method::XGBoost: return {mtry, min_n, depth, eta, gamma, sub};
  }
  return {};
}

nlohmann::json to_json(const ParamRange& r) {
  const char* scale = r.scale == ParamScale::log ? "log"
                      : r.scale == ParamScale::integer ? "integer"
                                                        : "linear";
  return {{"name", r.name}, {"lo", r.lo}, {"hi", r.hi}, {"scale", scale}};
}

ParamRange param_range_from_json(const nlohmann::json& j) {
  ParamRange r;
  r.name = j.at("name").get<std::string>();
  r.lo = j.at("lo").get<double>();
  r.hi = j.at("hi").get<double>();
  const auto scale = j.value("scale", std::string("linear"));
  if (scale == "linear") r.scale = ParamScale::linear;
  else if (scale == "log") r.scale = ParamScale::log;
  else if (scale == "integer") r.scale = ParamScale::integer;
  else throw ValidationError("range '" + r.name + "': unknown scale '" + scale + "'");
  r.validate();
  return r;
}

double HyperCandidate::get(std::string_view name, double fallback) const {
  const auto it = values.find(std::string(name));
  return it == values.end() ? fallback : it->second;
}

nlohmann::json to_json(const HyperCandidate& c) {
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [k, v] : c.values) values[k] = v;
  return {{"method", method_name(c.method)}, {"values", values}};
}

HyperCandidate candidate_from_json(const nlohmann::json& j) {
  HyperCandidate c;
  c.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("values"))
    for (const auto& [k, v] : j.at("values").items()) c.values[k] = v.get<double>();
  return c;
}

std::vector<HyperCandidate> latin_hypercube(Method method, std::span<const ParamRange> ranges,
                                            int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("latin_hypercube needs n >= 1");
  for (const auto& r : ranges) r.validate();
  std::vector<HyperCandidate> out(static_cast<std::size_t>(n));
  for (auto& c : out) c.method = method;
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (std::size_t d = 0; d < ranges.size(); ++d) {
    const auto& r = ranges[d];
    std::uint64_t state = derive_seed(seed, d);
    auto next = [&state] {
      state = derive_seed(state, 0);
      return state;
    };
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i-- > 1;) std::swap(perm[i], perm[next() % (i + 1)]);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double u = (perm[i] + unit_draw(next())) / n;
      double v = 0.0;
      switch (r.scale) {
        case ParamScale::linear: v = r.lo + u * (r.hi - r.lo); break;
        case ParamScale::log:
          v = std::exp(std::log(r.lo) + u * (std::log(r.hi) - std::log(r.lo)));
          v = std::clamp(v, r.lo, r.hi);
          break;
        case ParamScale::integer:
          v = std::min(r.hi, std::floor(r.lo + u * (r.hi + 1.0 - r.lo)));
          break;
      }
      out[i].values[r.name] = v;
    }
  }
  return out;
}

WindowSpec standard_validation_spec() {
  WindowSpec s;
  s.mode = WindowMode::validation;
  s.period_start = make_date(2021, 1, 5);
  s.train_days = 731;
  s.gap_days = 0;
  s.slice_days = 30;
  s.n_slices = 12;
  return s;
}

WindowSpec standard_test_spec() {
  WindowSpec s;
  s.mode = WindowMode::test;
  s.period_start = make_date(2022, 1, 1);
  s.train_days = 1095;
  s.gap_days = 1;
  s.slice_days = 1;
  s.n_slices = 545;
  return s;
}

nlohmann::json to_json(const WindowSpec& s) {
  nlohmann::json j = {{"train_days", s.train_days}, {"gap_days", s.gap_days},
                      {"slice_days", s.slice_days}, {"n_slices", s.n_slices},
                      {"cadence_days", s.cadence_days}};
  j["period_start"] = s.period_start ? nlohmann::json(format_date(*s.period_start)) : nlohmann::json();
  return j;
}

WindowSpec window_spec_from_json(const nlohmann::json& j, WindowMode mode) {
  WindowSpec s = mode == WindowMode::validation ? standard_validation_spec() : standard_test_spec();
  if (j.contains("period_start")) {
    const auto& v = j.at("period_start");
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "auto")) s.period_start.reset();
    else s.period_start = parse_date(v.get<std::string>());
  }
  s.train_days = j.value("train_days", s.train_days);
  s.gap_days = j.value("gap_days", s.gap_days);
  s.slice_days = j.value("slice_days", s.slice_days);
  s.n_slices = j.value("n_slices", s.n_slices);
  s.cadence_days = j.value("cadence_days", s.cadence_days);
  return s;
}

WindowPlan plan_windows(Date first, Date last, const WindowSpec& spec) {
  if (spec.train_days < 1 || spec.gap_days < 0 || spec.slice_days < 1 || spec.cadence_days < 1)
    throw ValidationError("window spec needs train_days, slice_days, cadence_days >= 1 and gap_days >= 0");
  if (last < first) throw PlanningError("empty timeline");
  const Date start = spec.period_start.value_or(first + days(spec.train_days + spec.gap_days));
  const Date first_train = start - days(spec.gap_days + spec.train_days);
  if (first_train < first)
    throw PlanningError("insufficient history: first training span starts " +
                        format_date(first_train) + ", " +
                        std::to_string(day_count(first_train, first)) +
                        " days before the timeline begins on " + format_date(first));
  const int available = day_count(start, last) + 1;
  int n = spec.n_slices;
  if (n <= 0) {
    if (available <= 0)
      throw PlanningError("insufficient history: evaluation period starts " + format_date(start) +
                          " after the timeline ends on " + format_date(last));
    n = (available + spec.slice_days - 1) / spec.slice_days;
  }
  const int required = n * spec.slice_days;
  const int history = spec.train_days + spec.gap_days;
  if (available < required) {
    const bool truncatable = spec.mode == WindowMode::validation && spec.slice_days > 1 &&
                             available > (n - 1) * spec.slice_days;
    if (!truncatable)
      throw PlanningError("insufficient history: needs " + std::to_string(history) + " + " +
                          std::to_string(required) + " days, timeline holds " +
                          std::to_string(history + std::max(available, 0)) + " (short by " +
                          std::to_string(required - available) + ")");
    warn("final validation slice truncated to " +
         std::to_string(available - (n - 1) * spec.slice_days) + " days");
  }

  WindowPlan plan;
  plan.mode = spec.mode;
  for (int i = 0; i < n; ++i) {
    WindowSlice s;
    s.eval_start = start + days(i * spec.slice_days);
    s.eval_end = std::min(s.eval_start + days(spec.slice_days - 1), last);
    const Date anchor = start + days((i / spec.cadence_days) * spec.cadence_days * spec.slice_days);
    s.train_end = anchor - days(spec.gap_days + 1);
    s.train_start = s.train_end - days(spec.train_days - 1);
    plan.slices.push_back(s);
  }
  return plan;
}

WindowPlan plan_windows(std::span<const Timestamp> timeline, const WindowSpec& spec) {
  if (timeline.empty()) throw PlanningError("empty timeline");
  return plan_windows(timeline.front().local_date(), timeline.back().local_date(), spec);
}

const std::map<Date, std::vector<std::size_t>>& PreparedData::by_date() const {
  if (by_date_.empty() && features.rows() > 0)
    throw std::logic_error("PreparedData::reindex() not called");
  return by_date_;
}

void PreparedData::reindex() {
  const auto n = static_cast<std::size_t>(features.rows());
  if (features.timestamps.size() != n || static_cast<std::size_t>(target.size()) != n ||
      static_cast<std::size_t>(capacity.size()) != n || static_cast<std::size_t>(asg.size()) != n)
    throw ValidationError("prepared data columns differ in length");
  by_date_.clear();
  for (std::size_t i = 0; i < n; ++i) by_date_[features.timestamps[i].local_date()].push_back(i);
  std::sort(outlier_days.begin(), outlier_days.end());
}

PreparedData prepare_data(const ObservationTable& table, const AssembledData& assembled,
                          std::vector<Date> outlier_days, HourRange hours) {
  if (table.rows() != assembled.features.rows())
    throw ValidationError("prepare_data: table and features differ in length");
  PreparedData d;
  d.features = assembled.features;
  d.target = assembled.target;
  d.capacity = assembled.capacity.ic;
  d.asg = table.asg;
  d.outlier_days = std::move(outlier_days);
  d.hours = hours;
  d.reindex();
  return d;
}

std::vector<std::size_t> training_rows(const PreparedData& data, Date start, Date end) {
  std::vector<std::size_t> out;
  const auto& idx = data.by_date();
  for (auto it = idx.lower_bound(start); it != idx.end() && it->first <= end; ++it) {
    if (std::binary_search(data.outlier_days.begin(), data.outlier_days.end(), it->first)) continue;
    for (std::size_t r : it->second)
      if (data.hours.contains(data.features.timestamps[r].local_hour())) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> forecast_rows(const PreparedData& data, Date day) {
  std::vector<std::size_t> out;
  const auto& idx = data.by_date();
  const auto it = idx.find(day);
  if (it == idx.end()) return out;
  for (std::size_t r : it->second)
    if (data.hours.contains(data.features.timestamps[r].local_hour())) out.push_back(r);
  return out;
}

EnsembleModel fit_model(Method method, const HyperCandidate& params,
                        const Eigen::Ref<const Eigen::MatrixXd>& X,
                        const Eigen::Ref<const Eigen::VectorXd>& y, const FitSettings& settings) {
  const int p = static_cast<int>(X.cols());
  EnsembleModel model;
  switch (method) {
    case Method::LR:
      model = fit_linear(X, y);
      break;
    case Method::RT: {
      CartParams cp;
      cp.alpha = params.get("alpha", cp.alpha);
      cp.max_depth = as_int(params.get("MaxDepth", cp.max_depth));
      cp.min_n = as_int(params.get("min_n", cp.min_n));
      model = fit_single_tree(X, y, cp);
      break;
    }
    case Method::RF: {
      ForestParams fp;
      fp.n_trees = settings.n_trees;
      fp.mtry = std::min(p, as_int(params.get("mtry", fp.mtry)));
      fp.min_n = as_int(params.get("min_n", fp.min_n));
      fp.seed = settings.seed;
      fp.workers = settings.workers;
      model = fit_forest(X, y, fp);
      break;
    }
    case Method::XGBoost: {
      BoostParams bp;
      bp.n_trees = settings.n_trees;
      bp.eta = params.get("eta", bp.eta);
      bp.gamma = params.get("gamma", bp.gamma);
      bp.max_depth = as_int(params.get("MaxDepth", bp.max_depth));
      bp.min_n = as_int(params.get("min_n", bp.min_n));
      bp.mtry = std::min(p, as_int(params.get("mtry", bp.mtry)));
      bp.subsample = params.get("SubSample", bp.subsample);
      bp.seed = settings.seed;
      model = fit_boosted(X, y, bp);
      break;
    }
  }
  model.params = to_json(params)["values"];
  return model;
}

EnsembleModel fit_on_span(Method method, const HyperCandidate& params, const PreparedData& data,
                          Date train_start, Date train_end, const FitSettings& settings) {
  const auto rows = training_rows(data, train_start, train_end);
  if (rows.empty())
    throw ComputationError("no training rows between " + format_date(train_start) + " and " +
                           format_date(train_end));
  EnsembleModel m = fit_model(method, params, gather_rows(data.features.values, rows),
                              gather(data.target, rows), settings);
  m.feature_names = data.features.names();
  return m;
}

std::size_t select_best(std::span<const CandidateScore> scores) {
  std::size_t best = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].failed) continue;
    if (best == scores.size() || scores[i].rmse < scores[best].rmse) best = i;
  }
  if (best == scores.size()) throw ComputationError("every tuning candidate failed");
  return best;
}

TuneResult tune(const ModelConfiguration& config, const PreparedData& data,
                const WindowPlan& plan, std::span<const HyperCandidate> candidates,
                const FitSettings& settings) {
  if (config.method == Method::LR)
    throw ValidationError(config.id() + ": no tunable parameters");
  if (candidates.empty()) throw ValidationError("tune needs at least one candidate");
  if (plan.slices.empty()) throw PlanningError("tune needs at least one validation slice");

  // Evaluation rows of each slice, shared by every candidate.
  std::vector<std::vector<std::size_t>> eval(plan.slices.size());
  for (std::size_t s = 0; s < plan.slices.size(); ++s)
    eval[s] = training_rows(data, plan.slices[s].eval_start, plan.slices[s].eval_end);

  TuneResult res;
  res.scores.resize(candidates.size());
  FitSettings inner = settings;
  inner.workers = 1;
  parallel_for(candidates.size(), settings.workers, [&](std::size_t c) {
    CandidateScore& score = res.scores[c];
    try {
      double se = 0.0;
      std::size_t count = 0;
      for (std::size_t s = 0; s < plan.slices.size(); ++s) {
        if (eval[s].empty()) continue;
        const auto& sl = plan.slices[s];
        const EnsembleModel m =
            fit_on_span(config.method, candidates[c], data, sl.train_start, sl.train_end, inner);
        const Eigen::VectorXd pred = predict(m, gather_rows(data.features.values, eval[s]));
        for (std::size_t i = 0; i < eval[s].size(); ++i) {
          const auto r = static_cast<Eigen::Index>(eval[s][i]);
          const double mw = std::max(pred[static_cast<Eigen::Index>(i)], 0.0) * data.capacity[r];
          const double e = mw - data.asg[r];
          se += e * e;
        }
        count += eval[s].size();
      }
      if (count == 0) throw ComputationError("no validation rows");
      score.rmse = std::sqrt(se / static_cast<double>(count));
      if (!std::isfinite(score.rmse)) throw ComputationError("non-finite validation RMSE");
    } catch (const std::exception& e) {
      score.failed = true;
      score.error = e.what();
    }
  });
  for (std::size_t c = 0; c < res.scores.size(); ++c)
    if (res.scores[c].failed)
      warn(config.id() + ": candidate " + std::to_string(c) + " failed: " + res.scores[c].error);
  res.best_index = select_best(res.scores);
  res.best = candidates[res.best_index];
  return res;
}

BacktestResult backtest(const ModelConfiguration& config, const HyperCandidate& params,
                        const PreparedData& data, const WindowPlan& plan,
                        const FitSettings& settings) {
  // Consecutive slices with the same training span share one fitted model.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t s = 0; s < plan.slices.size(); ++s) {
    const auto& sl = plan.slices[s];
    if (!groups.empty()) {
      const auto& prev = plan.slices[groups.back().first];
      if (prev.train_start == sl.train_start && prev.train_end == sl.train_end) {
        groups.back().second = s + 1;
        continue;
      }
    }
    groups.emplace_back(s, s + 1);
  }

  const std::size_t n_hours = static_cast<std::size_t>(data.hours.count());
  std::vector<std::vector<BacktestDay>> made(groups.size());
  std::vector<std::vector<std::pair<Date, std::string>>> dropped(groups.size());
  const int outer = settings.workers;
  FitSettings inner = settings;
  if (groups.size() > 1) inner.workers = 1;

  parallel_for(groups.size(), groups.size() > 1 ? outer : 1, [&](std::size_t g) {
    const auto& head = plan.slices[groups[g].first];
    std::optional<EnsembleModel> model;
    for (std::size_t s = groups[g].first; s < groups[g].second; ++s) {
      const auto& sl = plan.slices[s];
      for (Date day = sl.eval_start; day <= sl.eval_end; day += days(1)) {
        const auto cand = forecast_rows(data, day);
        // First row per modeled wall-clock hour.
        std::vector<std::size_t> rows;
        std::vector<int> hours;
        for (std::size_t r : cand) {
          const int h = data.features.timestamps[r].local_hour();
          if (std::find(hours.begin(), hours.end(), h) != hours.end()) continue;
          hours.push_back(h);
          rows.push_back(r);
        }
        if (rows.size() != n_hours) {
          dropped[g].emplace_back(day, "missing " + std::to_string(n_hours - rows.size()) +
                                           " modeled hours");
          continue;
        }
        if (!model) {
          if (training_rows(data, head.train_start, head.train_end).empty()) {
            dropped[g].emplace_back(day, "no training rows");
            continue;
          }
          model = fit_on_span(config.method, params, data, head.train_start, head.train_end, inner);
        }
        const Eigen::VectorXd pred = predict(*model, gather_rows(data.features.values, rows));
        std::vector<double> mw(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
          mw[i] = std::max(pred[static_cast<Eigen::Index>(i)], 0.0) *
                  data.capacity[static_cast<Eigen::Index>(rows[i])];
        BacktestDay out;
        out.date = day;
        out.forecast = expand_to_24h(hours, mw);
        std::array<bool, 24> seen{};
        for (std::size_t r : data.by_date().at(day)) {
          const auto h = static_cast<std::size_t>(data.features.timestamps[r].local_hour());
          if (seen[h]) continue;
          seen[h] = true;
          out.actual[h] = data.asg[static_cast<Eigen::Index>(r)];
        }
        made[g].push_back(out);
      }
    }
  });

  BacktestResult result;
  result.config_id = config.id();
  result.params = config.method == Method::LR ? nlohmann::json::object() : to_json(params)["values"];
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto& d : made[g]) result.days.push_back(d);
    for (auto& [day, why] : dropped[g]) {
      warn(config.id() + ": skipped " + format_date(day) + " (" + why + ")");
      result.skipped.push_back(day);
    }
  }
  std::sort(result.days.begin(), result.days.end(),
            [](const BacktestDay& a, const BacktestDay& b) { return a.date < b.date; });
  std::sort(result.skipped.begin(), result.skipped.end());
  return result;
}

}  // namespace solarcast

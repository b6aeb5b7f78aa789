#include "solarcast/metrics.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "solarcast/error.hpp"
#include "solarcast/parallel.hpp"

namespace solarcast {

AggregateMetrics aggregate_metrics(std::span<const double> actual,
                                   std::span<const double> forecast) {
  if (actual.size() != forecast.size())
    throw ValidationError("metrics: actual and forecast differ in length");
  if (actual.empty()) throw ValidationError("metrics: empty series");
  double se = 0.0, ae = 0.0, denom = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = forecast[i] - actual[i];
    se += e * e;
    ae += std::abs(e);
    denom += forecast[i] + actual[i];
  }
  const double n = static_cast<double>(actual.size());
  AggregateMetrics m;
  m.rmse = std::sqrt(se / n);
  m.mae = ae / n;
  if (denom == 0.0) {
    m.smape = 0.0;
    m.smape_undefined = true;
  } else {
    m.smape = 2.0 * ae / denom;
  }
  return m;
}

AggregateMetrics aggregate_metrics(const BacktestResult& result) {
  return aggregate_metrics(result.actual_series(), result.forecast_series());
}

std::vector<DailyMetrics> daily_metrics(const BacktestResult& result) {
  std::vector<DailyMetrics> out;
  out.reserve(result.days.size());
  for (const auto& d : result.days) {
    const auto m = aggregate_metrics(d.actual, d.forecast);
    out.push_back({d.date, m.rmse, m.mae, m.smape});
  }
  return out;
}

std::vector<DailyMetrics> cumulative_metrics(std::span<const DailyMetrics> daily) {
  std::vector<DailyMetrics> out;
  out.reserve(daily.size());
  DailyMetrics acc;
  for (const auto& d : daily) {
    acc.date = d.date;
    acc.rmse += d.rmse;
    acc.mae += d.mae;
    acc.smape += d.smape;
    out.push_back(acc);
  }
  return out;
}

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::squared: return "squared";
    case LossKind::absolute: return "absolute";
    case LossKind::smape: return "smape";
  }
  return "?";
}

const Eigen::VectorXd& LossSeries::get(LossKind kind) const {
  switch (kind) {
    case LossKind::squared: return squared;
    case LossKind::absolute: return absolute;
    case LossKind::smape: return smape;
  }
  return squared;
}

LossSeries loss_series(std::span<const double> actual, std::span<const double> forecast) {
  if (actual.size() != forecast.size())
    throw ValidationError("loss_series: actual and forecast differ in length");
  const auto n = static_cast<Eigen::Index>(actual.size());
  LossSeries s;
  s.squared.resize(n);
  s.absolute.resize(n);
  s.smape.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = actual[static_cast<std::size_t>(i)];
    const double f = forecast[static_cast<std::size_t>(i)];
    const double e = std::abs(f - a);
    s.squared[i] = e * e;
    s.absolute[i] = e;
    const double denom = f + a;
    s.smape[i] = denom == 0.0 ? 0.0 : 2.0 * e / denom;
  }
  return s;
}

McsResult model_confidence_set(const Eigen::Ref<const Eigen::MatrixXd>& losses,
                               const McsOptions& options) {
  const Eigen::Index n = losses.rows();
  const Eigen::Index m = losses.cols();
  if (m < 2) throw ValidationError("MCS needs at least two models");
  if (n < 2) throw ValidationError("MCS needs at least two observations");
  if (options.bootstrap < 1) throw ValidationError("MCS bootstrap count must be positive");
  if (options.block_length < 1 || options.block_length > n)
    throw ValidationError("MCS block length must lie in [1, n]");
  if (!losses.allFinite()) throw ValidationError("MCS losses must be finite");

  const int B = options.bootstrap;
  const Eigen::Index l = options.block_length;
  const Eigen::RowVectorXd mean = losses.colwise().mean();

  // Circular moving-block bootstrap of the per-model mean losses.
  Eigen::MatrixXd boot(B, m);
  {
    std::mt19937_64 rng(derive_seed(options.seed, 0));
    std::uniform_int_distribution<Eigen::Index> start(0, n - 1);
    Eigen::RowVectorXd acc(m);
    for (int b = 0; b < B; ++b) {
      acc.setZero();
      Eigen::Index taken = 0;
      while (taken < n) {
        const Eigen::Index s = start(rng);
        for (Eigen::Index j = 0; j < l && taken < n; ++j, ++taken)
          acc += losses.row((s + j) % n);
      }
      boot.row(b) = acc / static_cast<double>(n);
    }
  }

  McsResult res;
  res.pvalues.assign(static_cast<std::size_t>(m), 1.0);
  std::vector<int> alive(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) alive[static_cast<std::size_t>(i)] = i;
  const double inf = std::numeric_limits<double>::infinity();
  double running = 0.0;

  while (alive.size() > 1) {
    const auto k = alive.size();
    // Pairwise t-ratios on the surviving set.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    Eigen::MatrixXd sd = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    Eigen::MatrixXd dbar = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    double T = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t c = 0; c < k; ++c) {
        if (a == c) continue;
        const int i = alive[a], j = alive[c];
        const double d = mean[i] - mean[j];
        const double var =
            ((boot.col(i) - boot.col(j)).array() - d).square().sum() / static_cast<double>(B);
        const auto ea = static_cast<Eigen::Index>(a), ec = static_cast<Eigen::Index>(c);
        dbar(ea, ec) = d;
        sd(ea, ec) = std::sqrt(var);
        double tij = 0.0;
        if (var > 0.0) tij = d / std::sqrt(var);
        else if (d != 0.0) tij = d > 0 ? inf : -inf;
        t(ea, ec) = tij;
        T = std::max(T, std::abs(tij));
      }
    }

    int exceed = 0;
    for (int b = 0; b < B; ++b) {
      double Tb = 0.0;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t c = a + 1; c < k; ++c) {
          const auto ea = static_cast<Eigen::Index>(a), ec = static_cast<Eigen::Index>(c);
          if (!(sd(ea, ec) > 0.0)) continue;
          const double db = boot(b, alive[a]) - boot(b, alive[c]);
          Tb = std::max(Tb, std::abs(db - dbar(ea, ec)) / sd(ea, ec));
        }
      }
      if (Tb >= T) ++exceed;
    }
    const double p = static_cast<double>(exceed) / B;

    // Eliminate the model with the largest standardised loss against any rival.
    std::size_t worst = 0;
    double worst_t = -inf;
    for (std::size_t a = 0; a < k; ++a) {
      double row_max = -inf;
      for (std::size_t c = 0; c < k; ++c)
        if (a != c) row_max = std::max(row_max, t(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)));
      if (row_max > worst_t) {
        worst_t = row_max;
        worst = a;
      }
    }
    running = std::max(running, p);
    res.pvalues[static_cast<std::size_t>(alive[worst])] = running;
    res.elimination.push_back(alive[worst]);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  res.elimination.push_back(alive.front());
  res.pvalues[static_cast<std::size_t>(alive.front())] = 1.0;

  res.in_99.resize(static_cast<std::size_t>(m));
  res.in_90.resize(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    res.in_99[i] = res.pvalues[i] >= 0.01;
    res.in_90[i] = res.pvalues[i] >= 0.10;
  }
  return res;
}

}  // namespace solarcast

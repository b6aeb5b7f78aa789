#include "tree_grower.hpp"

#include <algorithm>
#include <numeric>

namespace solarcast::detail {

SortedColumns::SortedColumns(const Eigen::Ref<const Eigen::MatrixXd>& X) {
  const int n = static_cast<int>(X.rows());
  order.resize(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& o = order[static_cast<std::size_t>(f)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), 0);
    const double* col = X.col(f).data();
    std::stable_sort(o.begin(), o.end(), [col](int a, int b) { return col[a] < col[b]; });
  }
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  int left_size = 0;  // positions, not counts
};

class Grower {
 public:
  Grower(const Eigen::Ref<const Eigen::MatrixXd>& X, const SortedColumns& sorted,
         const GrowerRows& rows, const GrowerParams& params, double offset, std::mt19937_64* rng)
      : X_(X), rows_(rows), params_(params), offset_(offset), rng_(rng) {
    const auto p = static_cast<std::size_t>(X.cols());
    order_.resize(p);
    for (std::size_t f = 0; f < p; ++f) {
      auto& o = order_[f];
      o.reserve(sorted.order[f].size());
      for (int r : sorted.order[f])
        if (rows.count[static_cast<std::size_t>(r)] > 0) o.push_back(r);
    }
    active_ = p == 0 ? 0 : static_cast<int>(order_[0].size());
    tmp_.resize(static_cast<std::size_t>(active_));
    left_.assign(static_cast<std::size_t>(X.rows()), 0);
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), 0);
  }

  TreeModel run() {
    TreeModel model;
    model.n_features = static_cast<int>(X_.cols());
    if (active_ == 0) {
      TreeNode leaf;
      leaf.value = offset_;
      model.nodes.push_back(leaf);
      return model;
    }
    nodes_.clear();
    build(0, active_, 0);
    model.nodes = std::move(nodes_);
    return model;
  }

 private:
  int build(int begin, int end, int depth) {
    const auto& any = order_[0];
    double G = 0.0, H = 0.0, S2 = 0.0;
    int C = 0;
    for (int i = begin; i < end; ++i) {
      const auto r = static_cast<std::size_t>(any[static_cast<std::size_t>(i)]);
      G += rows_.grad[r];
      H += rows_.hess[r];
      C += rows_.count[r];
      if (!rows_.sq.empty()) S2 += rows_.sq[r];
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    {
      TreeNode& node = nodes_.back();
      node.value = -G / (H + params_.lambda) + offset_;
      node.cover = H;
      node.count = C;
      node.sse = rows_.sq.empty() ? 0.0 : std::max(0.0, S2 - G * G / H);
    }

    if (depth >= params_.max_depth || C < 2 * params_.min_n) return id;
    const Split best = find_split(begin, end, G, H, C);
    if (best.feature < 0) return id;

    partition(begin, end, best);
    const int mid = begin + best.left_size;
    const int l = build(begin, mid, depth + 1);
    const int r = build(mid, end, depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split find_split(int begin, int end, double G, double H, int C) {
    const int p = static_cast<int>(features_.size());
    int m = p;
    if (params_.mtry > 0 && params_.mtry < p && rng_) {
      m = params_.mtry;
      for (int i = 0; i < m; ++i) {
        std::uniform_int_distribution<int> pick(i, p - 1);
        std::swap(features_[static_cast<std::size_t>(i)],
                  features_[static_cast<std::size_t>(pick(*rng_))]);
      }
      std::sort(features_.begin(), features_.begin() + m);
    } else {
      std::sort(features_.begin(), features_.end());
    }

    const double lambda = params_.lambda;
    const double parent = G * G / (H + lambda);
    Split best;
    double best_crit = 0.0;
    bool found = false;
    for (int fi = 0; fi < m; ++fi) {
      const int f = features_[static_cast<std::size_t>(fi)];
      const auto& ord = order_[static_cast<std::size_t>(f)];
      const double* col = X_.col(f).data();
      double GL = 0.0, HL = 0.0;
      int CL = 0;
      for (int i = begin; i < end - 1; ++i) {
        const auto r = static_cast<std::size_t>(ord[static_cast<std::size_t>(i)]);
        GL += rows_.grad[r];
        HL += rows_.hess[r];
        CL += rows_.count[r];
        if (C - CL < params_.min_n) break;
        if (CL < params_.min_n) continue;
        const double x = col[r];
        const double xn = col[ord[static_cast<std::size_t>(i) + 1]];
        if (!(x < xn)) continue;
        const double GR = G - GL;
        const double HR = H - HL;
        const double children = GL * GL / (HL + lambda) + GR * GR / (HR + lambda);
        const double crit = children - parent;
        // Gains equal up to rounding count as ties and keep the earlier candidate.
        if (!found || crit > best_crit + 1e-11 * children) {
          found = true;
          best_crit = crit;
          double thr = x + (xn - x) / 2.0;
          if (!(thr > x)) thr = xn;
          best.feature = f;
          best.threshold = thr;
          best.left_size = i + 1 - begin;
        }
      }
    }
    if (!found) return {};
    const double gain =
        params_.boosting_gain ? 0.5 * best_crit - params_.gamma : best_crit;
    if (!(gain > params_.gain_floor) || !(best_crit > params_.gain_floor)) return {};
    best.gain = gain;
    return best;
  }

  void partition(int begin, int end, const Split& split) {
    const auto& key = order_[static_cast<std::size_t>(split.feature)];
    for (int i = begin; i < end; ++i)
      left_[static_cast<std::size_t>(key[static_cast<std::size_t>(i)])] =
          i < begin + split.left_size ? 1 : 0;
    for (auto& ord : order_) {
      int l = begin;
      int t = 0;
      for (int i = begin; i < end; ++i) {
        const int r = ord[static_cast<std::size_t>(i)];
        if (left_[static_cast<std::size_t>(r)])
          ord[static_cast<std::size_t>(l++)] = r;
        else
          tmp_[static_cast<std::size_t>(t++)] = r;
      }
      std::copy(tmp_.begin(), tmp_.begin() + t, ord.begin() + l);
    }
  }

  const Eigen::Ref<const Eigen::MatrixXd>& X_;
  const GrowerRows& rows_;
  const GrowerParams& params_;
  double offset_;
  std::mt19937_64* rng_;
  std::vector<std::vector<int>> order_;
  std::vector<int> tmp_;
  std::vector<char> left_;
  std::vector<int> features_;
  std::vector<TreeNode> nodes_;
  int active_ = 0;
};

}  // namespace

TreeModel grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& X, const SortedColumns& sorted,
                    const GrowerRows& rows, const GrowerParams& params, double value_offset,
                    std::mt19937_64* rng) {
  Grower g(X, sorted, rows, params, value_offset, rng);
  return g.run();
}

}  // namespace solarcast::detail

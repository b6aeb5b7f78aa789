#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "solarcast/cart.hpp"

namespace solarcast::detail {

/// Per-feature row orders, sorted ascending by value (ties by row index).
struct SortedColumns {
  std::vector<std::vector<int>> order;

  explicit SortedColumns(const Eigen::Ref<const Eigen::MatrixXd>& X);
};

struct GrowerParams {
  int max_depth = 30;
  int min_n = 1;
  int mtry = 0;             // features sampled per split; 0 = all
  double lambda = 0.0;      // L2 on leaf values
  double gamma = 0.0;       // minimum (half) gain; boosting only
  bool boosting_gain = false;  // gain = 0.5 * criterion - gamma
  double gain_floor = 0.0;  // gains at or below this are treated as zero
};

/// Second-order statistics per row. Rows with `count == 0` are inactive.
struct GrowerRows {
  std::vector<double> grad;
  std::vector<double> hess;
  std::vector<int> count;
  std::vector<double> sq;  // w * y^2 for SSE bookkeeping (CART); may be empty
};

/// Grows one tree. Leaf values are -G / (H + lambda) plus `value_offset`.
TreeModel grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& X, const SortedColumns& sorted,
                    const GrowerRows& rows, const GrowerParams& params, double value_offset,
                    std::mt19937_64* rng);

}  // namespace solarcast::detail

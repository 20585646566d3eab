#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wbt {

/// Dense cost matrix stored row-major.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square matrix (Hungarian method with
/// potentials, O(n^3)).
Assignment solve_assignment(const CostMatrix& cost);

struct TransportFlow {
  std::size_t source;
  std::size_t sink;
  double amount;
};

struct TransportPlan {
  std::vector<TransportFlow> flows;
  double total_cost = 0.0;
};

/// Minimum-cost transportation between supplies and demands of equal total
/// mass (relative mismatch up to 1e-9 is absorbed). Costs must be nonnegative.
/// Successive shortest paths with Dijkstra on reduced costs.
TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                              const CostMatrix& cost);

}  // namespace wbt

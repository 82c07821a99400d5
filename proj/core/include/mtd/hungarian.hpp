#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace mtd {

/// Dense row-major cost matrix.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  ///< (row, col), sorted by row
  double total_cost = 0.0;                                 ///< includes unmatched penalties
};

/// Minimum-cost one-to-one partial matching. Leaving any row or column
/// unmatched costs `unmatched_penalty`. Solved exactly as a square assignment
/// problem of size rows + cols with the O(n^3) shortest augmenting path method.
/// Throws on non-finite costs.
Assignment hungarian_match(const CostMatrix& cost, double unmatched_penalty);

}  // namespace mtd

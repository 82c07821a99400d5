#include "mtd/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mtd/error.hpp"

namespace mtd {

namespace {

// Square assignment with potentials (Kuhn-Munkres, shortest augmenting path).
// Returns col_of_row.
std::vector<std::size_t> solve_square(const std::vector<double>& a, std::size_t n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> col_of_row(n, 0);
  for (std::size_t j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

}  // namespace

Assignment hungarian_match(const CostMatrix& cost, double unmatched_penalty) {
  if (cost.values.size() != cost.rows * cost.cols) throw Error("hungarian_match: cost matrix storage does not match its extents");
  if (!std::isfinite(unmatched_penalty)) throw Error("hungarian_match: unmatched penalty must be finite");
  for (std::size_t i = 0; i < cost.values.size(); ++i) {
    if (!std::isfinite(cost.values[i]))
      throw Error("hungarian_match: non-finite cost at (" + std::to_string(i / std::max<std::size_t>(cost.cols, 1)) +
                  ", " + std::to_string(i % std::max<std::size_t>(cost.cols, 1)) + ")");
  }
  const std::size_t n = cost.rows, m = cost.cols, size = n + m;
  Assignment out;
  if (size == 0) return out;

  // [ C        | P (rows unmatched) ]
  // [ P (cols) | 0                  ]
  std::vector<double> sq(size * size, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      double c;
      if (i < n && j < m) c = cost(i, j);
      else if (i < n || j < m) c = unmatched_penalty;
      else c = 0.0;
      sq[i * size + j] = c;
    }
  }
  const auto col_of_row = solve_square(sq, size);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = col_of_row[i];
    // A pair costing exactly two penalties is a tie; report it unmatched.
    if (j < m && cost(i, j) < 2.0 * unmatched_penalty) {
      out.pairs.emplace_back(i, j);
      out.total_cost += cost(i, j);
    }
  }
  const auto k = out.pairs.size();
  out.total_cost += static_cast<double>((n - k) + (m - k)) * unmatched_penalty;
  return out;
}

}  // namespace mtd

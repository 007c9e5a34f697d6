#pragma once

#include <limits>
#include <vector>

#include "refine/core/errors.hpp"

namespace refine {

// Exact minimum-cost perfect matching on a dense n x n cost matrix
// (row-major), via the Hungarian algorithm with dual potentials and
// shortest augmenting paths. O(n^3).
inline double solve_assignment(const std::vector<double>& cost, int n,
                               std::vector<int>* row_to_col = nullptr) {
  if (n <= 0) throw ArgumentError("assignment needs n >= 1");
  if (static_cast<int>(cost.size()) != n * n) throw ArgumentError("cost matrix must be n*n");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  if (row_to_col) row_to_col->assign(n, -1);
  for (int j = 1; j <= n; ++j) {
    total += cost[static_cast<std::size_t>(p[j] - 1) * n + (j - 1)];
    if (row_to_col) (*row_to_col)[p[j] - 1] = j - 1;
  }
  return total;
}

}  // namespace refine

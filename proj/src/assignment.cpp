#include "roadframe/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace roadframe {

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) throw std::invalid_argument("solve_assignment needs rows <= cols");
  if (!cost.allFinite()) throw std::invalid_argument("solve_assignment needs finite costs");
  if (n == 0) return {};

  // 1-based potentials; p[j] is the row matched to column j.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
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
    } while (j0 != 0);
  }

  std::vector<int> out(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = j - 1;
  }
  return out;
}

std::vector<int> gnn_assign(const Eigen::MatrixXd& cost, const std::vector<double>& unassigned_cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (static_cast<int>(unassigned_cost.size()) != n) throw std::invalid_argument("gnn_assign: one unassigned cost per row");
  if (n == 0) return {};

  // Columns m..m+n-1 are per-row dummies. Forbidden pairs get a cost no
  // optimal solution can use.
  double big = 1.0;
  for (double c : unassigned_cost) big += std::abs(c);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (std::isfinite(cost(i, j))) big += std::abs(cost(i, j));
  big *= 10.0;

  Eigen::MatrixXd full = Eigen::MatrixXd::Constant(n, m + n, big);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (std::isfinite(cost(i, j))) full(i, j) = cost(i, j);
    }
    full(i, m + i) = unassigned_cost[i];
  }
  std::vector<int> cols = solve_assignment(full);
  for (int i = 0; i < n; ++i) {
    if (cols[i] >= m || !std::isfinite(cost(i, cols[i]))) cols[i] = -1;
  }
  return cols;
}

}  // namespace roadframe

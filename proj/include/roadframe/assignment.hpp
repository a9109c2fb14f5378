#pragma once

#include <Eigen/Core>

#include <vector>

namespace roadframe {

/// Minimum-cost assignment of rows to distinct columns for rows <= cols
/// (Hungarian method with potentials). Returns the column of each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Global nearest neighbour: row i may stay unassigned at `unassigned_cost[i]`,
/// columns may stay unassigned at no cost. Entries that are +inf are
/// forbidden. Returns the column of each row or -1.
std::vector<int> gnn_assign(const Eigen::MatrixXd& cost, const std::vector<double>& unassigned_cost);

}  // namespace roadframe

#pragma once

#include "citadel/types.hpp"

#include <vector>

namespace citadel {

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Returns the chosen column per row. Hungarian method with potentials, O(r^2 c).
std::vector<Index> solve_assignment(const MatrixXd& cost);

}  // namespace citadel

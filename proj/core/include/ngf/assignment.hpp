#pragma once

#include <cstdint>
#include <vector>

namespace ngf {

/// Exact minimum-cost assignment on a dense square cost matrix (row-major,
/// n x n) via the Jonker-Volgenant shortest augmenting path scheme.
/// Returns the assigned column per row.
std::vector<std::int64_t> solve_assignment(const std::vector<double>& cost, std::int64_t n);

}  // namespace ngf

#include "ngf/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace ngf {

std::vector<std::int64_t> solve_assignment(const std::vector<double>& cost, std::int64_t n) {
  if (n <= 0) throw std::invalid_argument("solve_assignment: empty problem");
  if (static_cast<std::int64_t>(cost.size()) != n * n)
    throw std::invalid_argument("solve_assignment: cost matrix is not n x n");

  const double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] = row matched to column j (0 = unmatched).
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<std::int64_t> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<std::int64_t> way(static_cast<std::size_t>(n) + 1, 0);

  for (std::int64_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::int64_t j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const std::int64_t i0 = p[static_cast<std::size_t>(j0)];
      std::int64_t j1 = 0;
      double delta = kInf;
      for (std::int64_t j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>((i0 - 1) * n + (j - 1))] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (std::int64_t j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const std::int64_t j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::int64_t> row_to_col(static_cast<std::size_t>(n), -1);
  for (std::int64_t j = 1; j <= n; ++j)
    row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

}  // namespace ngf

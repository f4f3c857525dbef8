#include "cgl/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cgl {
namespace {

double tie_tolerance(double optimum) { return 1e-10 * (1.0 + std::abs(optimum)); }

void require_finite(const CostMatrix& c) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (!std::isfinite(c(i, j))) {
        throw AssignmentError("cost matrix entry (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") is not finite");
      }
    }
  }
}

// Shortest-augmenting-path Hungarian method with row/column potentials, O(n^3).
// `rows` and `cols` select the submatrix to solve; returns the optimal cost
// and writes the chosen column (an index into `cols`) for each row.
double solve_min_cost(const CostMatrix& c, const std::vector<std::size_t>& rows,
                      const std::vector<std::size_t>& cols, std::vector<std::size_t>* match) {
  const std::size_t n = rows.size();
  if (n == 0) return 0.0;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(rows[i0 - 1], cols[j - 1]) - u[i0] - v[j];
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
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> local(n);
  for (std::size_t j = 1; j <= n; ++j) local[row_of_col[j] - 1] = j - 1;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += c(rows[i], cols[local[i]]);
  if (match) *match = std::move(local);
  return total;
}

}  // namespace

CostMatrix::CostMatrix(std::size_t n, std::vector<double> costs) : n_(n), costs_(std::move(costs)) {
  if (costs_.size() != n_ * n_) {
    throw AssignmentError("cost matrix needs " + std::to_string(n_ * n_) + " entries, got " +
                          std::to_string(costs_.size()));
  }
}

CostMatrix::CostMatrix(std::initializer_list<std::initializer_list<double>> rows) : n_(rows.size()) {
  for (const auto& row : rows) {
    if (row.size() != n_) throw AssignmentError("cost matrix must be square");
    costs_.insert(costs_.end(), row.begin(), row.end());
  }
}

double assignment_cost(const CostMatrix& costs, const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += costs(i, perm[i]);
  return total;
}

Assignment hungarian(const CostMatrix& costs) {
  require_finite(costs);
  const std::size_t n = costs.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double optimum = solve_min_cost(costs, all, all, nullptr);
  const double tol = tie_tolerance(optimum);

  // Fix rows one at a time to the smallest column that still admits an
  // optimal completion.
  Assignment out;
  out.perm.assign(n, 0);
  std::vector<std::size_t> free_cols = all;
  double prefix = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t i = r + 1; i < n; ++i) rest_rows.push_back(i);
    bool fixed = false;
    for (std::size_t idx = 0; idx < free_cols.size() && !fixed; ++idx) {
      const std::size_t col = free_cols[idx];
      std::vector<std::size_t> rest_cols;
      for (std::size_t other : free_cols) {
        if (other != col) rest_cols.push_back(other);
      }
      const double completion = solve_min_cost(costs, rest_rows, rest_cols, nullptr);
      if (prefix + costs(r, col) + completion <= optimum + tol) {
        out.perm[r] = col;
        prefix += costs(r, col);
        free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(idx));
        fixed = true;
      }
    }
    if (!fixed) {
      // Only reachable through catastrophic rounding; fall back to the plain solution.
      std::vector<std::size_t> match;
      solve_min_cost(costs, all, all, &match);
      out.perm = match;
      break;
    }
  }
  out.total_cost = assignment_cost(costs, out.perm);
  return out;
}

Assignment brute_force_assignment(const CostMatrix& costs) {
  require_finite(costs);
  const std::size_t n = costs.size();
  if (n > 9) throw AssignmentError("brute_force_assignment supports n <= 9, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, assignment_cost(costs, perm));
  } while (std::next_permutation(perm.begin(), perm.end()));

  const double tol = tie_tolerance(best);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  do {
    const double cost = assignment_cost(costs, perm);
    if (cost <= best + tol) return Assignment{perm, cost};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return Assignment{perm, best};  // unreachable: the minimum is always revisited
}

}  // namespace cgl

#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace cgl {

/// Square matrix of finite assignment costs; row i is matched to column perm[i].
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t n, std::vector<double> costs);
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t row, std::size_t col) const { return costs_[row * n_ + col]; }
  double& operator()(std::size_t row, std::size_t col) { return costs_[row * n_ + col]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> costs_;
};

struct Assignment {
  std::vector<std::size_t> perm;
  double total_cost = 0.0;
};

class AssignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sum of costs(i, perm[i]) accumulated in row order.
double assignment_cost(const CostMatrix& costs, const std::vector<std::size_t>& perm);

/// Exact minimum-cost perfect matching (Hungarian method). Among optimal
/// matchings, returns the lexicographically smallest permutation; costs within
/// 1e-10 * (1 + |optimum|) of the optimum count as ties.
Assignment hungarian(const CostMatrix& costs);

/// Exhaustive search with the same optimum and tie-break rule; n <= 9.
Assignment brute_force_assignment(const CostMatrix& costs);

}  // namespace cgl

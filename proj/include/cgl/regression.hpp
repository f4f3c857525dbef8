#pragma once

#include <cstddef>
#include <vector>

#include "cgl/tensor.hpp"

namespace cgl {

inline constexpr double kRidgeDefault = 1e-3;
inline constexpr double kBandwidthFloor = 1e-6;

/// RBF kernel ridge regressor k(x, y) = exp(-|x - y|^2 / (2 bandwidth^2)).
/// Targets are centered on their training mean; the dual coefficients solve
/// (G + ridge I) alpha = Y - mean.
struct KernelRidgeModel {
  Tensor support;             // [n, d]
  Tensor dual;                // [n, m]
  std::vector<double> offset; // per-target training mean
  double bandwidth = 1.0;
  double ridge = kRidgeDefault;
};

/// Median of the pairwise distances between distinct rows, floored at 1e-6.
double median_bandwidth(const Tensor& x);

/// X [n, d], Y [n, m]; n >= 2. bandwidth <= 0 selects the median heuristic.
KernelRidgeModel kernel_ridge_fit(const Tensor& x, const Tensor& y, double ridge = kRidgeDefault,
                                  double bandwidth = 0.0);
Tensor kernel_ridge_predict(const KernelRidgeModel& model, const Tensor& x);

/// Average over target columns of 1 - SSE / SST. A column with zero variance
/// scores 1 if predicted exactly and -infinity otherwise.
double r2_score(const Tensor& y_true, const Tensor& y_pred);

struct IdentifiabilityResult {
  double score = 0.0;               // mean matched held-out R^2
  std::vector<std::size_t> perm;    // ground-truth slot i <- inferred slot perm[i]
  Tensor r2;                        // [K, K], r2(i, j) predicts gt slot i from inferred slot j
};

struct IdentifiabilityOptions {
  std::size_t max_rows = 2000;
  double train_fraction = 0.8;
  double ridge = kRidgeDefault;
};

/// For every pair (gt slot i, inferred slot j), fits kernel ridge from inferred
/// slot j to gt slot i on the first 80% of the rows and scores R^2 on the rest.
/// Inferred features are z-scored with training-split statistics. Slots are
/// paired by maximum total R^2.
IdentifiabilityResult slot_identifiability(const Tensor& inferred, std::size_t inferred_dim, const Tensor& truth,
                                           std::size_t truth_dim, std::size_t slots,
                                           const IdentifiabilityOptions& options = {});

}  // namespace cgl

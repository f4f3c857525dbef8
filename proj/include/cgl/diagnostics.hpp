#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgl/numdiff.hpp"
#include "cgl/slot_model.hpp"
#include "cgl/tensor.hpp"

namespace cgl {

/// How a flat input vector splits into slots: K slots of `slot_dim` coordinates.
struct SlotLayout {
  std::size_t slots = 0;
  std::size_t slot_dim = 0;
  std::size_t inputs() const noexcept { return slots * slot_dim; }
};

inline constexpr double kContrastStep = 1e-4;
inline constexpr double kInfluenceThreshold = 1e-8;
inline constexpr double kHessianStep = 1e-3;
inline constexpr double kRankTolerance = 1e-8;

/// Sum over outputs n and slot pairs k < j of |d f_n / d z_k| * |d f_n / d z_j|,
/// where each factor is the L2 norm over that slot's Jacobian columns.
double contrast_from_jacobian(const Tensor& jacobian, SlotLayout layout);

/// contrast_from_jacobian on the central-difference Jacobian. Throws
/// NonFiniteError if any Jacobian entry is not finite.
double comp_contrast(const VectorFn& f, std::span<const double> z, SlotLayout layout, double h = kContrastStep);

/// Pixels whose slot-k gradient norm exceeds tau, for every slot k.
struct InfluenceSets {
  std::vector<std::vector<std::size_t>> sets;
  bool disjoint() const;
};

InfluenceSets influence_sets(const Tensor& jacobian, SlotLayout layout, double tau = kInfluenceThreshold);

struct CompositionalityResult {
  bool compositional = false;
  InfluenceSets influence;
};

CompositionalityResult compositionality_check(const VectorFn& f, std::span<const double> z, SlotLayout layout,
                                              double tau = kInfluenceThreshold, double h = kContrastStep);

/// Number of singular values above rel_tol * sigma_max. Zero for an all-zero or empty matrix.
std::size_t numerical_rank(const Tensor& matrix, double rel_tol = kRankTolerance);

struct IrreducibilityOptions {
  std::size_t random_partitions = 64;  // per slot, on top of all singleton splits
  bool exhaustive_small = false;       // enumerate every bipartition when |I_k| <= exhaustive_limit
  std::size_t exhaustive_limit = 12;
  double tau = kInfluenceThreshold;
  double h = kContrastStep;
  std::uint64_t seed = 0;
};

struct IrreducibilityResult {
  bool irreducible = true;
  std::size_t partitions_checked = 0;
  std::vector<std::string> warnings;
  /// First violated split, if any: slot and the pixels on one side.
  std::size_t failing_slot = 0;
  std::vector<std::size_t> failing_subset;
};

/// For every slot k with influence set I_k, tests rank(J[S1]) + rank(J[S2]) > rank(J[I_k])
/// on bipartitions S1 | S2 of I_k, where J[S] are the Jacobian rows in S over all inputs.
IrreducibilityResult irreducibility_from_jacobian(const Tensor& jacobian, SlotLayout layout,
                                                  const IrreducibilityOptions& options = {});
IrreducibilityResult irreducibility_check(const VectorFn& f, std::span<const double> z, SlotLayout layout,
                                          const IrreducibilityOptions& options = {});

/// Max |d^2 f_n / dz_p dz_q| over outputs n and input pairs (p, q) in different
/// slots, from four-point central second differences.
double hessian_cross_check(const VectorFn& f, std::span<const double> z, SlotLayout layout, double h = kHessianStep);

/// The decoder reconstruction as a function of one flat code vector.
VectorFn decoder_function(const SlotModel& model);

/// Central-difference Jacobians of the decoder at every row of `codes`
/// [B, K * slot_dim], computed with one batched decode. Result i has shape [N, K * slot_dim].
std::vector<Tensor> decoder_jacobians(const SlotModel& model, const Tensor& codes, double h = kContrastStep);

/// Mean compositional contrast of the decoder over the rows of `codes`.
double decoder_contrast(const SlotModel& model, const Tensor& codes, double h = kContrastStep);

}  // namespace cgl

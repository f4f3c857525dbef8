#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgl/autoencoder.hpp"
#include "cgl/random.hpp"
#include "cgl/tape.hpp"

namespace cgl {

/// Which parameters the consistency loss trains.
enum class ConsistencyGrad : std::uint8_t {
  /// Recombined codes and their renders are constants; only the re-encoding path trains.
  kEncoderOnly,
  /// Gradients also flow through the recombined codes and the decoder.
  kFull,
};

const char* consistency_grad_name(ConsistencyGrad g);
ConsistencyGrad parse_consistency_grad(const std::string& name);

inline constexpr double kConsistencyStdFloor = 1e-6;

/// Source rows (a, b) and one selector per slot: rho[k] == 1 takes slot k from
/// row a, rho[k] == 2 from row b.
struct RecombinationPlan {
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<std::uint8_t> rho;
};

/// `count` plans with rows drawn uniformly (with replacement) from a batch of `batch`.
std::vector<RecombinationPlan> draw_plans(std::size_t batch, std::size_t slots, std::size_t count, Rng& rng);

/// Slot k of the result is slot k of `za` when rho[k] == 1, else of `zb`.
std::vector<double> recombine(std::span<const double> za, std::span<const double> zb,
                              std::span<const std::uint8_t> rho, std::size_t slot_dim);

struct ReconstructionPass {
  Var codes;  // [B, K * slot_dim]
  DecodedVars decoded;
  Var loss;  // mean over the batch of squared L2 pixel error
};

ReconstructionPass reconstruction_pass(const ModelConfig& cfg, const BoundParams& params, Var x);
Var rec_loss(const ModelConfig& cfg, const BoundParams& params, Var x);

/// Consistency loss between recombined targets and their re-encodings.
///
/// Both [B, K * slot_dim] inputs are z-scored per slot coordinate with batch
/// statistics pooled over slots (population std, floored at 1e-6). Each
/// sample's re-encoded slots are Hungarian-matched to the target slots on
/// squared distance, and the loss is the mean matched squared distance over
/// B * K slot pairs.
Var matched_consistency(Var target, Var reencoded, std::size_t slots, std::size_t slot_dim);

/// Recombines `codes` with freshly drawn plans, decodes, re-encodes, and
/// returns matched_consistency. Requires a batch of at least two.
Var cons_loss_from_codes(const ModelConfig& cfg, const BoundParams& params, Var codes, Rng& rng,
                         ConsistencyGrad mode);
Var cons_loss(const ModelConfig& cfg, const BoundParams& params, Var x, Rng& rng, ConsistencyGrad mode);

}  // namespace cgl

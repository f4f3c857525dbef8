#pragma once

#include <cstddef>

#include "cgl/tensor.hpp"

namespace cgl {

struct SlotDecoding {
  Tensor recon;          // [B, N]
  Tensor contributions;  // [B, K, N]; sums to recon over K
};

/// Anything that maps observations to K slot codes and back. Implemented by
/// the trained autoencoder and by test oracles.
class SlotModel {
 public:
  virtual ~SlotModel() = default;
  virtual std::size_t slots() const = 0;
  virtual std::size_t slot_dim() const = 0;
  virtual std::size_t pixels() const = 0;
  /// [B, N] -> [B, K * slot_dim]
  virtual Tensor encode(const Tensor& x) const = 0;
  /// [B, K * slot_dim] -> reconstruction and per-slot terms
  virtual SlotDecoding decode(const Tensor& codes) const = 0;
};

}  // namespace cgl

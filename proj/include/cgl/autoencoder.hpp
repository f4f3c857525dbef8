#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgl/slot_model.hpp"
#include "cgl/tape.hpp"
#include "cgl/tensor.hpp"

namespace cgl {

enum class DecoderKind : std::uint8_t { kAdditive, kMaskedSoftmax, kMaskedSigmoid };

const char* decoder_name(DecoderKind kind);
DecoderKind parse_decoder(const std::string& name);

struct ModelConfig {
  std::size_t pixels = 64;   // N
  std::size_t slots = 2;     // K
  std::size_t slot_dim = 3;  // inferred slot size
  std::vector<std::size_t> encoder_hidden{128, 128};
  std::vector<std::size_t> decoder_hidden{128, 128};
  DecoderKind decoder = DecoderKind::kAdditive;
  bool shared_decoder = false;
  std::uint64_t init_seed = 0;

  std::size_t code_size() const noexcept { return slots * slot_dim; }
  /// [N, hidden..., K * slot_dim]
  std::vector<std::size_t> encoder_widths() const;
  /// [slot_dim, hidden..., N] for additive, [..., 2N] (mask logits, appearance) for masked.
  std::vector<std::size_t> decoder_widths() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ParamArray {
  std::string name;
  Shape shape;
  std::vector<double> data;

  friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

/// Named parameter arrays for the encoder and the slot decoders, in a fixed order.
/// Dense layers store weights as [fan_in, fan_out] so that y = x W + b.
class ModelParams {
 public:
  std::vector<ParamArray>& arrays() noexcept { return arrays_; }
  const std::vector<ParamArray>& arrays() const noexcept { return arrays_; }
  const ParamArray& at(const std::string& name) const;
  ParamArray& at(const std::string& name);
  std::size_t index_of(const std::string& name) const;
  std::size_t total_size() const;
  bool all_finite() const;

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<ParamArray> arrays_;
};

/// Names and shapes implied by a config, in storage order (data left empty).
std::vector<ParamArray> param_layout(const ModelConfig& cfg);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias, seeded by cfg.init_seed.
ModelParams init_params(const ModelConfig& cfg);

/// Parameter leaves recorded on a tape, aligned with ModelParams::arrays().
struct BoundParams {
  std::vector<Var> vars;
  const ModelParams* params = nullptr;
  Var operator[](const std::string& name) const { return vars[params->index_of(name)]; }
};

BoundParams bind(Tape& tape, const ModelParams& params, bool requires_grad);
/// Gradients of the last backward pass, flattened in ModelParams order.
std::vector<double> flat_gradient(const Tape& tape, const BoundParams& bound);

struct DecodedVars {
  Var recon;          // [B, N]
  Var contributions;  // [B, K, N]: the term each slot adds to recon
  Var masks;          // [B, K, N], masked decoders only
  Var appearances;    // [B, K, N], masked decoders only
};

/// x [B, N] -> codes [B, K * slot_dim]. ELU hidden layers, linear output.
Var encode(const ModelConfig& cfg, const BoundParams& params, Var x);
/// codes [B, K * slot_dim] -> reconstruction and per-slot terms.
DecodedVars decode(const ModelConfig& cfg, const BoundParams& params, Var codes);

/// Config plus parameters with tape-free evaluation helpers.
class Autoencoder : public SlotModel {
 public:
  Autoencoder(ModelConfig cfg, ModelParams params);

  const ModelConfig& config() const noexcept { return cfg_; }
  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }

  std::size_t slots() const override { return cfg_.slots; }
  std::size_t slot_dim() const override { return cfg_.slot_dim; }
  std::size_t pixels() const override { return cfg_.pixels; }
  Tensor encode(const Tensor& x) const override;
  SlotDecoding decode(const Tensor& codes) const override;

 private:
  ModelConfig cfg_;
  ModelParams params_;
};

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::int64_t step = 0;
  std::uint64_t rng_digest = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "CGCK", u32 version, u32 length + JSON header, then per array: u32 name
/// length, name bytes, u64 count, count little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError naming the first field on which `loaded` differs from `expected`.
void check_compatible(const ModelConfig& expected, const ModelConfig& loaded);

}  // namespace cgl

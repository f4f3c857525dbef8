#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgl/autoencoder.hpp"
#include "cgl/evaluation.hpp"
#include "cgl/scene.hpp"
#include "cgl/trainer.hpp"

namespace cgl {

struct EvalConfig {
  std::size_t identifiability_rows = 2000;
  std::size_t contrast_points = 100;
  std::size_t heatmap_resolution = 16;
  HeatmapMode heatmap_mode = HeatmapMode::kFullAutoencoder;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct TheoryConfig {
  std::size_t points = 1000;           // random latents for the generator checks
  std::size_t ks_samples = 10000;      // ID sampler draws for the marginal test
  std::size_t random_partitions = 64;  // irreducibility splits per slot
  bool exhaustive_partitions = false;  // all splits when an influence set has <= 12 pixels

  friend bool operator==(const TheoryConfig&, const TheoryConfig&) = default;
};

struct AblateConfig {
  std::vector<DecoderKind> decoders{DecoderKind::kAdditive, DecoderKind::kMaskedSoftmax, DecoderKind::kMaskedSigmoid};
  std::vector<double> lambdas{0.0, 1.0};
  std::size_t seeds = 5;  // runs use master seeds seed, seed+1, ...
  std::size_t jobs = 0;   // worker threads; 0 = hardware concurrency

  friend bool operator==(const AblateConfig&, const AblateConfig&) = default;
};

/// Everything one command needs. Loaded from a JSON file in which every key is
/// optional; missing keys keep the defaults below.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "run";
  SceneConfig scene;
  DatasetCounts counts;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  TheoryConfig theory;
  AblateConfig ablate;

  /// Sets the master seed and the scene, model, and training seeds derived from it.
  void apply_seed(std::uint64_t master);
  /// Checks every section and the cross-section constraints (N and K agree).
  void validate() const;

  std::filesystem::path data_dir() const { return out / "data"; }
  std::filesystem::path checkpoint_path() const { return out / "model.ckpt"; }
};

nlohmann::json to_json(const RunConfig& cfg);
/// Throws ConfigError naming the offending field, e.g. "train.lambda".
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace cgl

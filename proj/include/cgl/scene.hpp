#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgl/random.hpp"

namespace cgl {

/// Invalid configuration value; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// How objects are placed on the pixel strip.
enum class Layout : std::uint8_t {
  /// Object k lives in its own sub-strip [k/K, (k+1)/K); objects never touch.
  kSubStrips,
  /// All objects share the full strip; object k's position is offset by k/K
  /// (mod 1) and scenes whose positions are closer than `min_sep` are rejected.
  kSharedOffset,
};

struct SceneConfig {
  std::size_t slots = 2;       // K
  std::size_t slot_dim = 2;    // M: position and (optionally) amplitude
  std::size_t pixels = 64;     // N
  double half_width = 0.08;    // bump half-width w, in strip units
  double band = 0.125;         // band thickness delta
  double min_sep = 0.2;        // only used by kSharedOffset
  Layout layout = Layout::kSubStrips;
  std::uint64_t seed = 0;

  std::size_t latent_size() const noexcept { return slots * slot_dim; }
  /// sqrt(2) * band: the per-coordinate bound on slot differences inside the band.
  double band_limit() const noexcept;
  void validate() const;

  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);

/// A point of the slot-factorized latent space: K slots of M coordinates in [0, 1].
class Latent {
 public:
  Latent() = default;
  Latent(std::size_t slots, std::size_t slot_dim, std::vector<double> values);

  std::size_t slots() const noexcept { return slots_; }
  std::size_t slot_dim() const noexcept { return slot_dim_; }
  std::span<const double> slot(std::size_t k) const {
    return std::span<const double>(values_).subspan(k * slot_dim_, slot_dim_);
  }
  std::span<double> slot(std::size_t k) { return std::span<double>(values_).subspan(k * slot_dim_, slot_dim_); }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const Latent&, const Latent&) = default;

 private:
  std::size_t slots_ = 0;
  std::size_t slot_dim_ = 0;
  std::vector<double> values_;
};

using Observation = std::vector<double>;

enum class Region : std::uint8_t { kId = 0, kOod = 1 };
const char* region_name(Region r);

/// Coordinate-wise band: max over slot pairs of |z_j - z_k|_i <= sqrt(2) delta for every i.
bool in_band(std::span<const double> z, std::size_t slots, std::size_t slot_dim, double band);
bool in_band(const Latent& z, double band);

/// Rejection samplers over the unit hypercube. Deterministic given the rng state.
std::vector<Latent> sample_in_band(const SceneConfig& cfg, std::size_t count, Rng& rng);
std::vector<Latent> sample_ood(const SceneConfig& cfg, std::size_t count, Rng& rng);
std::vector<Latent> sample_region(const SceneConfig& cfg, Region region, std::size_t count, Rng& rng);

/// Bump of object k rendered alone.
Observation render_object(const SceneConfig& cfg, std::size_t k, std::span<const double> slot);
/// Sum of all object bumps.
Observation render(const SceneConfig& cfg, std::span<const double> z);
inline Observation render(const SceneConfig& cfg, const Latent& z) { return render(cfg, z.values()); }

/// Latents and rendered observations of one region, stored as flat row-major blocks.
struct Dataset {
  std::size_t slots = 0;
  std::size_t slot_dim = 0;
  std::size_t pixels = 0;
  Region region = Region::kId;
  std::vector<double> latents;       // count x (K*M)
  std::vector<double> observations;  // count x N

  std::size_t count() const noexcept { return pixels == 0 ? 0 : observations.size() / pixels; }
  std::size_t latent_size() const noexcept { return slots * slot_dim; }
  std::span<const double> latent(std::size_t i) const {
    return std::span<const double>(latents).subspan(i * latent_size(), latent_size());
  }
  std::span<const double> observation(std::size_t i) const {
    return std::span<const double>(observations).subspan(i * pixels, pixels);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset make_dataset(const SceneConfig& cfg, Region region, const std::vector<Latent>& latents);

struct DatasetCounts {
  std::size_t train = 20000;
  std::size_t id_test = 2000;
  std::size_t ood_test = 2000;
};

struct DatasetSplits {
  Dataset train;
  Dataset id_test;
  Dataset ood_test;
};

/// Samples the three splits from independent streams derived from cfg.seed.
DatasetSplits generate_datasets(const SceneConfig& cfg, const DatasetCounts& counts);

/// Binary dataset file: "CGL1", u32 count, K, M, N, u8 region, then per record
/// K*M latent doubles followed by N pixel doubles, little-endian.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);
std::uintmax_t dataset_file_size(std::size_t count, std::size_t latent_size, std::size_t pixels);

/// Writes splits to `dir` as train.cgl / id_test.cgl / ood_test.cgl plus scene.json.
void write_splits(const std::filesystem::path& dir, const SceneConfig& cfg, const DatasetCounts& counts,
                  const DatasetSplits& splits);
DatasetSplits read_splits(const std::filesystem::path& dir);
SceneConfig read_scene_sidecar(const std::filesystem::path& dir);

}  // namespace cgl

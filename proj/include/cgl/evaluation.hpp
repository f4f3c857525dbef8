#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgl/regression.hpp"
#include "cgl/scene.hpp"
#include "cgl/slot_model.hpp"

namespace cgl {

/// Encodes and decodes `x` [B, N] in chunks of at most `chunk` rows.
Tensor reconstruct(const SlotModel& model, const Tensor& x, std::size_t chunk = 4096);
/// Codes for every row of `x`, chunked like reconstruct().
Tensor encode_all(const SlotModel& model, const Tensor& x, std::size_t chunk = 4096);

Tensor observations_tensor(const Dataset& data);
Tensor latents_tensor(const Dataset& data);

/// Per-sample mean squared pixel error of the full autoencoder.
std::vector<double> autoencoder_errors(const SlotModel& model, const Dataset& data);

/// 1 - MSE / (mean over pixels of the per-pixel variance of the dataset).
double reconstruction_r2(const SlotModel& model, const Dataset& data);

struct IsolatedDecoderResult {
  double mean = 0.0;
  std::vector<double> per_point;  // |g_hat(z') - g(z)|^2 / N
  std::vector<std::string> warnings;
};

/// Decoder error on codes assembled from in-band images that each contain one
/// of the objects. For an OOD latent z and object j, the partner latent copies
/// slot z_j into every slot (the diagonal is always in-band); its code is
/// matched to objects by Hungarian on the MSE between each decoder slot's
/// contribution and the object's ground-truth render. Slot i of the assembled
/// code is taken from the partner of the object matched to it. In-band
/// latents report the full-autoencoder error.
///
/// When `id_identifiability` is given and below 0.9, a warning is attached.
IsolatedDecoderResult isolated_decoder_error(const SlotModel& model, const SceneConfig& scene, const Dataset& data,
                                             std::optional<double> id_identifiability = std::nullopt);

enum class HeatmapMode : std::uint8_t { kFullAutoencoder, kIsolatedDecoder };
const char* heatmap_mode_name(HeatmapMode mode);
HeatmapMode parse_heatmap_mode(const std::string& name);

struct HeatmapOptions {
  std::size_t resolution = 16;
  HeatmapMode mode = HeatmapMode::kFullAutoencoder;
  /// Latent coordinate projected onto each axis; the amplitude by default.
  std::size_t coordinate = 1;
};

struct HeatmapGrid {
  std::size_t resolution = 0;
  std::vector<double> values;  // row-major; -1 marks an empty cell
  std::vector<std::size_t> counts;
  std::vector<Region> regions;  // region of each cell center

  double value(std::size_t row, std::size_t col) const { return values[row * resolution + col]; }
  Region region(std::size_t row, std::size_t col) const { return regions[row * resolution + col]; }
};

/// Bins ID and OOD test points on (slot 0, slot 1) of the chosen coordinate,
/// columns along slot 0 and rows along slot 1. Each cell averages the per-point
/// error of the chosen mode. Points whose region differs from their cell's
/// region are dropped. Requires K = 2 and a resolution of at least 8.
HeatmapGrid heatmap_grid(const SlotModel& model, const SceneConfig& scene, const Dataset& id_data,
                         const Dataset& ood_data, const HeatmapOptions& options);

/// CSV with header `row,col,value,region`.
std::string heatmap_csv(const HeatmapGrid& grid);
/// 8-bit binary PGM scaled linearly from 0 to the largest cell value, which is
/// recorded in a `# max=` comment. Empty cells are 0.
std::string heatmap_pgm(const HeatmapGrid& grid);

struct MetricsReport {
  double id_identifiability = 0.0;
  double ood_identifiability = 0.0;
  std::vector<std::size_t> id_permutation;
  std::vector<std::size_t> ood_permutation;
  double id_reconstruction_r2 = 0.0;
  double ood_reconstruction_r2 = 0.0;
  double id_mse = 0.0;
  double ood_mse = 0.0;
  double contrast = 0.0;
  double isolated_id = 0.0;
  double isolated_ood = 0.0;
  std::vector<std::string> warnings;
};

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

struct EvalOptions {
  IdentifiabilityOptions identifiability;
  std::size_t contrast_points = 100;
};

/// Scene ground truth is needed for the isolated decoder error.
MetricsReport evaluate(const SlotModel& model, const SceneConfig& scene, const Dataset& id_data,
                       const Dataset& ood_data, const EvalOptions& options = {});

}  // namespace cgl

#include "cgl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cgl/assignment.hpp"
#include "cgl/diagnostics.hpp"
#include "cgl/text.hpp"

namespace cgl {
namespace {

Tensor row_block(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t cols = x.dim(1);
  return Tensor({end - begin, cols},
                std::vector<double>(x.values().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                                    x.values().begin() + static_cast<std::ptrdiff_t>(end * cols)));
}

void append_rows(std::vector<double>& out, const Tensor& block) {
  out.insert(out.end(), block.values().begin(), block.values().end());
}

void check_model_matches(const SlotModel& model, const Dataset& data) {
  if (model.pixels() != data.pixels || model.slots() != data.slots) {
    throw std::invalid_argument("model (N=" + std::to_string(model.pixels()) + ", K=" + std::to_string(model.slots()) +
                                ") does not match dataset (N=" + std::to_string(data.pixels) +
                                ", K=" + std::to_string(data.slots) + ")");
  }
}

}  // namespace

Tensor encode_all(const SlotModel& model, const Tensor& x, std::size_t chunk) {
  const std::size_t n = x.dim(0);
  std::vector<double> out;
  out.reserve(n * model.slots() * model.slot_dim());
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    append_rows(out, model.encode(row_block(x, begin, std::min(n, begin + chunk))));
  }
  return Tensor({n, model.slots() * model.slot_dim()}, std::move(out));
}

Tensor reconstruct(const SlotModel& model, const Tensor& x, std::size_t chunk) {
  const std::size_t n = x.dim(0);
  std::vector<double> out;
  out.reserve(x.size());
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const Tensor block = row_block(x, begin, std::min(n, begin + chunk));
    append_rows(out, model.decode(model.encode(block)).recon);
  }
  return Tensor({n, x.dim(1)}, std::move(out));
}

Tensor observations_tensor(const Dataset& data) { return Tensor({data.count(), data.pixels}, data.observations); }

Tensor latents_tensor(const Dataset& data) { return Tensor({data.count(), data.latent_size()}, data.latents); }

std::vector<double> autoencoder_errors(const SlotModel& model, const Dataset& data) {
  check_model_matches(model, data);
  const Tensor x = observations_tensor(data);
  const Tensor xhat = reconstruct(model, x);
  std::vector<double> errors(data.count(), 0.0);
  for (std::size_t i = 0; i < data.count(); ++i) {
    double s = 0.0;
    for (std::size_t n = 0; n < data.pixels; ++n) {
      const double d = xhat.at(i, n) - x.at(i, n);
      s += d * d;
    }
    errors[i] = s / static_cast<double>(data.pixels);
  }
  return errors;
}

double reconstruction_r2(const SlotModel& model, const Dataset& data) {
  const std::size_t count = data.count();
  if (count == 0) throw std::invalid_argument("reconstruction_r2: empty dataset");
  const std::vector<double> errors = autoencoder_errors(model, data);
  double mse = 0.0;
  for (double e : errors) mse += e;
  mse /= static_cast<double>(count);

  double variance = 0.0;
  for (std::size_t n = 0; n < data.pixels; ++n) {
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += data.observation(i)[n];
    mean /= static_cast<double>(count);
    double v = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double d = data.observation(i)[n] - mean;
      v += d * d;
    }
    variance += v / static_cast<double>(count);
  }
  variance /= static_cast<double>(data.pixels);
  return 1.0 - mse / variance;
}

IsolatedDecoderResult isolated_decoder_error(const SlotModel& model, const SceneConfig& scene, const Dataset& data,
                                             std::optional<double> id_identifiability) {
  check_model_matches(model, data);
  const std::size_t slots = scene.slots;
  const std::size_t pixels = scene.pixels;
  const std::size_t width = model.slots() * model.slot_dim();
  const std::size_t dim = model.slot_dim();

  IsolatedDecoderResult result;
  if (id_identifiability && *id_identifiability < 0.9) {
    result.warnings.push_back("model does not slot-identify in-band data (identifiability " +
                              format_double(*id_identifiability) + " < 0.9)");
  }
  result.per_point.assign(data.count(), 0.0);
  if (data.count() == 0) return result;

  std::vector<std::size_t> outside;
  for (std::size_t i = 0; i < data.count(); ++i) {
    if (!in_band(data.latent(i), scene.slots, scene.slot_dim, scene.band)) outside.push_back(i);
  }
  if (outside.size() < data.count()) {
    const std::vector<double> full = autoencoder_errors(model, data);
    for (std::size_t i = 0; i < data.count(); ++i) result.per_point[i] = full[i];
  }

  if (!outside.empty()) {
    // Partner images, ordered (point, object).
    std::vector<double> partner_pixels;
    partner_pixels.reserve(outside.size() * slots * pixels);
    for (std::size_t i : outside) {
      const std::span<const double> z = data.latent(i);
      for (std::size_t j = 0; j < slots; ++j) {
        std::vector<double> partner;
        for (std::size_t k = 0; k < slots; ++k) {
          const auto s = z.subspan(j * scene.slot_dim, scene.slot_dim);
          partner.insert(partner.end(), s.begin(), s.end());
        }
        const Observation img = render(scene, partner);
        partner_pixels.insert(partner_pixels.end(), img.begin(), img.end());
      }
    }
    const Tensor partner_x({outside.size() * slots, pixels}, std::move(partner_pixels));
    const Tensor partner_codes = encode_all(model, partner_x);
    const Tensor contributions = model.decode(partner_codes).contributions;  // [P*K, K, N]

    std::vector<double> assembled(outside.size() * width);
    for (std::size_t p = 0; p < outside.size(); ++p) {
      const std::span<const double> z = data.latent(outside[p]);
      CostMatrix cost(slots, std::vector<double>(slots * slots));
      for (std::size_t j = 0; j < slots; ++j) {
        const Observation object = render_object(scene, j, z.subspan(j * scene.slot_dim, scene.slot_dim));
        const std::size_t row = p * slots + j;
        for (std::size_t i = 0; i < slots; ++i) {
          double s = 0.0;
          for (std::size_t n = 0; n < pixels; ++n) {
            const double d = contributions[(row * slots + i) * pixels + n] - object[n];
            s += d * d;
          }
          cost(j, i) = s / static_cast<double>(pixels);
        }
      }
      const Assignment match = hungarian(cost);
      for (std::size_t j = 0; j < slots; ++j) {
        const std::size_t i = match.perm[j];
        for (std::size_t d = 0; d < dim; ++d) {
          assembled[p * width + i * dim + d] = partner_codes.at(p * slots + j, i * dim + d);
        }
      }
    }
    const Tensor recon = model.decode(Tensor({outside.size(), width}, std::move(assembled))).recon;
    for (std::size_t p = 0; p < outside.size(); ++p) {
      const std::span<const double> x = data.observation(outside[p]);
      double s = 0.0;
      for (std::size_t n = 0; n < pixels; ++n) {
        const double d = recon.at(p, n) - x[n];
        s += d * d;
      }
      result.per_point[outside[p]] = s / static_cast<double>(pixels);
    }
  }

  for (double e : result.per_point) result.mean += e;
  result.mean /= static_cast<double>(data.count());
  return result;
}

const char* heatmap_mode_name(HeatmapMode mode) {
  return mode == HeatmapMode::kFullAutoencoder ? "full_ae" : "isolated_decoder";
}

HeatmapMode parse_heatmap_mode(const std::string& name) {
  if (name == "full_ae") return HeatmapMode::kFullAutoencoder;
  if (name == "isolated_decoder") return HeatmapMode::kIsolatedDecoder;
  throw ConfigError("heatmap.mode", "unknown mode '" + name + "'");
}

HeatmapGrid heatmap_grid(const SlotModel& model, const SceneConfig& scene, const Dataset& id_data,
                         const Dataset& ood_data, const HeatmapOptions& options) {
  if (options.resolution < 8) throw ConfigError("heatmap.resolution", "must be at least 8");
  if (scene.slots != 2) throw ConfigError("scene.slots", "heatmaps need exactly two slots");
  if (options.coordinate >= scene.slot_dim) throw ConfigError("heatmap.coordinate", "outside the slot");

  const std::size_t g = options.resolution;
  HeatmapGrid grid;
  grid.resolution = g;
  grid.values.assign(g * g, 0.0);
  grid.counts.assign(g * g, 0);
  grid.regions.resize(g * g);
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t c = 0; c < g; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(g);
      const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(g);
      grid.regions[r * g + c] = std::abs(x - y) <= scene.band_limit() ? Region::kId : Region::kOod;
    }
  }

  auto bin = [g](double v) { return std::min(g - 1, static_cast<std::size_t>(std::max(0.0, v) * static_cast<double>(g))); };
  for (const Dataset* data : {&id_data, &ood_data}) {
    const std::vector<double> errors = options.mode == HeatmapMode::kFullAutoencoder
                                           ? autoencoder_errors(model, *data)
                                           : isolated_decoder_error(model, scene, *data).per_point;
    for (std::size_t i = 0; i < data->count(); ++i) {
      const std::span<const double> z = data->latent(i);
      const std::size_t col = bin(z[options.coordinate]);
      const std::size_t row = bin(z[scene.slot_dim + options.coordinate]);
      const Region point_region = in_band(z, scene.slots, scene.slot_dim, scene.band) ? Region::kId : Region::kOod;
      if (point_region != grid.regions[row * g + col]) continue;
      grid.values[row * g + col] += errors[i];
      ++grid.counts[row * g + col];
    }
  }
  for (std::size_t c = 0; c < g * g; ++c) {
    grid.values[c] = grid.counts[c] == 0 ? -1.0 : grid.values[c] / static_cast<double>(grid.counts[c]);
  }
  return grid;
}

std::string heatmap_csv(const HeatmapGrid& grid) {
  std::string out = "row,col,value,region\n";
  for (std::size_t r = 0; r < grid.resolution; ++r) {
    for (std::size_t c = 0; c < grid.resolution; ++c) {
      out += std::to_string(r) + ',' + std::to_string(c) + ',' + format_double(grid.value(r, c)) + ',' +
             region_name(grid.region(r, c)) + '\n';
    }
  }
  return out;
}

std::string heatmap_pgm(const HeatmapGrid& grid) {
  double max = 0.0;
  for (double v : grid.values) max = std::max(max, v);
  const std::string side = std::to_string(grid.resolution);
  std::string out = "P5\n# max=" + format_double(max) + "\n" + side + ' ' + side + "\n255\n";
  for (double v : grid.values) {
    const double scaled = v <= 0.0 || max <= 0.0 ? 0.0 : std::round(255.0 * v / max);
    out.push_back(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  return out;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"id_identifiability", r.id_identifiability},
                     {"ood_identifiability", r.ood_identifiability},
                     {"id_permutation", r.id_permutation},
                     {"ood_permutation", r.ood_permutation},
                     {"id_reconstruction_r2", r.id_reconstruction_r2},
                     {"ood_reconstruction_r2", r.ood_reconstruction_r2},
                     {"id_mse", r.id_mse},
                     {"ood_mse", r.ood_mse},
                     {"contrast", r.contrast},
                     {"isolated_id", r.isolated_id},
                     {"isolated_ood", r.isolated_ood},
                     {"warnings", r.warnings}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  // Non-finite scores are written as null.
  auto number = [&j](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>();
  };
  r.id_identifiability = number("id_identifiability");
  r.ood_identifiability = number("ood_identifiability");
  r.id_permutation = j.at("id_permutation").get<std::vector<std::size_t>>();
  r.ood_permutation = j.at("ood_permutation").get<std::vector<std::size_t>>();
  r.id_reconstruction_r2 = number("id_reconstruction_r2");
  r.ood_reconstruction_r2 = number("ood_reconstruction_r2");
  r.id_mse = number("id_mse");
  r.ood_mse = number("ood_mse");
  r.contrast = number("contrast");
  r.isolated_id = number("isolated_id");
  r.isolated_ood = number("isolated_ood");
  r.warnings = j.value("warnings", std::vector<std::string>{});
}

MetricsReport evaluate(const SlotModel& model, const SceneConfig& scene, const Dataset& id_data,
                       const Dataset& ood_data, const EvalOptions& options) {
  MetricsReport report;
  const Tensor id_codes = encode_all(model, observations_tensor(id_data));
  const Tensor ood_codes = encode_all(model, observations_tensor(ood_data));

  const IdentifiabilityResult id_ident = slot_identifiability(id_codes, model.slot_dim(), latents_tensor(id_data),
                                                              scene.slot_dim, scene.slots, options.identifiability);
  const IdentifiabilityResult ood_ident = slot_identifiability(ood_codes, model.slot_dim(), latents_tensor(ood_data),
                                                               scene.slot_dim, scene.slots, options.identifiability);
  report.id_identifiability = id_ident.score;
  report.id_permutation = id_ident.perm;
  report.ood_identifiability = ood_ident.score;
  report.ood_permutation = ood_ident.perm;

  report.id_reconstruction_r2 = reconstruction_r2(model, id_data);
  report.ood_reconstruction_r2 = reconstruction_r2(model, ood_data);
  for (double e : autoencoder_errors(model, id_data)) report.id_mse += e;
  report.id_mse /= static_cast<double>(id_data.count());
  for (double e : autoencoder_errors(model, ood_data)) report.ood_mse += e;
  report.ood_mse /= static_cast<double>(ood_data.count());

  const std::size_t points = std::min(options.contrast_points, id_codes.dim(0));
  report.contrast = decoder_contrast(model, Tensor({points, id_codes.dim(1)},
                                                   std::vector<double>(id_codes.values().begin(),
                                                                       id_codes.values().begin() +
                                                                           static_cast<std::ptrdiff_t>(points * id_codes.dim(1)))));

  report.isolated_id = isolated_decoder_error(model, scene, id_data).mean;
  IsolatedDecoderResult iso = isolated_decoder_error(model, scene, ood_data, id_ident.score);
  report.isolated_ood = iso.mean;
  report.warnings = std::move(iso.warnings);
  return report;
}

}  // namespace cgl

#include "cgl/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "cgl/binary_io.hpp"
#include "cgl/tensor.hpp"

namespace cgl {
namespace {

constexpr char kDatasetMagic[] = "CGL1";
constexpr std::size_t kDatasetHeaderBytes = 4 + 4 * 4 + 1;
constexpr std::size_t kMaxDraws = 1'000'000;
constexpr double kMinAcceptance = 1e-4;

double bump(double offset, double half_width) {
  if (std::abs(offset) >= half_width) return 0.0;
  const double c = std::cos(std::numbers::pi * offset / (2.0 * half_width));
  const double c2 = c * c;
  return c2 * c2;
}

double object_center(const SceneConfig& cfg, std::size_t k, double position) {
  const double w = cfg.half_width;
  const double K = static_cast<double>(cfg.slots);
  if (cfg.layout == Layout::kSubStrips) {
    return static_cast<double>(k) / K + w + (1.0 / K - 2.0 * w) * position;
  }
  return w + (1.0 - 2.0 * w) * std::fmod(position + static_cast<double>(k) / K, 1.0);
}

// Shared-strip scenes additionally reject objects that would overlap.
bool separated(const SceneConfig& cfg, std::span<const double> z) {
  if (cfg.layout == Layout::kSubStrips) return true;
  for (std::size_t j = 0; j < cfg.slots; ++j) {
    for (std::size_t k = j + 1; k < cfg.slots; ++k) {
      const double pj = std::fmod(z[j * cfg.slot_dim] + static_cast<double>(j) / cfg.slots, 1.0);
      const double pk = std::fmod(z[k * cfg.slot_dim] + static_cast<double>(k) / cfg.slots, 1.0);
      if (std::abs(pj - pk) < cfg.min_sep) return false;
    }
  }
  return true;
}

std::string region_tag_json(Region r) { return r == Region::kId ? "id" : "ood"; }

}  // namespace

double SceneConfig::band_limit() const noexcept { return std::numbers::sqrt2 * band; }

void SceneConfig::validate() const {
  if (slots == 0) throw ConfigError("scene.slots", "must be positive");
  if (slot_dim != 1 && slot_dim != 2) {
    throw ConfigError("scene.slot_dim", "must be 1 (position) or 2 (position, amplitude)");
  }
  if (pixels == 0 || slots * slot_dim > pixels) {
    throw ConfigError("scene.pixels", "need pixels >= slots * slot_dim");
  }
  if (layout == Layout::kSubStrips) {
    if (!(half_width > 0.0 && half_width < 1.0 / (4.0 * static_cast<double>(slots)))) {
      throw ConfigError("scene.half_width", "must lie in (0, 1/(4*slots))");
    }
  } else if (!(half_width > 0.0 && half_width < 0.25)) {
    throw ConfigError("scene.half_width", "must lie in (0, 0.25)");
  }
  if (!(band > 0.0 && band <= 1.0)) throw ConfigError("scene.band", "must lie in (0, 1]");
  if (!(min_sep >= 0.0 && min_sep < 1.0)) throw ConfigError("scene.min_sep", "must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const SceneConfig& c) {
  j = nlohmann::json{{"slots", c.slots},
                     {"slot_dim", c.slot_dim},
                     {"pixels", c.pixels},
                     {"half_width", c.half_width},
                     {"band", c.band},
                     {"min_sep", c.min_sep},
                     {"layout", c.layout == Layout::kSubStrips ? "substrips" : "shared_offset"},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SceneConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("scene.") + key, e.what());
    }
  };
  get("slots", c.slots);
  get("slot_dim", c.slot_dim);
  get("pixels", c.pixels);
  get("half_width", c.half_width);
  get("band", c.band);
  get("min_sep", c.min_sep);
  get("seed", c.seed);
  if (j.contains("layout")) {
    const auto name = j.at("layout").get<std::string>();
    if (name == "substrips") {
      c.layout = Layout::kSubStrips;
    } else if (name == "shared_offset") {
      c.layout = Layout::kSharedOffset;
    } else {
      throw ConfigError("scene.layout", "unknown layout '" + name + "'");
    }
  }
}

Latent::Latent(std::size_t slots, std::size_t slot_dim, std::vector<double> values)
    : slots_(slots), slot_dim_(slot_dim), values_(std::move(values)) {
  if (values_.size() != slots_ * slot_dim_) {
    throw ShapeError("latent", Shape{slots_, slot_dim_}, Shape{values_.size()});
  }
}

const char* region_name(Region r) { return r == Region::kId ? "ID" : "OOD"; }

bool in_band(std::span<const double> z, std::size_t slots, std::size_t slot_dim, double band) {
  const double limit = std::numbers::sqrt2 * band;
  for (std::size_t i = 0; i < slot_dim; ++i) {
    double lo = z[i];
    double hi = z[i];
    for (std::size_t k = 1; k < slots; ++k) {
      lo = std::min(lo, z[k * slot_dim + i]);
      hi = std::max(hi, z[k * slot_dim + i]);
    }
    if (hi - lo > limit) return false;
  }
  return true;
}

bool in_band(const Latent& z, double band) { return in_band(z.values(), z.slots(), z.slot_dim(), band); }

std::vector<Latent> sample_region(const SceneConfig& cfg, Region region, std::size_t count, Rng& rng) {
  cfg.validate();
  if (count == 0) throw ConfigError("count", "must be positive");
  std::vector<Latent> out;
  out.reserve(count);
  std::vector<double> z(cfg.latent_size());
  std::size_t draws = 0;
  std::size_t window_draws = 0;
  std::size_t window_accepted = 0;
  while (out.size() < count) {
    for (double& v : z) v = rng.uniform();
    ++draws;
    ++window_draws;
    const bool inside = in_band(z, cfg.slots, cfg.slot_dim, cfg.band);
    if (inside == (region == Region::kId) && separated(cfg, z)) {
      out.emplace_back(cfg.slots, cfg.slot_dim, z);
      ++window_accepted;
    }
    if (window_draws == kMaxDraws) {
      if (static_cast<double>(window_accepted) < kMinAcceptance * static_cast<double>(window_draws)) {
        throw ConfigError("scene.band", std::string("degenerate ") + region_name(region) +
                                            " region: acceptance rate " +
                                            std::to_string(static_cast<double>(window_accepted) / window_draws) +
                                            " after " + std::to_string(draws) + " draws");
      }
      window_draws = 0;
      window_accepted = 0;
    }
  }
  return out;
}

std::vector<Latent> sample_in_band(const SceneConfig& cfg, std::size_t count, Rng& rng) {
  return sample_region(cfg, Region::kId, count, rng);
}

std::vector<Latent> sample_ood(const SceneConfig& cfg, std::size_t count, Rng& rng) {
  return sample_region(cfg, Region::kOod, count, rng);
}

Observation render_object(const SceneConfig& cfg, std::size_t k, std::span<const double> slot) {
  Observation pixels(cfg.pixels, 0.0);
  const double center = object_center(cfg, k, slot[0]);
  const double amplitude = cfg.slot_dim >= 2 ? 0.5 + 0.5 * slot[1] : 1.0;
  const double n_px = static_cast<double>(cfg.pixels);
  for (std::size_t n = 0; n < cfg.pixels; ++n) {
    const double u = (static_cast<double>(n) + 0.5) / n_px;
    pixels[n] = amplitude * bump(u - center, cfg.half_width);
  }
  return pixels;
}

Observation render(const SceneConfig& cfg, std::span<const double> z) {
  if (z.size() != cfg.latent_size()) throw ShapeError("render", Shape{cfg.latent_size()}, Shape{z.size()});
  Observation pixels(cfg.pixels, 0.0);
  for (std::size_t k = 0; k < cfg.slots; ++k) {
    const Observation obj = render_object(cfg, k, z.subspan(k * cfg.slot_dim, cfg.slot_dim));
    for (std::size_t n = 0; n < cfg.pixels; ++n) pixels[n] += obj[n];
  }
  return pixels;
}

Dataset make_dataset(const SceneConfig& cfg, Region region, const std::vector<Latent>& latents) {
  Dataset d;
  d.slots = cfg.slots;
  d.slot_dim = cfg.slot_dim;
  d.pixels = cfg.pixels;
  d.region = region;
  d.latents.reserve(latents.size() * cfg.latent_size());
  d.observations.reserve(latents.size() * cfg.pixels);
  for (const Latent& z : latents) {
    d.latents.insert(d.latents.end(), z.values().begin(), z.values().end());
    const Observation x = render(cfg, z);
    d.observations.insert(d.observations.end(), x.begin(), x.end());
  }
  return d;
}

DatasetSplits generate_datasets(const SceneConfig& cfg, const DatasetCounts& counts) {
  Rng train_rng(derive_seed(cfg.seed, "scene.train"));
  Rng id_rng(derive_seed(cfg.seed, "scene.id_test"));
  Rng ood_rng(derive_seed(cfg.seed, "scene.ood_test"));
  DatasetSplits s;
  s.train = make_dataset(cfg, Region::kId, sample_in_band(cfg, counts.train, train_rng));
  s.id_test = make_dataset(cfg, Region::kId, sample_in_band(cfg, counts.id_test, id_rng));
  s.ood_test = make_dataset(cfg, Region::kOod, sample_ood(cfg, counts.ood_test, ood_rng));
  return s;
}

std::uintmax_t dataset_file_size(std::size_t count, std::size_t latent_size, std::size_t pixels) {
  return kDatasetHeaderBytes + static_cast<std::uintmax_t>(count) * (latent_size + pixels) * 8u;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  ByteWriter w;
  w.bytes(std::string_view(kDatasetMagic, 4));
  w.u32(static_cast<std::uint32_t>(data.count()));
  w.u32(static_cast<std::uint32_t>(data.slots));
  w.u32(static_cast<std::uint32_t>(data.slot_dim));
  w.u32(static_cast<std::uint32_t>(data.pixels));
  w.u8(static_cast<std::uint8_t>(data.region));
  for (std::size_t i = 0; i < data.count(); ++i) {
    w.f64s(data.latent(i));
    w.f64s(data.observation(i));
  }
  w.write_to(path);
}

Dataset read_dataset(const std::filesystem::path& path) {
  ByteReader r = ByteReader::open(path);
  if (r.bytes(4) != std::string_view(kDatasetMagic, 4)) r.fail("bad magic, expected CGL1");
  const std::uint32_t count = r.u32();
  Dataset d;
  d.slots = r.u32();
  d.slot_dim = r.u32();
  d.pixels = r.u32();
  const std::uint8_t tag = r.u8();
  if (tag > 1) r.fail("unknown region tag " + std::to_string(tag));
  d.region = static_cast<Region>(tag);
  const std::size_t expected = static_cast<std::size_t>(count) * (d.latent_size() + d.pixels) * 8u;
  if (r.remaining() != expected) {
    r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, header implies " +
           std::to_string(expected));
  }
  d.latents.resize(static_cast<std::size_t>(count) * d.latent_size());
  d.observations.resize(static_cast<std::size_t>(count) * d.pixels);
  for (std::size_t i = 0; i < count; ++i) {
    r.f64s(std::span<double>(d.latents).subspan(i * d.latent_size(), d.latent_size()));
    r.f64s(std::span<double>(d.observations).subspan(i * d.pixels, d.pixels));
  }
  return d;
}

void write_splits(const std::filesystem::path& dir, const SceneConfig& cfg, const DatasetCounts& counts,
                  const DatasetSplits& splits) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
  write_dataset(dir / "train.cgl", splits.train);
  write_dataset(dir / "id_test.cgl", splits.id_test);
  write_dataset(dir / "ood_test.cgl", splits.ood_test);
  nlohmann::json side{{"format", "CGL1"},
                      {"scene", cfg},
                      {"counts", {{"train", counts.train}, {"id_test", counts.id_test}, {"ood_test", counts.ood_test}}},
                      {"regions", {{"train", region_tag_json(splits.train.region)},
                                   {"id_test", region_tag_json(splits.id_test.region)},
                                   {"ood_test", region_tag_json(splits.ood_test.region)}}}};
  const auto sidecar = dir / "scene.json";
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw IoError(sidecar, "cannot open for writing");
  out << side.dump(2) << '\n';
}

SceneConfig read_scene_sidecar(const std::filesystem::path& dir) {
  const auto sidecar = dir / "scene.json";
  std::ifstream in(sidecar);
  if (!in) throw IoError(sidecar, "cannot open for reading");
  try {
    return nlohmann::json::parse(in).at("scene").get<SceneConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(sidecar, e.what());
  }
}

DatasetSplits read_splits(const std::filesystem::path& dir) {
  DatasetSplits s;
  s.train = read_dataset(dir / "train.cgl");
  s.id_test = read_dataset(dir / "id_test.cgl");
  s.ood_test = read_dataset(dir / "ood_test.cgl");
  return s;
}

}  // namespace cgl

#include "cgl/autoencoder.hpp"

#include <cmath>
#include <fstream>

#include "cgl/binary_io.hpp"
#include "cgl/random.hpp"
#include "cgl/scene.hpp"

namespace cgl {
namespace {

constexpr char kCheckpointMagic[] = "CGCK";

std::string layer_prefix(const std::string& owner, std::size_t layer) {
  return owner + ".l" + std::to_string(layer);
}

std::string decoder_owner(const ModelConfig& cfg, std::size_t slot) {
  return cfg.shared_decoder ? std::string("decoder") : "decoder" + std::to_string(slot);
}

void append_mlp_layout(std::vector<ParamArray>& out, const std::string& owner,
                       const std::vector<std::size_t>& widths) {
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    out.push_back({layer_prefix(owner, l) + ".weight", {widths[l], widths[l + 1]}, {}});
    out.push_back({layer_prefix(owner, l) + ".bias", {widths[l + 1]}, {}});
  }
}

Var run_mlp(const BoundParams& params, const std::string& owner, std::size_t layers, Var x) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = layer_prefix(owner, l);
    x = add_bias(matmul(x, params[p + ".weight"]), params[p + ".bias"]);
    if (l + 1 < layers) x = elu(x);
  }
  return x;
}

std::vector<std::size_t> column_block(std::size_t rows, std::size_t cols, std::size_t begin, std::size_t width) {
  std::vector<std::size_t> index;
  index.reserve(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) index.push_back(r * cols + begin + c);
  }
  return index;
}

}  // namespace

const char* decoder_name(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kAdditive: return "additive";
    case DecoderKind::kMaskedSoftmax: return "masked_softmax";
    case DecoderKind::kMaskedSigmoid: return "masked_sigmoid";
  }
  return "?";
}

DecoderKind parse_decoder(const std::string& name) {
  if (name == "additive") return DecoderKind::kAdditive;
  if (name == "masked_softmax") return DecoderKind::kMaskedSoftmax;
  if (name == "masked_sigmoid") return DecoderKind::kMaskedSigmoid;
  throw ConfigError("model.decoder", "unknown decoder kind '" + name + "'");
}

std::vector<std::size_t> ModelConfig::encoder_widths() const {
  std::vector<std::size_t> w{pixels};
  w.insert(w.end(), encoder_hidden.begin(), encoder_hidden.end());
  w.push_back(code_size());
  return w;
}

std::vector<std::size_t> ModelConfig::decoder_widths() const {
  std::vector<std::size_t> w{slot_dim};
  w.insert(w.end(), decoder_hidden.begin(), decoder_hidden.end());
  w.push_back(decoder == DecoderKind::kAdditive ? pixels : 2 * pixels);
  return w;
}

void ModelConfig::validate() const {
  if (pixels == 0) throw ConfigError("model.pixels", "must be positive");
  if (slots == 0) throw ConfigError("model.slots", "must be positive");
  if (slot_dim == 0) throw ConfigError("model.slot_dim", "must be positive");
  for (std::size_t w : encoder_hidden) {
    if (w == 0) throw ConfigError("model.encoder_hidden", "widths must be positive");
  }
  for (std::size_t w : decoder_hidden) {
    if (w == 0) throw ConfigError("model.decoder_hidden", "widths must be positive");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"pixels", c.pixels},
                     {"slots", c.slots},
                     {"slot_dim", c.slot_dim},
                     {"encoder_hidden", c.encoder_hidden},
                     {"decoder_hidden", c.decoder_hidden},
                     {"decoder", decoder_name(c.decoder)},
                     {"shared_decoder", c.shared_decoder},
                     {"init_seed", c.init_seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("model.") + key, e.what());
    }
  };
  get("pixels", c.pixels);
  get("slots", c.slots);
  get("slot_dim", c.slot_dim);
  get("encoder_hidden", c.encoder_hidden);
  get("decoder_hidden", c.decoder_hidden);
  get("shared_decoder", c.shared_decoder);
  get("init_seed", c.init_seed);
  if (j.contains("decoder")) c.decoder = parse_decoder(j.at("decoder").get<std::string>());
}

// ---------------------------------------------------------------------------

const ParamArray& ModelParams::at(const std::string& name) const { return arrays_[index_of(name)]; }
ParamArray& ModelParams::at(const std::string& name) { return arrays_[index_of(name)]; }

std::size_t ModelParams::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (arrays_[i].name == name) return i;
  }
  throw std::out_of_range("no parameter array named '" + name + "'");
}

std::size_t ModelParams::total_size() const {
  std::size_t n = 0;
  for (const auto& a : arrays_) n += a.data.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& a : arrays_) {
    for (double v : a.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_size());
  for (const auto& a : arrays_) flat.insert(flat.end(), a.data.begin(), a.data.end());
  return flat;
}

void ModelParams::assign(std::span<const double> flat) {
  if (flat.size() != total_size()) throw ShapeError("assign", Shape{total_size()}, Shape{flat.size()});
  std::size_t off = 0;
  for (auto& a : arrays_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), a.data.size(), a.data.begin());
    off += a.data.size();
  }
}

std::vector<ParamArray> param_layout(const ModelConfig& cfg) {
  std::vector<ParamArray> out;
  append_mlp_layout(out, "encoder", cfg.encoder_widths());
  const std::size_t decoders = cfg.shared_decoder ? 1 : cfg.slots;
  for (std::size_t k = 0; k < decoders; ++k) append_mlp_layout(out, decoder_owner(cfg, k), cfg.decoder_widths());
  return out;
}

ModelParams init_params(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.init_seed, "model.init"));
  ModelParams params;
  params.arrays() = param_layout(cfg);
  auto& arrays = params.arrays();
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    // Layout alternates weight, bias; a bias uses its weight's fan-in.
    const ParamArray& weight = arrays[i].shape.size() == 2 ? arrays[i] : arrays[i - 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(weight.shape[0]));
    arrays[i].data.resize(element_count(arrays[i].shape));
    for (double& v : arrays[i].data) v = rng.uniform(-bound, bound);
  }
  return params;
}

BoundParams bind(Tape& tape, const ModelParams& params, bool requires_grad) {
  BoundParams b;
  b.params = &params;
  b.vars.reserve(params.arrays().size());
  for (const ParamArray& a : params.arrays()) b.vars.push_back(tape.leaf(Tensor(a.shape, a.data), requires_grad));
  return b;
}

std::vector<double> flat_gradient(const Tape& tape, const BoundParams& bound) {
  std::vector<double> flat;
  flat.reserve(bound.params->total_size());
  for (Var v : bound.vars) {
    const Tensor& g = tape.grad(v);
    flat.insert(flat.end(), g.data().begin(), g.data().end());
  }
  return flat;
}

Var encode(const ModelConfig& cfg, const BoundParams& params, Var x) {
  if (x.value().rank() != 2 || x.shape()[1] != cfg.pixels) {
    throw ShapeError("encode", x.shape(), Shape{0, cfg.pixels});
  }
  return run_mlp(params, "encoder", cfg.encoder_widths().size() - 1, x);
}

DecodedVars decode(const ModelConfig& cfg, const BoundParams& params, Var codes) {
  if (codes.value().rank() != 2 || codes.shape()[1] != cfg.code_size()) {
    throw ShapeError("decode", codes.shape(), Shape{0, cfg.code_size()});
  }
  const std::size_t batch = codes.shape()[0];
  const std::size_t layers = cfg.decoder_widths().size() - 1;
  const std::size_t n = cfg.pixels;
  std::vector<Var> outputs;
  outputs.reserve(cfg.slots);
  for (std::size_t k = 0; k < cfg.slots; ++k) {
    Var slot = gather(codes, column_block(batch, cfg.code_size(), k * cfg.slot_dim, cfg.slot_dim),
                      {batch, cfg.slot_dim});
    outputs.push_back(run_mlp(params, decoder_owner(cfg, k), layers, slot));
  }

  DecodedVars out;
  if (cfg.decoder == DecoderKind::kAdditive) {
    out.contributions = stack(outputs, 1);
    out.recon = sum(out.contributions, 1);
    return out;
  }
  std::vector<Var> logits;
  std::vector<Var> appearances;
  for (Var o : outputs) {
    logits.push_back(gather(o, column_block(batch, 2 * n, 0, n), {batch, n}));
    appearances.push_back(sigmoid(gather(o, column_block(batch, 2 * n, n, n), {batch, n})));
  }
  Var stacked_logits = stack(logits, 1);
  out.masks = cfg.decoder == DecoderKind::kMaskedSoftmax ? softmax(stacked_logits, 1) : sigmoid(stacked_logits);
  out.appearances = stack(appearances, 1);
  out.contributions = mul(out.masks, out.appearances);
  out.recon = sum(out.contributions, 1);
  return out;
}

Autoencoder::Autoencoder(ModelConfig cfg, ModelParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

Tensor Autoencoder::encode(const Tensor& x) const {
  Tape tape;
  const BoundParams bound = bind(tape, params_, false);
  return cgl::encode(cfg_, bound, tape.constant(x)).value();
}

SlotDecoding Autoencoder::decode(const Tensor& codes) const {
  Tape tape;
  const BoundParams bound = bind(tape, params_, false);
  const DecodedVars d = cgl::decode(cfg_, bound, tape.constant(codes));
  return SlotDecoding{d.recon.value(), d.contributions.value()};
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const nlohmann::json header{{"model", ckpt.config},
                              {"step", ckpt.step},
                              {"rng_digest", ckpt.rng_digest},
                              {"arrays", ckpt.params.arrays().size()}};
  const std::string text = header.dump();
  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  for (const ParamArray& a : ckpt.params.arrays()) {
    w.u32(static_cast<std::uint32_t>(a.name.size()));
    w.bytes(a.name);
    w.u64(a.data.size());
    w.f64s(a.data);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  w.write_to(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  ByteReader r = ByteReader::open(path);
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) r.fail("bad magic, expected CGCK");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t text_len = r.u32();
  const std::string text = r.bytes(text_len);
  Checkpoint ckpt;
  std::size_t array_count = 0;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.config = header.at("model").get<ModelConfig>();
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.rng_digest = header.at("rng_digest").get<std::uint64_t>();
    array_count = header.at("arrays").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("corrupt checkpoint header: ") + e.what());
  }
  std::vector<ParamArray> layout = param_layout(ckpt.config);
  if (layout.size() != array_count) {
    r.fail("header lists " + std::to_string(array_count) + " arrays, config implies " +
           std::to_string(layout.size()));
  }
  for (ParamArray& a : layout) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    if (name != a.name) r.fail("expected array '" + a.name + "', found '" + name + "'");
    const std::uint64_t count = r.u64();
    if (count != element_count(a.shape)) {
      r.fail("array '" + name + "' holds " + std::to_string(count) + " values, expected " +
             std::to_string(element_count(a.shape)));
    }
    a.data.resize(count);
    r.f64s(a.data);
  }
  if (r.remaining() != 0) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  ckpt.params.arrays() = std::move(layout);
  return ckpt;
}

void check_compatible(const ModelConfig& expected, const ModelConfig& loaded) {
  if (expected.pixels != loaded.pixels) throw ConfigError("model.pixels", "checkpoint does not match run config");
  if (expected.slots != loaded.slots) throw ConfigError("model.slots", "checkpoint does not match run config");
  if (expected.slot_dim != loaded.slot_dim) throw ConfigError("model.slot_dim", "checkpoint does not match run config");
  if (expected.encoder_hidden != loaded.encoder_hidden) {
    throw ConfigError("model.encoder_hidden", "checkpoint does not match run config");
  }
  if (expected.decoder_hidden != loaded.decoder_hidden) {
    throw ConfigError("model.decoder_hidden", "checkpoint does not match run config");
  }
  if (expected.decoder != loaded.decoder) throw ConfigError("model.decoder", "checkpoint does not match run config");
  if (expected.shared_decoder != loaded.shared_decoder) {
    throw ConfigError("model.shared_decoder", "checkpoint does not match run config");
  }
}

}  // namespace cgl

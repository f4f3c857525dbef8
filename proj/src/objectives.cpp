#include "cgl/objectives.hpp"

#include <stdexcept>

#include "cgl/assignment.hpp"
#include "cgl/scene.hpp"

namespace cgl {

const char* consistency_grad_name(ConsistencyGrad g) {
  return g == ConsistencyGrad::kEncoderOnly ? "encoder_only" : "full";
}

ConsistencyGrad parse_consistency_grad(const std::string& name) {
  if (name == "encoder_only") return ConsistencyGrad::kEncoderOnly;
  if (name == "full") return ConsistencyGrad::kFull;
  throw ConfigError("train.consistency_grad", "unknown mode '" + name + "'");
}

std::vector<RecombinationPlan> draw_plans(std::size_t batch, std::size_t slots, std::size_t count, Rng& rng) {
  std::vector<RecombinationPlan> plans(count);
  for (RecombinationPlan& p : plans) {
    p.a = rng.below(batch);
    p.b = rng.below(batch);
    p.rho.resize(slots);
    for (auto& r : p.rho) r = static_cast<std::uint8_t>(1 + rng.below(2));
  }
  return plans;
}

std::vector<double> recombine(std::span<const double> za, std::span<const double> zb,
                              std::span<const std::uint8_t> rho, std::size_t slot_dim) {
  if (za.size() != zb.size() || za.size() != rho.size() * slot_dim) {
    throw ShapeError("recombine", Shape{za.size()}, Shape{zb.size()});
  }
  std::vector<double> out(za.size());
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const auto src = rho[k] == 1 ? za : zb;
    for (std::size_t d = 0; d < slot_dim; ++d) out[k * slot_dim + d] = src[k * slot_dim + d];
  }
  return out;
}

ReconstructionPass reconstruction_pass(const ModelConfig& cfg, const BoundParams& params, Var x) {
  ReconstructionPass pass;
  pass.codes = encode(cfg, params, x);
  pass.decoded = decode(cfg, params, pass.codes);
  const double batch = static_cast<double>(x.shape()[0]);
  pass.loss = scale(squared_error(pass.decoded.recon, x), 1.0 / batch);
  return pass;
}

Var rec_loss(const ModelConfig& cfg, const BoundParams& params, Var x) {
  return reconstruction_pass(cfg, params, x).loss;
}

Var matched_consistency(Var target, Var reencoded, std::size_t slots, std::size_t slot_dim) {
  if (target.shape() != reencoded.shape()) throw ShapeError("matched_consistency", target.shape(), reencoded.shape());
  const std::size_t batch = target.shape()[0];
  const Shape rows_shape{batch * slots, slot_dim};
  Var norm_target = standardize(reshape(target, rows_shape), kConsistencyStdFloor);
  Var norm_reenc = standardize(reshape(reencoded, rows_shape), kConsistencyStdFloor);

  const Tensor& t = norm_target.value();
  const Tensor& r = norm_reenc.value();
  std::vector<std::size_t> index;
  index.reserve(batch * slots * slot_dim);
  CostMatrix cost(slots, std::vector<double>(slots * slots, 0.0));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < slots; ++k) {
      for (std::size_t j = 0; j < slots; ++j) {
        double d2 = 0.0;
        for (std::size_t d = 0; d < slot_dim; ++d) {
          const double diff = t[(b * slots + k) * slot_dim + d] - r[(b * slots + j) * slot_dim + d];
          d2 += diff * diff;
        }
        cost(k, j) = d2;
      }
    }
    const Assignment match = hungarian(cost);
    for (std::size_t k = 0; k < slots; ++k) {
      for (std::size_t d = 0; d < slot_dim; ++d) index.push_back((b * slots + match.perm[k]) * slot_dim + d);
    }
  }
  Var matched = gather(norm_reenc, std::move(index), rows_shape);
  return scale(squared_error(matched, norm_target), 1.0 / static_cast<double>(batch * slots));
}

Var cons_loss_from_codes(const ModelConfig& cfg, const BoundParams& params, Var codes, Rng& rng,
                         ConsistencyGrad mode) {
  const std::size_t batch = codes.shape()[0];
  if (batch < 2) throw std::invalid_argument("cons_loss: batch of " + std::to_string(batch) + " < 2");
  const std::size_t width = cfg.code_size();
  const std::vector<RecombinationPlan> plans = draw_plans(batch, cfg.slots, batch, rng);

  Tape& tape = codes.tape();
  Var target;
  Var rendered;
  if (mode == ConsistencyGrad::kEncoderOnly) {
    const Tensor& z = codes.value();
    std::vector<double> flat;
    flat.reserve(batch * width);
    for (const RecombinationPlan& p : plans) {
      const std::vector<double> zp = recombine(z.data().subspan(p.a * width, width),
                                               z.data().subspan(p.b * width, width), p.rho, cfg.slot_dim);
      flat.insert(flat.end(), zp.begin(), zp.end());
    }
    target = tape.constant(Tensor({batch, width}, std::move(flat)));
    // Render on a side tape so the decoder output enters as a constant.
    Tape side;
    const BoundParams frozen = bind(side, *params.params, false);
    Tensor image = decode(cfg, frozen, side.constant(target.value())).recon.value();
    rendered = tape.constant(std::move(image));
  } else {
    std::vector<std::size_t> index;
    index.reserve(batch * width);
    for (const RecombinationPlan& p : plans) {
      for (std::size_t k = 0; k < cfg.slots; ++k) {
        const std::size_t row = p.rho[k] == 1 ? p.a : p.b;
        for (std::size_t d = 0; d < cfg.slot_dim; ++d) index.push_back(row * width + k * cfg.slot_dim + d);
      }
    }
    target = gather(codes, std::move(index), {batch, width});
    rendered = decode(cfg, params, target).recon;
  }
  Var reencoded = encode(cfg, params, rendered);
  return matched_consistency(target, reencoded, cfg.slots, cfg.slot_dim);
}

Var cons_loss(const ModelConfig& cfg, const BoundParams& params, Var x, Rng& rng, ConsistencyGrad mode) {
  return cons_loss_from_codes(cfg, params, encode(cfg, params, x), rng, mode);
}

}  // namespace cgl

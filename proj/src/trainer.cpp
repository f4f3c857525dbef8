#include "cgl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "cgl/diagnostics.hpp"
#include "cgl/text.hpp"
#include "cgl/evaluation.hpp"

namespace cgl {
namespace {

constexpr double kRampFloor = 1e-7;
constexpr std::size_t kDecayPeriod = 50;

double contrast_now(const ModelConfig& model_cfg, const ModelParams& params, const Tensor& probe) {
  const Autoencoder model(model_cfg, params);
  return decoder_contrast(model, model.encode(probe));
}

}  // namespace

const char* lr_schedule_name(LrSchedule s) { return s == LrSchedule::kConstant ? "constant" : "ramp_decay"; }

LrSchedule parse_lr_schedule(const std::string& name) {
  if (name == "constant") return LrSchedule::kConstant;
  if (name == "ramp_decay") return LrSchedule::kRampDecay;
  throw ConfigError("train.schedule", "unknown schedule '" + name + "'");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs", "must be positive");
  if (warmup > epochs) throw ConfigError("train.warmup", "exceeds train.epochs");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("train.lambda", "must be finite and >= 0");
  if (batch < 2) throw ConfigError("train.batch", "must be at least 2");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr", "must be positive");
  if (contrast_points == 0) throw ConfigError("train.contrast_points", "must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"warmup", c.warmup},
                     {"lambda", c.lambda},
                     {"batch", c.batch},
                     {"lr", c.lr},
                     {"schedule", lr_schedule_name(c.schedule)},
                     {"consistency_grad", consistency_grad_name(c.consistency_grad)},
                     {"seed", c.seed},
                     {"contrast_points", c.contrast_points},
                     {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("train.") + key, e.what());
    }
  };
  get("epochs", c.epochs);
  get("warmup", c.warmup);
  get("lambda", c.lambda);
  get("batch", c.batch);
  get("lr", c.lr);
  get("seed", c.seed);
  get("contrast_points", c.contrast_points);
  get("checkpoint_every", c.checkpoint_every);
  std::string name;
  if (j.contains("schedule")) {
    get("schedule", name);
    c.schedule = parse_lr_schedule(name);
  }
  if (j.contains("consistency_grad")) {
    get("consistency_grad", name);
    c.consistency_grad = parse_consistency_grad(name);
  }
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.schedule == LrSchedule::kConstant) return cfg.lr;
  std::size_t peak = 0;
  while (kRampFloor * std::ldexp(1.0, static_cast<int>(peak)) < cfg.lr) ++peak;
  if (epoch < peak) return kRampFloor * std::ldexp(1.0, static_cast<int>(epoch));
  const auto halvings = static_cast<int>((epoch - peak) / kDecayPeriod);
  return std::max(kRampFloor, cfg.lr * std::ldexp(1.0, -halvings));
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,l_rec,l_cons,contrast,seconds\n";
  for (const EpochRow& r : log.rows) {
    out += std::to_string(r.epoch) + ',' + format_double(r.l_rec) + ',' + format_double(r.l_cons) + ',' +
           format_double(r.contrast) + ',' + format_double(r.seconds) + '\n';
  }
  return out;
}

TrainLog parse_train_log_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "epoch,l_rec,l_cons,contrast,seconds") throw std::invalid_argument("train log: unexpected header '" + line + "'");
  TrainLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw std::invalid_argument("train log: malformed row '" + line + "'");
    EpochRow r;
    r.epoch = std::stoul(cells[0]);
    r.l_rec = std::stod(cells[1]);
    r.l_cons = std::stod(cells[2]);
    r.contrast = std::stod(cells[3]);
    r.seconds = std::stod(cells[4]);
    log.rows.push_back(r);
  }
  return log;
}

TrainingError::TrainingError(std::size_t epoch, std::size_t step, const std::string& what)
    : std::runtime_error("epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": " + what),
      epoch_(epoch),
      step_(step) {}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& train_data,
                  const Dataset& id_test, const TrainHooks& hooks) {
  model_cfg.validate();
  cfg.validate();
  if (train_data.pixels != model_cfg.pixels) {
    throw ConfigError("model.pixels", "model expects N=" + std::to_string(model_cfg.pixels) + " but the data has N=" +
                                          std::to_string(train_data.pixels));
  }
  if (train_data.slots != model_cfg.slots) {
    throw ConfigError("model.slots", "model expects K=" + std::to_string(model_cfg.slots) + " but the data has K=" +
                                         std::to_string(train_data.slots));
  }
  const std::size_t count = train_data.count();
  const std::size_t steps_per_epoch = count / cfg.batch;
  if (steps_per_epoch == 0) throw ConfigError("train.batch", "larger than the training set");
  if (id_test.count() == 0 || id_test.pixels != model_cfg.pixels) {
    throw ConfigError("data.id_test", "needed for the per-epoch contrast");
  }

  const std::size_t probe_rows = std::min(cfg.contrast_points, id_test.count());
  const Tensor probe({probe_rows, id_test.pixels},
                     std::vector<double>(id_test.observations.begin(),
                                         id_test.observations.begin() +
                                             static_cast<std::ptrdiff_t>(probe_rows * id_test.pixels)));

  ModelParams params = init_params(model_cfg);
  std::vector<double> flat = params.flatten();
  AdamState adam(flat.size(), AdamHyper{cfg.lr});
  Rng shuffle_rng(derive_seed(cfg.seed, "train.shuffle"));
  Rng recombine_rng(derive_seed(cfg.seed, "train.recombine"));

  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::vector<double> batch_pixels(cfg.batch * model_cfg.pixels);

  TrainResult result;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.set_lr(learning_rate(cfg, epoch));
    for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    const bool consistency = epoch >= cfg.warmup && cfg.lambda > 0.0;

    double rec_sum = 0.0;
    double cons_sum = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      for (std::size_t r = 0; r < cfg.batch; ++r) {
        const auto obs = train_data.observation(order[step * cfg.batch + r]);
        std::copy(obs.begin(), obs.end(), batch_pixels.begin() + static_cast<std::ptrdiff_t>(r * model_cfg.pixels));
      }
      Tape tape;
      const BoundParams bound = bind(tape, params, true);
      const Var x = tape.constant(Tensor({cfg.batch, model_cfg.pixels}, batch_pixels));
      const ReconstructionPass pass = reconstruction_pass(model_cfg, bound, x);
      Var loss = pass.loss;
      double cons_value = 0.0;
      if (consistency) {
        const Var lc = cons_loss_from_codes(model_cfg, bound, pass.codes, recombine_rng, cfg.consistency_grad);
        cons_value = lc.value().item();
        loss = loss + scale(lc, cfg.lambda);
      }
      const double rec_value = pass.loss.value().item();
      if (!std::isfinite(loss.value().item())) {
        throw TrainingError(epoch + 1, step, "non-finite loss (rec " + format_double(rec_value) + ", cons " +
                                                 format_double(cons_value) + ")");
      }
      tape.backward(loss);
      const std::vector<double> grad = flat_gradient(tape, bound);
      try {
        adam.step(flat, grad);
      } catch (const NonFiniteGradient& e) {
        throw TrainingError(epoch + 1, step, e.what());
      }
      params.assign(flat);
      rec_sum += rec_value;
      cons_sum += cons_value;
    }

    EpochRow row;
    row.epoch = epoch + 1;
    row.l_rec = rec_sum / static_cast<double>(steps_per_epoch);
    row.l_cons = cons_sum / static_cast<double>(steps_per_epoch);
    row.contrast = contrast_now(model_cfg, params, probe);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.rows.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);

    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(Checkpoint{model_cfg, params, adam.steps(), 0}, epoch + 1);
    }
  }

  Rng shuffle_copy = shuffle_rng;
  Rng recombine_copy = recombine_rng;
  result.checkpoint = Checkpoint{model_cfg, std::move(params), adam.steps(),
                                 mix64(shuffle_copy.next() ^ mix64(recombine_copy.next()))};
  return result;
}

}  // namespace cgl

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgl/adam.hpp"
#include "cgl/autoencoder.hpp"
#include "cgl/objectives.hpp"
#include "cgl/scene.hpp"

namespace cgl {

enum class LrSchedule : std::uint8_t {
  kConstant,
  /// Start at 1e-7, double every epoch up to lr, then halve every 50 epochs down to 1e-7.
  kRampDecay,
};

const char* lr_schedule_name(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t warmup = 50;  // reconstruction-only epochs
  double lambda = 1.0;
  std::size_t batch = 64;
  double lr = 1e-3;
  LrSchedule schedule = LrSchedule::kConstant;
  ConsistencyGrad consistency_grad = ConsistencyGrad::kEncoderOnly;
  std::uint64_t seed = 0;
  std::size_t contrast_points = 100;  // ID-test codes used for the per-epoch contrast
  std::size_t checkpoint_every = 0;   // epochs; 0 disables periodic checkpoints

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Learning rate used throughout `epoch` (0-based).
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  double l_rec = 0.0;     // mean over the epoch's steps
  double l_cons = 0.0;    // 0 during warmup or when lambda == 0
  double contrast = 0.0;  // decoder contrast on ID-test codes after the epoch
  double seconds = 0.0;   // cumulative wall time
};

struct TrainLog {
  std::vector<EpochRow> rows;
};

/// `epoch,l_rec,l_cons,contrast,seconds` with one row per completed epoch.
std::string train_log_csv(const TrainLog& log);
TrainLog parse_train_log_csv(const std::string& text);

/// Non-finite loss or gradient; the message carries the epoch and step.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, std::size_t step, const std::string& what);
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

struct TrainHooks {
  /// Called after every epoch with the logged row.
  std::function<void(const EpochRow&)> on_epoch;
  /// Called every `checkpoint_every` epochs with the current state.
  std::function<void(const Checkpoint&, std::size_t epoch)> on_checkpoint;
};

/// Adam over shuffled minibatches of `train` (a trailing partial batch is
/// dropped). Epochs before the warmup optimize the reconstruction loss only;
/// later epochs add lambda times the consistency loss. The per-epoch contrast
/// is measured on the first `contrast_points` observations of `id_test`.
/// Deterministic given the configs.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& train_data,
                  const Dataset& id_test, const TrainHooks& hooks = {});

}  // namespace cgl

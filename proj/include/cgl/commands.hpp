#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cgl/run_config.hpp"

namespace cgl {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,  // unexpected failure
  kExitUsage = 2,     // bad flags or invalid configuration (message names the field)
  kExitIo = 3,        // missing, unreadable, or corrupt input; unwritable output
  kExitMismatch = 4,  // datasets, checkpoint, and config disagree on N or K
  kExitTraining = 5,  // training aborted on a non-finite loss or gradient
};

/// Data and checkpoint disagree with each other or with the config.
class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Progress sink for human-readable messages. Commands never print to stdout.
using Progress = std::function<void(const std::string&)>;

struct CommandOptions {
  std::optional<std::filesystem::path> checkpoint;  // defaults to <out>/model.ckpt
  std::optional<HeatmapMode> heatmap_mode;          // overrides eval.heatmap_mode
  std::optional<std::size_t> heatmap_resolution;    // overrides eval.heatmap_resolution
  bool theory_generator_only = false;               // skip the trained-decoder part of theory-check
};

// Each command writes its artifacts under cfg.out and returns the one-line summary.
nlohmann::json cmd_gen_data(const RunConfig& cfg, const Progress& progress);
nlohmann::json cmd_train(const RunConfig& cfg, const Progress& progress);
nlohmann::json cmd_eval(const RunConfig& cfg, const CommandOptions& options, const Progress& progress);
nlohmann::json cmd_heatmap(const RunConfig& cfg, const CommandOptions& options, const Progress& progress);
nlohmann::json cmd_theory_check(const RunConfig& cfg, const CommandOptions& options, const Progress& progress);
nlohmann::json cmd_ablate(const RunConfig& cfg, const Progress& progress);

/// Generator diagnostics at cfg.theory.points random latents plus the ID
/// sampler marginal test. Used by theory-check.
nlohmann::json generator_theory_report(const RunConfig& cfg);

/// Kolmogorov-Smirnov distance between a sample and Uniform(0, 1).
double ks_uniform_distance(std::vector<double> sample);

/// Column order of the ablation table.
inline constexpr const char* kAblationHeader =
    "decoder,lambda,seed,id_identifiability,ood_identifiability,id_reconstruction_r2,ood_reconstruction_r2,"
    "contrast,isolated_id,isolated_ood";

/// Writes `content` through a temporary sibling and a rename, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cgl

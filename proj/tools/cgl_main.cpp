// Command-line entry point: gen-data, train, eval, heatmap, theory-check, ablate.
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cgl/binary_io.hpp"
#include "cgl/commands.hpp"
#include "cgl/numdiff.hpp"

namespace {

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slot autoencoder experiments on a one-dimensional multi-object scene"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration; every key is optional")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_flag("--quiet", quiet, "suppress progress messages on stderr");

  cgl::CommandOptions options;
  std::string checkpoint;
  std::string mode;
  std::size_t resolution = 0;

  auto* gen = app.add_subcommand("gen-data", "sample and write the train / ID-test / OOD-test datasets");
  auto* train = app.add_subcommand("train", "train a model on <out>/data");
  auto* eval = app.add_subcommand("eval", "write metrics.json for a checkpoint");
  auto* heatmap = app.add_subcommand("heatmap", "write error heatmaps over the two amplitude latents");
  auto* theory = app.add_subcommand("theory-check", "numerical checks of the generator and a trained decoder");
  auto* ablate = app.add_subcommand("ablate", "decoder x lambda x seed sweep");
  for (auto* sub : {eval, heatmap, theory}) {
    sub->add_option("--checkpoint", checkpoint, "checkpoint file (default <out>/model.ckpt)");
  }
  heatmap->add_option("--mode", mode, "full_ae or isolated_decoder")->check(CLI::IsMember({"full_ae", "isolated_decoder"}));
  heatmap->add_option("--resolution", resolution, "cells per axis (>= 8)");
  theory->add_flag("--generator-only", options.theory_generator_only, "skip the trained decoder");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cgl::kExitOk : cgl::kExitUsage;
  }

  std::ofstream log_file;
  auto progress = [&](const std::string& message) {
    if (!quiet) std::cerr << message << '\n';
    if (log_file) log_file << timestamp() << ' ' << message << '\n' << std::flush;
  };

  try {
    cgl::RunConfig cfg = config_path.empty() ? cgl::run_config_from_json(nlohmann::json::object())
                                             : cgl::load_run_config(config_path);
    if (seed) cfg.apply_seed(*seed);
    if (!out.empty()) cfg.out = out;
    cfg.validate();
    if (!checkpoint.empty()) options.checkpoint = checkpoint;
    if (!mode.empty()) options.heatmap_mode = cgl::parse_heatmap_mode(mode);
    if (resolution != 0) options.heatmap_resolution = resolution;

    std::filesystem::create_directories(cfg.out);
    log_file.open(cfg.out / "run.log", std::ios::app);
    const std::string name = app.get_subcommands().front()->get_name();
    progress("start " + name + " seed " + std::to_string(cfg.seed));

    nlohmann::json summary;
    if (name == "gen-data") {
      summary = cgl::cmd_gen_data(cfg, progress);
    } else if (name == "train") {
      summary = cgl::cmd_train(cfg, progress);
    } else if (name == "eval") {
      summary = cgl::cmd_eval(cfg, options, progress);
    } else if (name == "heatmap") {
      summary = cgl::cmd_heatmap(cfg, options, progress);
    } else if (name == "theory-check") {
      summary = cgl::cmd_theory_check(cfg, options, progress);
    } else {
      summary = cgl::cmd_ablate(cfg, progress);
    }
    progress("done " + name);
    std::cout << summary.dump() << std::endl;
    return cgl::kExitOk;
  } catch (const cgl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cgl::kExitUsage;
  } catch (const cgl::MismatchError& e) {
    std::cerr << "mismatch: " << e.what() << '\n';
    return cgl::kExitMismatch;
  } catch (const cgl::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return cgl::kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return cgl::kExitIo;
  } catch (const cgl::TrainingError& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return cgl::kExitTraining;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cgl::kExitInternal;
  }
}

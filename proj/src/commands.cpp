#include "cgl/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "cgl/binary_io.hpp"
#include "cgl/diagnostics.hpp"
#include "cgl/text.hpp"

namespace cgl {
namespace {

std::filesystem::path checkpoint_path(const RunConfig& cfg, const CommandOptions& options) {
  return options.checkpoint.value_or(cfg.checkpoint_path());
}

void check_data_matches(const SceneConfig& data_scene, std::size_t pixels, std::size_t slots, const std::string& what) {
  if (data_scene.pixels != pixels || data_scene.slots != slots) {
    throw MismatchError(what + " expects N=" + std::to_string(pixels) + ", K=" + std::to_string(slots) +
                        " but the datasets have N=" + std::to_string(data_scene.pixels) +
                        ", K=" + std::to_string(data_scene.slots));
  }
}

struct LoadedModel {
  SceneConfig scene;
  DatasetSplits splits;
  Checkpoint checkpoint;
};

LoadedModel load_for_eval(const RunConfig& cfg, const CommandOptions& options, bool need_train) {
  LoadedModel out;
  out.scene = read_scene_sidecar(cfg.data_dir());
  const std::filesystem::path dir = cfg.data_dir();
  if (need_train) out.splits.train = read_dataset(dir / "train.cgl");
  out.splits.id_test = read_dataset(dir / "id_test.cgl");
  out.splits.ood_test = read_dataset(dir / "ood_test.cgl");
  out.checkpoint = load_checkpoint(checkpoint_path(cfg, options));
  check_data_matches(out.scene, out.checkpoint.config.pixels, out.checkpoint.config.slots, "checkpoint");
  return out;
}

Tensor first_rows(const Tensor& t, std::size_t rows) {
  rows = std::min(rows, t.dim(0));
  const std::size_t cols = t.dim(1);
  return Tensor({rows, cols}, std::vector<double>(t.values().begin(),
                                                  t.values().begin() + static_cast<std::ptrdiff_t>(rows * cols)));
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string run_name(DecoderKind decoder, double lambda, std::uint64_t seed) {
  return std::string(decoder_name(decoder)) + "_lambda" + format_double(lambda) + "_seed" + std::to_string(seed);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> report_values(const MetricsReport& r) {
  return {r.id_identifiability, r.ood_identifiability, r.id_reconstruction_r2, r.ood_reconstruction_r2,
          r.contrast,           r.isolated_id,         r.isolated_ood};
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path(), "cannot create directory: " + ec.message());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp, "cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError(tmp, "write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path, "rename failed: " + ec.message());
}

double ks_uniform_distance(std::vector<double> sample) {
  if (sample.empty()) throw std::invalid_argument("ks_uniform_distance: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double x = std::clamp(sample[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
  }
  return d;
}

nlohmann::json cmd_gen_data(const RunConfig& cfg, const Progress& progress) {
  cfg.validate();
  progress("sampling " + std::to_string(cfg.counts.train) + "/" + std::to_string(cfg.counts.id_test) + "/" +
           std::to_string(cfg.counts.ood_test) + " train/id/ood scenes");
  const DatasetSplits splits = generate_datasets(cfg.scene, cfg.counts);
  write_splits(cfg.data_dir(), cfg.scene, cfg.counts, splits);

  nlohmann::json files = nlohmann::json::object();
  for (const char* name : {"train.cgl", "id_test.cgl", "ood_test.cgl", "scene.json"}) {
    files[name] = std::filesystem::file_size(cfg.data_dir() / name);
  }
  return {{"command", "gen-data"}, {"seed", cfg.seed}, {"dir", cfg.data_dir().string()}, {"files", files}};
}

nlohmann::json cmd_train(const RunConfig& cfg, const Progress& progress) {
  cfg.validate();
  const SceneConfig data_scene = read_scene_sidecar(cfg.data_dir());
  check_data_matches(data_scene, cfg.model.pixels, cfg.model.slots, "model config");
  const Dataset train_data = read_dataset(cfg.data_dir() / "train.cgl");
  const Dataset id_test = read_dataset(cfg.data_dir() / "id_test.cgl");
  if (train_data.pixels != cfg.model.pixels || train_data.slots != cfg.model.slots) {
    throw MismatchError("train.cgl header disagrees with the model config");
  }

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRow& row) {
    progress("epoch " + std::to_string(row.epoch) + "/" + std::to_string(cfg.train.epochs) + " l_rec " +
             format_double(row.l_rec) + " l_cons " + format_double(row.l_cons) + " contrast " +
             format_double(row.contrast));
  };
  hooks.on_checkpoint = [&](const Checkpoint& ckpt, std::size_t epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04zu.ckpt", epoch);
    save_checkpoint(cfg.out / "checkpoints" / name, ckpt);
  };
  const TrainResult result = train(cfg.model, cfg.train, train_data, id_test, hooks);
  save_checkpoint(cfg.checkpoint_path(), result.checkpoint);
  write_text_file(cfg.out / "train_log.csv", train_log_csv(result.log));

  const EpochRow& first = result.log.rows.front();
  const EpochRow& last = result.log.rows.back();
  nlohmann::json summary = {{"command", "train"},
                            {"seed", cfg.seed},
                            {"checkpoint", cfg.checkpoint_path().filename().string()},
                            {"epochs", result.log.rows.size()},
                            {"steps", result.checkpoint.step},
                            {"l_rec", last.l_rec},
                            {"l_cons", last.l_cons},
                            {"contrast_first", first.contrast},
                            {"contrast_last", last.contrast}};
  // train_log.csv carries wall-clock seconds, so the seed goes in a stable sidecar.
  write_text_file(cfg.out / "train.json", dump(summary));
  summary["checkpoint"] = cfg.checkpoint_path().string();
  return summary;
}

nlohmann::json cmd_eval(const RunConfig& cfg, const CommandOptions& options, const Progress& progress) {
  const LoadedModel loaded = load_for_eval(cfg, options, false);
  const Autoencoder model(loaded.checkpoint.config, loaded.checkpoint.params);
  progress("evaluating " + checkpoint_path(cfg, options).string());
  EvalOptions eval;
  eval.identifiability.max_rows = cfg.eval.identifiability_rows;
  eval.contrast_points = cfg.eval.contrast_points;
  const MetricsReport report = evaluate(model, loaded.scene, loaded.splits.id_test, loaded.splits.ood_test, eval);
  nlohmann::json summary = report;
  summary["seed"] = cfg.seed;
  write_text_file(cfg.out / "metrics.json", dump(summary));
  summary["command"] = "eval";
  return summary;
}

nlohmann::json cmd_heatmap(const RunConfig& cfg, const CommandOptions& options, const Progress& progress) {
  const LoadedModel loaded = load_for_eval(cfg, options, false);
  const Autoencoder model(loaded.checkpoint.config, loaded.checkpoint.params);
  HeatmapOptions hm;
  hm.mode = options.heatmap_mode.value_or(cfg.eval.heatmap_mode);
  hm.resolution = options.heatmap_resolution.value_or(cfg.eval.heatmap_resolution);
  hm.coordinate = loaded.scene.slot_dim - 1;
  progress(std::string("binning test points for the ") + heatmap_mode_name(hm.mode) + " heatmap");
  const HeatmapGrid grid = heatmap_grid(model, loaded.scene, loaded.splits.id_test, loaded.splits.ood_test, hm);

  const std::string stem = std::string("heatmap_") + heatmap_mode_name(hm.mode);
  write_text_file(cfg.out / (stem + ".csv"), heatmap_csv(grid));
  write_text_file(cfg.out / (stem + ".pgm"), heatmap_pgm(grid));

  double max = 0.0;
  std::size_t empty = 0;
  for (double v : grid.values) {
    max = std::max(max, v);
    empty += v < 0.0;
  }
  nlohmann::json summary = {{"seed", cfg.seed},   {"mode", heatmap_mode_name(hm.mode)},
                            {"resolution", hm.resolution}, {"max", max},
                            {"empty_cells", empty},        {"csv", stem + ".csv"},
                            {"pgm", stem + ".pgm"}};
  write_text_file(cfg.out / (stem + ".json"), dump(summary));
  summary["command"] = "heatmap";
  summary["csv"] = (cfg.out / (stem + ".csv")).string();
  summary["pgm"] = (cfg.out / (stem + ".pgm")).string();
  return summary;
}

nlohmann::json generator_theory_report(const RunConfig& cfg) {
  const SceneConfig& scene = cfg.scene;
  const SlotLayout layout{scene.slots, scene.slot_dim};
  const VectorFn g = [&scene](std::span<const double> z) { return render(scene, z); };

  Rng rng(derive_seed(cfg.seed, "theory.points"));
  double max_contrast = 0.0;
  double max_cross = 0.0;
  std::size_t non_compositional = 0;
  std::size_t reducible = 0;
  std::size_t partitions = 0;
  std::vector<double> z(scene.latent_size());
  for (std::size_t i = 0; i < cfg.theory.points; ++i) {
    for (double& v : z) v = rng.uniform();
    const Tensor jac = jacobian_fd(g, z, kContrastStep);
    max_contrast = std::max(max_contrast, contrast_from_jacobian(jac, layout));
    non_compositional += !influence_sets(jac, layout).disjoint();
    IrreducibilityOptions opts;
    opts.random_partitions = cfg.theory.random_partitions;
    opts.exhaustive_small = cfg.theory.exhaustive_partitions;
    opts.seed = derive_seed(cfg.seed, i);
    const IrreducibilityResult irr = irreducibility_from_jacobian(jac, layout, opts);
    reducible += !irr.irreducible;
    partitions += irr.partitions_checked;
    max_cross = std::max(max_cross, hessian_cross_check(g, z, layout));
  }

  Rng ks_rng(derive_seed(cfg.seed, "theory.ks"));
  const std::vector<Latent> band = sample_in_band(scene, cfg.theory.ks_samples, ks_rng);
  double max_ks = 0.0;
  for (std::size_t c = 0; c < scene.latent_size(); ++c) {
    std::vector<double> column;
    column.reserve(band.size());
    for (const Latent& l : band) column.push_back(l.values()[c]);
    max_ks = std::max(max_ks, ks_uniform_distance(std::move(column)));
  }

  return {{"points", cfg.theory.points},
          {"max_contrast", max_contrast},
          {"non_compositional_points", non_compositional},
          {"max_hessian_cross", max_cross},
          {"reducible_points", reducible},
          {"partitions_checked", partitions},
          {"ks_samples", cfg.theory.ks_samples},
          {"max_ks_distance", max_ks}};
}

nlohmann::json cmd_theory_check(const RunConfig& cfg, const CommandOptions& options, const Progress& progress) {
  cfg.validate();
  progress("checking the generator at " + std::to_string(cfg.theory.points) + " latents");
  nlohmann::json report = {{"generator", generator_theory_report(cfg)}};

  const std::filesystem::path ckpt = checkpoint_path(cfg, options);
  const bool use_decoder =
      !options.theory_generator_only && (options.checkpoint.has_value() || std::filesystem::exists(ckpt));
  if (use_decoder) {
    progress("checking the decoder in " + ckpt.string());
    const LoadedModel loaded = load_for_eval(cfg, options, false);
    const Autoencoder model(loaded.checkpoint.config, loaded.checkpoint.params);
    const Tensor codes = first_rows(encode_all(model, observations_tensor(loaded.splits.id_test)),
                                    cfg.eval.contrast_points);
    const SlotLayout layout{model.slots(), model.slot_dim()};
    const VectorFn f = decoder_function(model);
    double max_cross = 0.0;
    std::size_t non_compositional = 0;
    const std::vector<Tensor> jacobians = decoder_jacobians(model, codes);
    for (std::size_t i = 0; i < codes.dim(0); ++i) {
      max_cross = std::max(max_cross, hessian_cross_check(f, codes.data().subspan(i * layout.inputs(), layout.inputs()),
                                                          layout));
      non_compositional += !influence_sets(jacobians[i], layout).disjoint();
    }
    const IsolatedDecoderResult iso_id = isolated_decoder_error(model, loaded.scene, loaded.splits.id_test);
    const IsolatedDecoderResult iso_ood = isolated_decoder_error(model, loaded.scene, loaded.splits.ood_test);
    // Stored relative to the output directory.
    const std::filesystem::path relative = ckpt.lexically_relative(cfg.out);
    report["decoder"] = {{"checkpoint", relative.empty() ? ckpt.string() : relative.generic_string()},
                         {"decoder", decoder_name(loaded.checkpoint.config.decoder)},
                         {"points", codes.dim(0)},
                         {"mean_contrast", decoder_contrast(model, codes)},
                         {"non_compositional_points", non_compositional},
                         {"max_hessian_cross", max_cross},
                         {"isolated_id", iso_id.mean},
                         {"isolated_ood", iso_ood.mean}};
  }
  report["seed"] = cfg.seed;
  write_text_file(cfg.out / "theory.json", dump(report));
  report["command"] = "theory-check";
  return report;
}

nlohmann::json cmd_ablate(const RunConfig& cfg, const Progress& progress) {
  cfg.validate();
  struct Run {
    DecoderKind decoder;
    double lambda;
    std::uint64_t seed;
    MetricsReport report;
  };
  std::vector<Run> runs;
  for (DecoderKind d : cfg.ablate.decoders) {
    for (double lambda : cfg.ablate.lambdas) {
      for (std::size_t s = 0; s < cfg.ablate.seeds; ++s) runs.push_back({d, lambda, cfg.seed + s, {}});
    }
  }

  std::map<std::uint64_t, DatasetSplits> data;
  for (std::size_t s = 0; s < cfg.ablate.seeds; ++s) {
    RunConfig seeded = cfg;
    seeded.apply_seed(cfg.seed + s);
    progress("generating data for seed " + std::to_string(seeded.seed));
    data.emplace(seeded.seed, generate_datasets(seeded.scene, seeded.counts));
  }

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&]() {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      Run& run = runs[i];
      try {
        RunConfig rc = cfg;
        rc.apply_seed(run.seed);
        rc.model.decoder = run.decoder;
        rc.train.lambda = run.lambda;
        rc.out = cfg.out / "ablate" / run_name(run.decoder, run.lambda, run.seed);
        const DatasetSplits& splits = data.at(run.seed);
        const TrainResult trained = train(rc.model, rc.train, splits.train, splits.id_test);
        save_checkpoint(rc.checkpoint_path(), trained.checkpoint);
        write_text_file(rc.out / "train_log.csv", train_log_csv(trained.log));
        const Autoencoder model(trained.checkpoint.config, trained.checkpoint.params);
        EvalOptions eval;
        eval.identifiability.max_rows = cfg.eval.identifiability_rows;
        eval.contrast_points = cfg.eval.contrast_points;
        run.report = evaluate(model, rc.scene, splits.id_test, splits.ood_test, eval);
        nlohmann::json metrics = run.report;
        metrics["seed"] = run.seed;
        write_text_file(rc.out / "metrics.json", dump(metrics));
        const std::lock_guard<std::mutex> lock(log_mutex);
        progress("finished " + run_name(run.decoder, run.lambda, run.seed));
      } catch (...) {
        const std::lock_guard<std::mutex> lock(log_mutex);
        if (!failure) failure = std::current_exception();
        next = runs.size();
      }
    }
  };
  std::size_t jobs = cfg.ablate.jobs == 0 ? std::max(1U, std::thread::hardware_concurrency()) : cfg.ablate.jobs;
  jobs = std::min(jobs, runs.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  std::string csv = std::string(kAblationHeader) + "\n";
  auto row = [&csv](const std::string& decoder, double lambda, const std::string& seed, const std::vector<double>& v) {
    csv += decoder + ',' + format_double(lambda) + ',' + seed;
    for (double x : v) csv += ',' + format_double(x);
    csv += '\n';
  };
  for (const Run& r : runs) row(decoder_name(r.decoder), r.lambda, std::to_string(r.seed), report_values(r.report));

  nlohmann::json cells = nlohmann::json::array();
  for (DecoderKind d : cfg.ablate.decoders) {
    for (double lambda : cfg.ablate.lambdas) {
      std::vector<std::vector<double>> columns(7);
      for (const Run& r : runs) {
        if (r.decoder != d || r.lambda != lambda) continue;
        const std::vector<double> v = report_values(r.report);
        for (std::size_t c = 0; c < v.size(); ++c) columns[c].push_back(v[c]);
      }
      std::vector<double> med, spread;
      for (const auto& col : columns) {
        med.push_back(median(col));
        spread.push_back(*std::max_element(col.begin(), col.end()) - *std::min_element(col.begin(), col.end()));
      }
      row(decoder_name(d), lambda, "median", med);
      row(decoder_name(d), lambda, "spread", spread);
      cells.push_back({{"decoder", decoder_name(d)},
                       {"lambda", lambda},
                       {"median_id_identifiability", med[0]},
                       {"median_ood_identifiability", med[1]},
                       {"median_ood_reconstruction_r2", med[3]}});
    }
  }
  write_text_file(cfg.out / "ablation.csv", csv);
  return {{"command", "ablate"},
          {"seed", cfg.seed},
          {"runs", runs.size()},
          {"table", (cfg.out / "ablation.csv").string()},
          {"cells", cells}};
}

}  // namespace cgl

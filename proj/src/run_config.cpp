#include "cgl/run_config.hpp"

#include <fstream>
#include <set>

#include "cgl/binary_io.hpp"

namespace cgl {
namespace {

template <typename T>
void read_field(const nlohmann::json& section, const std::string& prefix, const char* key, T& field) {
  if (!section.contains(key)) return;
  try {
    section.at(key).get_to(field);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(prefix + "." + key, e.what());
  }
}

void reject_unknown(const nlohmann::json& section, const std::string& prefix, const std::set<std::string>& known) {
  if (!section.is_object()) throw ConfigError(prefix.empty() ? "config" : prefix, "must be an object");
  for (const auto& item : section.items()) {
    if (known.count(item.key()) == 0) {
      throw ConfigError(prefix.empty() ? item.key() : prefix + "." + item.key(), "unknown key");
    }
  }
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t master) {
  seed = master;
  scene.seed = master;
  model.init_seed = master;
  train.seed = master;
}

void RunConfig::validate() const {
  scene.validate();
  model.validate();
  train.validate();
  if (counts.train == 0) throw ConfigError("data.train", "must be positive");
  if (counts.id_test == 0) throw ConfigError("data.id_test", "must be positive");
  if (counts.ood_test == 0) throw ConfigError("data.ood_test", "must be positive");
  if (model.pixels != scene.pixels) throw ConfigError("model.pixels", "must equal scene.pixels");
  if (model.slots != scene.slots) throw ConfigError("model.slots", "must equal scene.slots");
  if (eval.heatmap_resolution < 8) throw ConfigError("eval.heatmap_resolution", "must be at least 8");
  if (eval.identifiability_rows < 100) throw ConfigError("eval.identifiability_rows", "must be at least 100");
  if (eval.contrast_points == 0) throw ConfigError("eval.contrast_points", "must be positive");
  if (theory.points == 0) throw ConfigError("theory.points", "must be positive");
  if (ablate.decoders.empty()) throw ConfigError("ablate.decoders", "must not be empty");
  if (ablate.lambdas.empty()) throw ConfigError("ablate.lambdas", "must not be empty");
  if (ablate.seeds == 0) throw ConfigError("ablate.seeds", "must be positive");
  if (out.empty()) throw ConfigError("out", "must not be empty");
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json scene = cfg.scene;
  scene.erase("seed");
  nlohmann::json model = cfg.model;
  model.erase("init_seed");
  nlohmann::json train = cfg.train;
  train.erase("seed");
  std::vector<std::string> decoders;
  for (DecoderKind d : cfg.ablate.decoders) decoders.emplace_back(decoder_name(d));
  return nlohmann::json{
      {"seed", cfg.seed},
      {"out", cfg.out.string()},
      {"scene", scene},
      {"data", {{"train", cfg.counts.train}, {"id_test", cfg.counts.id_test}, {"ood_test", cfg.counts.ood_test}}},
      {"model", model},
      {"train", train},
      {"eval",
       {{"identifiability_rows", cfg.eval.identifiability_rows},
        {"contrast_points", cfg.eval.contrast_points},
        {"heatmap_resolution", cfg.eval.heatmap_resolution},
        {"heatmap_mode", heatmap_mode_name(cfg.eval.heatmap_mode)}}},
      {"theory",
       {{"points", cfg.theory.points},
        {"ks_samples", cfg.theory.ks_samples},
        {"random_partitions", cfg.theory.random_partitions},
        {"exhaustive_partitions", cfg.theory.exhaustive_partitions}}},
      {"ablate",
       {{"decoders", decoders}, {"lambdas", cfg.ablate.lambdas}, {"seeds", cfg.ablate.seeds}, {"jobs", cfg.ablate.jobs}}},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  reject_unknown(j, "", {"seed", "out", "scene", "data", "model", "train", "eval", "theory", "ablate"});
  read_field(j, "config", "seed", cfg.seed);
  if (j.contains("out")) {
    std::string out;
    read_field(j, "config", "out", out);
    cfg.out = out;
  }
  if (j.contains("scene")) {
    reject_unknown(j.at("scene"), "scene", {"slots", "slot_dim", "pixels", "half_width", "band", "min_sep", "layout"});
    from_json(j.at("scene"), cfg.scene);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, "data", {"train", "id_test", "ood_test"});
    read_field(d, "data", "train", cfg.counts.train);
    read_field(d, "data", "id_test", cfg.counts.id_test);
    read_field(d, "data", "ood_test", cfg.counts.ood_test);
  }
  if (j.contains("model")) {
    reject_unknown(j.at("model"), "model",
                   {"pixels", "slots", "slot_dim", "encoder_hidden", "decoder_hidden", "decoder", "shared_decoder"});
    from_json(j.at("model"), cfg.model);
  }
  if (j.contains("train")) {
    reject_unknown(j.at("train"), "train",
                   {"epochs", "warmup", "lambda", "batch", "lr", "schedule", "consistency_grad", "contrast_points",
                    "checkpoint_every"});
    from_json(j.at("train"), cfg.train);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown(e, "eval", {"identifiability_rows", "contrast_points", "heatmap_resolution", "heatmap_mode"});
    read_field(e, "eval", "identifiability_rows", cfg.eval.identifiability_rows);
    read_field(e, "eval", "contrast_points", cfg.eval.contrast_points);
    read_field(e, "eval", "heatmap_resolution", cfg.eval.heatmap_resolution);
    if (e.contains("heatmap_mode")) {
      std::string mode;
      read_field(e, "eval", "heatmap_mode", mode);
      cfg.eval.heatmap_mode = parse_heatmap_mode(mode);
    }
  }
  if (j.contains("theory")) {
    const auto& t = j.at("theory");
    reject_unknown(t, "theory", {"points", "ks_samples", "random_partitions", "exhaustive_partitions"});
    read_field(t, "theory", "points", cfg.theory.points);
    read_field(t, "theory", "ks_samples", cfg.theory.ks_samples);
    read_field(t, "theory", "random_partitions", cfg.theory.random_partitions);
    read_field(t, "theory", "exhaustive_partitions", cfg.theory.exhaustive_partitions);
  }
  if (j.contains("ablate")) {
    const auto& a = j.at("ablate");
    reject_unknown(a, "ablate", {"decoders", "lambdas", "seeds", "jobs"});
    if (a.contains("decoders")) {
      std::vector<std::string> names;
      read_field(a, "ablate", "decoders", names);
      cfg.ablate.decoders.clear();
      for (const auto& n : names) cfg.ablate.decoders.push_back(parse_decoder(n));
    }
    read_field(a, "ablate", "lambdas", cfg.ablate.lambdas);
    read_field(a, "ablate", "seeds", cfg.ablate.seeds);
    read_field(a, "ablate", "jobs", cfg.ablate.jobs);
  }
  cfg.apply_seed(cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace cgl

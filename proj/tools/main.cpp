#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltnvae/pipeline.hpp"

using namespace ltnvae;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
};

RunConfig load_with_overrides(const GlobalOpts& g) {
  if (g.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = RunConfig::load(g.config_path);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.seed_set) {
    cfg.seed = g.seed;
    cfg.training.seed = g.seed;
  }
  if (g.deterministic) cfg.deterministic = true;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Logic-constrained VAE training and per-factor OOD reasoning"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "run configuration file (JSON)");
  app.add_option("--out-dir", g.out_dir, "override the output directory");
  auto* seed_opt = app.add_option("--seed", g.seed, "override the global seed");
  app.add_flag("--deterministic", g.deterministic,
               "single-threaded, bit-reproducible execution");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  auto* train_cmd = app.add_subcommand("train", "train the model on the dataset");
  auto* calib = app.add_subcommand("calibrate", "fit per-factor OOD reasoners");
  auto* eval = app.add_subcommand("evaluate", "AUROC + mutual-information report");
  auto* reason = app.add_subcommand("reason", "score images against reasoners");

  std::string checkpoint;
  train_cmd->add_option("--checkpoint", checkpoint, "checkpoint stem (default <out>/checkpoint)");
  calib->add_option("--checkpoint", checkpoint, "checkpoint stem");
  eval->add_option("--checkpoint", checkpoint, "checkpoint stem");
  reason->add_option("--checkpoint", checkpoint, "checkpoint stem");

  std::vector<std::string> reasoner_files;
  eval->add_option("--reasoner", reasoner_files, "reasoner model file (repeatable)");
  reason->add_option("--reasoner", reasoner_files, "reasoner model file (repeatable)");

  std::vector<std::string> images;
  reason->add_option("images", images, "image files or directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      RunConfig cfg = load_with_overrides(g);
      auto res = run_gen_data(cfg);
      std::cout << "dataset: " << res.dir << "\nmanifest digest: " << res.manifest_digest
                << "\n";
      return 0;
    }
    if (train_cmd->parsed()) {
      RunConfig cfg = load_with_overrides(g);
      auto art = run_train(cfg);
      std::cout << "checkpoint: " << art.checkpoint_stem << ".ckpt\nhistory: "
                << art.history_path << "\nbest epoch: " << art.best_epoch << "\n";
      if (art.diverged) {
        std::cerr << "training diverged; last good checkpoint kept\n";
        return 2;
      }
      if (!art.history.empty()) {
        const auto& last = art.history.back().mean;
        std::cout << "final total: " << last.total << " (recloss " << last.recloss
                  << ", regloss " << last.regloss << ")\n";
      }
      return 0;
    }
    if (calib->parsed()) {
      RunConfig cfg = load_with_overrides(g);
      std::string stem = checkpoint.empty() ? cfg.out_dir + "/checkpoint" : checkpoint;
      auto paths = run_calibrate(cfg, stem);
      for (const auto& p : paths) std::cout << "reasoner: " << p << "\n";
      return 0;
    }
    if (eval->parsed()) {
      RunConfig cfg = load_with_overrides(g);
      std::string stem = checkpoint.empty() ? cfg.out_dir + "/checkpoint" : checkpoint;
      if (reasoner_files.empty())
        for (const auto& f : cfg.factors)
          reasoner_files.push_back(cfg.out_dir + "/reasoner_" + f.name + ".json");
      auto res = run_evaluate(cfg, stem, reasoner_files);
      for (auto& [factor, entry] : res.summary.at("auroc").items())
        std::cout << "auroc[" << factor << "] = " << entry.at("auroc").get<double>()
                  << "\n";
      for (auto& [factor, entry] : res.summary.at("mutual_information").items())
        std::cout << "mi[" << factor << "]: top dim " << entry.at("top_dim").get<int>()
                  << " (" << entry.at("top_mi").get<double>() << " nats), expected "
                  << entry.at("expected_dim").get<int>() << "\n";
      std::cout << "summary: " << res.summary_path << "\n";
      return 0;
    }
    if (reason->parsed()) {
      std::string stem = checkpoint;
      if (stem.empty()) {
        RunConfig cfg = load_with_overrides(g);
        stem = cfg.out_dir + "/checkpoint";
        if (reasoner_files.empty())
          for (const auto& f : cfg.factors)
            reasoner_files.push_back(cfg.out_dir + "/reasoner_" + f.name + ".json");
      }
      run_reason(stem, reasoner_files, images, std::cout);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

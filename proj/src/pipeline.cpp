#include "ltnvae/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "ltnvae/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ltnvae {

GenDataResult run_gen_data(const RunConfig& cfg) {
  Dataset ds = generate_synthetic(cfg.generator, cfg.seed);
  std::string dir = cfg.resolved_dataset_dir();
  write_dataset(ds, dir);
  return {dir, manifest_digest_of(dir)};
}

namespace {

json rules_meta(const RuleSet& rules) {
  json jf = json::array();
  for (const auto& f : rules.factors) {
    json pairs = json::array();
    for (const auto& [a, b] : f.pairs) pairs.push_back({key_str(a), key_str(b)});
    jf.push_back({{"name", f.name}, {"dims", f.dims}, {"pairs", pairs}});
  }
  return jf;
}

template <typename T>
TrainArtifacts train_impl(const RunConfig& cfg) {
  Dataset ds = load_dataset(cfg.resolved_dataset_dir());
  auto factors = cfg.bind_factors(ds.factors);
  auto parts = build_partitions(ds.samples, factors, "train");
  RuleSet rules = RuleSet::build(parts, cfg.arch.latent, cfg.weights,
                                 logic::AggregatorConfig(cfg.aggregator_p),
                                 cfg.normalize_per_partition);
  TrainingConfig tc = cfg.training;
  tc.seed = cfg.seed;

  auto outcome = train<T>(ds.samples, parts, cfg.arch, rules, tc);

  fs::create_directories(cfg.out_dir);
  TrainArtifacts art;
  art.checkpoint_stem = cfg.out_dir + "/checkpoint";
  art.history_path = cfg.out_dir + "/history.csv";
  art.history = outcome.history;
  art.best_epoch = outcome.best_epoch;
  art.diverged = outcome.diverged;

  std::ofstream hist(art.history_path);
  if (!hist) throw IoError("cannot write " + art.history_path);
  hist << "epoch";
  if (!outcome.history.empty())
    for (const auto& c : outcome.history.front().mean.column_names()) hist << "," << c;
  else
    for (const auto& c : LossBreakdown{}.column_names()) hist << "," << c;
  hist << ",val_total\n";
  hist << std::setprecision(10);
  for (const auto& rec : outcome.history) {
    hist << rec.epoch;
    for (double v : rec.mean.column_values()) hist << "," << v;
    hist << "," << rec.val_total << "\n";
  }

  json meta{{"seed", cfg.seed},
            {"config_digest", cfg.digest()},
            {"manifest_digest", ds.manifest_digest},
            {"training", {{"epochs", tc.epochs},
                          {"batch", tc.batch},
                          {"lr", tc.lr},
                          {"numeric", tc.numeric},
                          {"best_epoch", outcome.best_epoch},
                          {"diverged", outcome.diverged}}},
            {"rules", rules_meta(rules)}};
  save_checkpoint(art.checkpoint_stem, outcome.model, meta);
  return art;
}

}  // namespace

TrainArtifacts run_train(const RunConfig& cfg) {
  if (cfg.training.numeric == "float64") return train_impl<double>(cfg);
  return train_impl<float>(cfg);
}

std::vector<LatentCode> encode_samples(VaeModel<double>& model,
                                       const std::vector<Sample>& samples,
                                       const std::vector<std::size_t>& indices) {
  std::vector<LatentCode> codes;
  codes.reserve(indices.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t at = 0; at < indices.size(); at += kChunk) {
    std::vector<const ImageTensor*> batch;
    for (std::size_t i = at; i < std::min(at + kChunk, indices.size()); ++i)
      batch.push_back(&samples[indices[i]].image);
    auto part = model.encode(batch);
    codes.insert(codes.end(), part.begin(), part.end());
  }
  return codes;
}

std::vector<std::string> run_calibrate(const RunConfig& cfg,
                                       const std::string& checkpoint_stem) {
  Dataset ds = load_dataset(cfg.resolved_dataset_dir());
  auto calib = ds.split_indices("calib");
  if (calib.empty())
    throw ConfigError("calibration split missing from dataset " +
                      cfg.resolved_dataset_dir());
  auto model = load_checkpoint_as_double(checkpoint_stem);
  auto factors = cfg.bind_factors(ds.factors);
  auto codes = encode_samples(model, ds.samples, calib);

  fs::create_directories(cfg.out_dir);
  std::vector<std::string> paths;
  for (const auto& f : factors) {
    ReasonerModel m = calibrate(codes, f, cfg.quantile_pct, cfg.seed, ds.manifest_digest);
    std::string path = cfg.out_dir + "/reasoner_" + f.name + ".json";
    m.save(path);
    paths.push_back(path);
  }
  return paths;
}

namespace {

int value_index(const FactorSpec& f, const std::vector<std::string>& all_values,
                const std::string& v) {
  for (std::size_t i = 0; i < all_values.size(); ++i)
    if (all_values[i] == v) return static_cast<int>(i);
  return -1;
}

}  // namespace

EvalResult run_evaluate(const RunConfig& cfg, const std::string& checkpoint_stem,
                        const std::vector<std::string>& reasoner_paths) {
  Dataset ds = load_dataset(cfg.resolved_dataset_dir());
  auto model = load_checkpoint_as_double(checkpoint_stem);
  auto factors = cfg.bind_factors(ds.factors);

  std::vector<ReasonerModel> reasoners;
  for (const auto& p : reasoner_paths) reasoners.push_back(ReasonerModel::load(p));
  auto reasoner_for = [&](const std::string& factor) -> const ReasonerModel& {
    for (const auto& r : reasoners)
      if (r.factor == factor) return r;
    throw ConfigError("no reasoner file provided for factor '" + factor + "'");
  };

  fs::create_directories(cfg.out_dir);
  json summary;
  summary["config_digest"] = cfg.digest();
  summary["manifest_digest"] = ds.manifest_digest;
  summary["checkpoint"] = checkpoint_stem;
  json warnings = json::array();

  // Per-factor AUROC over that factor's test split.
  json aurocs;
  for (const auto& f : factors) {
    auto idx = ds.split_indices("test_" + f.name);
    if (idx.empty()) throw ConfigError("empty test split for factor '" + f.name + "'");
    auto codes = encode_samples(model, ds.samples, idx);
    const auto& rm = reasoner_for(f.name);
    ScoredSet scored;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      scored.scores.push_back(rm.score(codes[i]));
      const std::string& v = ds.samples[idx[i]].assignment.at(f.name);
      scored.labels.push_back(f.is_observed(v) ? 0 : 1);
    }
    std::size_t pos = 0;
    for (int l : scored.labels) pos += static_cast<std::size_t>(l);
    if (pos * 2 != scored.labels.size())
      warnings.push_back("test split for factor '" + f.name + "' is unbalanced: " +
                         std::to_string(pos) + " OOD of " +
                         std::to_string(scored.labels.size()));
    aurocs[f.name] = {{"auroc", auroc(scored)},
                      {"samples", scored.labels.size()},
                      {"ood", pos},
                      {"tau", rm.tau}};
  }
  summary["auroc"] = aurocs;

  // Mutual-information report over the training split.
  auto train_idx = ds.split_indices("train");
  if (train_idx.empty()) throw ConfigError("dataset has no train split");
  auto train_codes = encode_samples(model, ds.samples, train_idx);
  std::vector<std::vector<double>> mu;
  mu.reserve(train_codes.size());
  for (const auto& c : train_codes) mu.push_back(c.mu);

  std::vector<FactorColumn> cols;
  for (const auto& f : factors) {
    FactorColumn fc;
    fc.factor = f.name;
    fc.expected_dim = static_cast<int>(f.dims.front());
    for (auto si : train_idx) {
      int id = value_index(f, f.observed, ds.samples[si].assignment.at(f.name));
      if (id < 0) throw ConfigError("train sample with unobserved value for " + f.name);
      fc.label_ids.push_back(id);
    }
    cols.push_back(std::move(fc));
  }
  MIReport mi = mi_report(mu, cols, cfg.mi_bins);

  EvalResult res;
  res.mi_csv_path = cfg.out_dir + "/mi_report.csv";
  std::ofstream micsv(res.mi_csv_path);
  micsv << "factor,expected_dim,rank,dim,mi_nats\n" << std::setprecision(10);
  json jmi;
  for (const auto& e : mi.factors) {
    for (std::size_t r = 0; r < e.ranked.size(); ++r)
      micsv << e.factor << "," << e.expected_dim << "," << r << "," << e.ranked[r].first
            << "," << e.ranked[r].second << "\n";
    jmi[e.factor] = {{"expected_dim", e.expected_dim},
                     {"top_dim", e.top_dim},
                     {"top_mi", e.top_mi},
                     {"second_dim", e.second_dim},
                     {"second_mi", e.second_mi},
                     {"expected_is_top", e.expected_is_top}};
  }
  summary["mutual_information"] = jmi;

  // Latent export: one row per sample over every split.
  res.latents_path = cfg.out_dir + "/latents.csv";
  {
    std::vector<std::size_t> all(ds.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto codes = encode_samples(model, ds.samples, all);
    std::ofstream lcsv(res.latents_path);
    lcsv << "path,split";
    for (const auto& f : factors) lcsv << "," << f.name;
    for (int d = 0; d < cfg.arch.latent; ++d) lcsv << ",mu" << d;
    for (int d = 0; d < cfg.arch.latent; ++d) lcsv << ",lg" << d;
    lcsv << "\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const auto& s = ds.samples[i];
      lcsv << s.path << "," << s.split;
      for (const auto& f : factors) lcsv << "," << s.assignment.at(f.name);
      for (double v : codes[i].mu) {
        std::snprintf(buf, sizeof buf, ",%.9g", v);
        lcsv << buf;
      }
      for (double v : codes[i].logvar) {
        std::snprintf(buf, sizeof buf, ",%.9g", v);
        lcsv << buf;
      }
      lcsv << "\n";
    }
  }

  // Optional scatter of two latent dims per factor, colored by value id.
  if (cfg.scatter_dims.size() == 2) {
    for (const auto& f : factors) {
      auto idx = ds.split_indices("test_" + f.name);
      auto codes = encode_samples(model, ds.samples, idx);
      std::vector<double> xs, ys;
      std::vector<int> cat;
      std::vector<std::string> names;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        xs.push_back(codes[i].mu[static_cast<std::size_t>(cfg.scatter_dims[0])]);
        ys.push_back(codes[i].mu[static_cast<std::size_t>(cfg.scatter_dims[1])]);
        const std::string& v = ds.samples[idx[i]].assignment.at(f.name);
        auto it = std::find(names.begin(), names.end(), v);
        if (it == names.end()) {
          names.push_back(v);
          cat.push_back(static_cast<int>(names.size()) - 1);
        } else {
          cat.push_back(static_cast<int>(it - names.begin()));
        }
      }
      std::string path = cfg.out_dir + "/scatter_" + f.name + ".svg";
      write_scatter_svg(path, xs, ys, cat, names,
                        "dims " + std::to_string(cfg.scatter_dims[0]) + "/" +
                            std::to_string(cfg.scatter_dims[1]) + " by " + f.name);
      summary["scatter"][f.name] = path;
    }
  }

  summary["warnings"] = warnings;
  res.summary = summary;
  res.summary_path = cfg.out_dir + "/metrics.json";
  std::ofstream js(res.summary_path);
  js << summary.dump(2) << "\n";
  return res;
}

void run_reason(const std::string& checkpoint_stem,
                const std::vector<std::string>& reasoner_paths,
                const std::vector<std::string>& image_paths, std::ostream& out) {
  auto model = load_checkpoint_as_double(checkpoint_stem);
  std::vector<ReasonerModel> reasoners;
  for (const auto& p : reasoner_paths) reasoners.push_back(ReasonerModel::load(p));
  if (reasoners.empty()) throw ConfigError("reason: no reasoner files given");

  // Directories expand to their raster files, sorted for stable output.
  std::vector<std::string> files;
  for (const auto& p : image_paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> inner;
      for (const auto& e : fs::directory_iterator(p)) {
        auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm"))
          inner.push_back(e.path().string());
      }
      std::sort(inner.begin(), inner.end());
      files.insert(files.end(), inner.begin(), inner.end());
    } else {
      files.push_back(p);
    }
  }

  char buf[128];
  for (const auto& f : files) {
    LatentCode code;
    try {
      ImageTensor img = read_raster(f);
      code = model.encode_one(img);
    } catch (const std::exception& e) {
      out << f << "\terror\t" << e.what() << "\n";
      continue;
    }
    for (const auto& r : reasoners) {
      auto [flag, density] = r.is_ood(code);
      std::snprintf(buf, sizeof buf, "%.6g\ttau=%.6g", density, r.tau);
      out << f << "\t" << r.factor << "\tdensity=" << buf << "\tood="
          << (flag ? 1 : 0) << "\n";
    }
  }
}

}  // namespace ltnvae

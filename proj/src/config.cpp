#include "ltnvae/config.hpp"

#include <fstream>

using nlohmann::json;

namespace ltnvae {

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.deterministic = j.value("deterministic", false);

    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      c.dataset_dir = d.value("dir", std::string{});
      if (d.contains("generator"))
        c.generator = SyntheticConfig::from_json(d.at("generator").dump());
    }

    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.arch.height = m.value("height", c.arch.height);
      c.arch.width = m.value("width", c.arch.width);
      c.arch.channels = m.value("channels", c.arch.channels);
      c.arch.conv_depths = m.value("conv_depths", c.arch.conv_depths);
      c.arch.dense_widths = m.value("dense_widths", c.arch.dense_widths);
      c.arch.latent = m.value("latent", c.arch.latent);
      c.arch.kernel = m.value("kernel", c.arch.kernel);
    }

    if (j.contains("rules")) {
      const auto& r = j.at("rules");
      if (r.contains("factors")) {
        c.factors.clear();
        for (const auto& jf : r.at("factors"))
          c.factors.push_back({jf.at("name").get<std::string>(),
                               jf.at("dims").get<DimSet>()});
      }
      if (r.contains("weights")) {
        const auto& w = r.at("weights");
        c.weights.rec = w.value("rec", 1.0);
        c.weights.reg = w.value("reg", 1.0);
        c.weights.adapt = w.value("adapt", 1.0);
        c.weights.iso = w.value("iso", 1.0);
      }
      c.aggregator_p = r.value("aggregator_p", c.aggregator_p);
      c.normalize_per_partition =
          r.value("normalize_per_partition", c.normalize_per_partition);
    }

    if (j.contains("training")) {
      const auto& t = j.at("training");
      c.training.epochs = t.value("epochs", c.training.epochs);
      c.training.batch = t.value("batch", c.training.batch);
      c.training.lr = t.value("lr", c.training.lr);
      c.training.val_fraction = t.value("val_fraction", c.training.val_fraction);
      c.training.patience = t.value("patience", c.training.patience);
      c.training.min_epochs = t.value("min_epochs", c.training.min_epochs);
      c.training.numeric = t.value("numeric", c.training.numeric);
    }

    if (j.contains("reasoner"))
      c.quantile_pct = j.at("reasoner").value("quantile_pct", c.quantile_pct);

    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      c.mi_bins = e.value("mi_bins", c.mi_bins);
      c.scatter_dims = e.value("scatter_dims", c.scatter_dims);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.training.seed = c.seed;
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json jf = json::array();
  for (const auto& f : factors) jf.push_back({{"name", f.name}, {"dims", f.dims}});
  return json{
      {"seed", seed},
      {"out_dir", out_dir},
      {"deterministic", deterministic},
      {"dataset", {{"dir", resolved_dataset_dir()},
                   {"generator", json::parse(generator.to_json())}}},
      {"model", {{"height", arch.height},
                 {"width", arch.width},
                 {"channels", arch.channels},
                 {"conv_depths", arch.conv_depths},
                 {"dense_widths", arch.dense_widths},
                 {"latent", arch.latent},
                 {"kernel", arch.kernel}}},
      {"rules", {{"factors", jf},
                 {"weights", {{"rec", weights.rec},
                              {"reg", weights.reg},
                              {"adapt", weights.adapt},
                              {"iso", weights.iso}}},
                 {"aggregator_p", aggregator_p},
                 {"normalize_per_partition", normalize_per_partition}}},
      {"training", {{"epochs", training.epochs},
                    {"batch", training.batch},
                    {"lr", training.lr},
                    {"val_fraction", training.val_fraction},
                    {"patience", training.patience},
                    {"min_epochs", training.min_epochs},
                    {"numeric", training.numeric}}},
      {"reasoner", {{"quantile_pct", quantile_pct}}},
      {"eval", {{"mi_bins", mi_bins}, {"scatter_dims", scatter_dims}}}};
}

void RunConfig::validate() const {
  generator.validate();
  arch.validate();
  training.validate();
  logic::AggregatorConfig check_p(aggregator_p);
  if (factors.empty()) throw ConfigError("rules: at least one factor required");
  std::vector<bool> used(static_cast<std::size_t>(arch.latent), false);
  std::int64_t reserved = 0;
  for (const auto& f : factors) {
    if (f.dims.empty())
      throw ConfigError("rules: factor '" + f.name + "' needs reserved dims");
    for (auto d : f.dims) {
      if (d < 0 || d >= arch.latent)
        throw ConfigError("rules: reserved dim " + std::to_string(d) +
                          " out of range for latent size " + std::to_string(arch.latent));
      if (used[static_cast<std::size_t>(d)])
        throw ConfigError("rules: dim " + std::to_string(d) + " reserved twice");
      used[static_cast<std::size_t>(d)] = true;
      ++reserved;
    }
  }
  if (reserved + 1 > arch.latent)
    throw ConfigError("model: latent size must exceed reserved dims by at least 1");
  if (quantile_pct < 0 || quantile_pct > 100)
    throw ConfigError("reasoner: quantile_pct must be in [0,100]");
  if (mi_bins < 2) throw ConfigError("eval: mi_bins must be >= 2");
  for (auto d : scatter_dims)
    if (d < 0 || d >= arch.latent)
      throw ConfigError("eval: scatter dim out of range");
}

std::string RunConfig::digest() const { return to_hex(fnv1a64(to_json().dump())); }

std::vector<FactorSpec> RunConfig::bind_factors(
    const std::vector<FactorSpec>& declared) const {
  std::vector<FactorSpec> out = declared;
  for (auto& f : out) {
    bool found = false;
    for (const auto& cf : factors)
      if (cf.name == f.name) {
        f.dims = cf.dims;
        found = true;
        break;
      }
    if (!found)
      throw ConfigError("rules: dataset factor '" + f.name +
                        "' has no dim assignment in the config");
  }
  return out;
}

}  // namespace ltnvae

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltnvae/nn.hpp"
#include "ltnvae/rules.hpp"
#include "ltnvae/synthetic.hpp"
#include "ltnvae/trainer.hpp"

namespace ltnvae {

// One structured config file drives every command; CLI flags override
// individual keys. Validation happens before any work starts so a bad config
// never leaves partial outputs behind.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string dataset_dir;  // defaults to <out_dir>/dataset
  bool deterministic = false;

  SyntheticConfig generator;
  ArchitectureConfig arch;

  struct FactorCfg {
    std::string name;
    DimSet dims;
  };
  std::vector<FactorCfg> factors = {{"streak", {3}}, {"scene", {6}}};
  RuleWeights weights;
  double aggregator_p = 2.0;
  bool normalize_per_partition = false;

  TrainingConfig training;
  double quantile_pct = 5.0;
  int mi_bins = 20;
  DimSet scatter_dims;

  static RunConfig load(const std::string& path);
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  // Stable digest of the canonical JSON form; stamped into every artifact.
  std::string digest() const;

  std::string resolved_dataset_dir() const {
    return dataset_dir.empty() ? out_dir + "/dataset" : dataset_dir;
  }

  // Dataset factor specs with the configured latent dims attached.
  std::vector<FactorSpec> bind_factors(const std::vector<FactorSpec>& declared) const;
};

}  // namespace ltnvae

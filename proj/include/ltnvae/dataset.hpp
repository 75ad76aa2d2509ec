#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ltnvae/image.hpp"
#include "ltnvae/rng.hpp"
#include "ltnvae/vae.hpp"

namespace ltnvae {

// One observed generative factor: its name, the value ids seen in the
// in-distribution data (ordered), and the latent dimensions reserved for it.
struct FactorSpec {
  std::string name;
  std::vector<std::string> observed;
  DimSet dims;

  bool is_observed(const std::string& value) const {
    for (const auto& v : observed)
      if (v == value) return true;
    return false;
  }
};

struct Sample {
  std::string path;  // unique id: file path relative to the dataset root
  std::map<std::string, std::string> assignment;
  std::string split;  // "train", "calib", "test_<factor>"
  ImageTensor image;
};

// One value id per declared factor, in factor declaration order.
using PartitionKey = std::vector<std::string>;

std::string key_str(const PartitionKey& key);

struct PartitionedDataset {
  std::vector<FactorSpec> factors;
  // Sorted keys give every consumer a deterministic partition order.
  std::map<PartitionKey, std::vector<std::size_t>> partitions;

  std::size_t factor_index(const std::string& name) const;
};

// Groups samples by their full factor-value tuple. Samples are addressed by
// index into `samples`; empty groups are simply absent. Samples carrying a
// value id that is not declared as observed are rejected by name.
PartitionedDataset build_partitions(const std::vector<Sample>& samples,
                                    const std::vector<FactorSpec>& factors,
                                    const std::string& split_filter = "");

// All unordered pairs of present partitions that agree on every coordinate
// except `factor` (the set V_f). Lexicographic output order; each returned
// pair is verified to differ in exactly one coordinate.
std::vector<std::pair<PartitionKey, PartitionKey>> pair_set(
    const PartitionedDataset& ds, const std::string& factor);

// Bin index of a continuous factor value under sorted edges; half-open bins
// [e_i, e_{i+1}) with the last bin closed. nullopt when the value falls
// outside [e_0, e_last].
std::optional<std::size_t> discretize_factor(double value,
                                             const std::vector<double>& edges);

// Aligned cross-partition mini-batches: per epoch each partition is shuffled
// independently and tuple i takes the i-th element of each shuffled
// partition, so the pairing across partitions is random per epoch.
class TupleStream {
 public:
  TupleStream(const PartitionedDataset& ds, std::size_t batch, std::uint64_t seed);

  // Batches for one epoch; deterministic in (seed, epoch).
  // Each batch holds one index list of length `batch` per partition,
  // ordered like partition_keys().
  std::vector<std::vector<std::vector<std::size_t>>> epoch(int epoch_index) const;

  const std::vector<PartitionKey>& partition_keys() const { return keys_; }
  std::size_t batches_per_epoch() const { return min_size_ / batch_; }

 private:
  std::vector<PartitionKey> keys_;
  std::vector<std::vector<std::size_t>> pools_;
  std::size_t batch_;
  std::size_t min_size_;
  std::uint64_t seed_;
};

// A dataset with provenance: factor declarations, samples grouped by split,
// and the manifest digest/config the samples were produced from.
struct Dataset {
  std::vector<FactorSpec> factors;
  std::vector<Sample> samples;
  std::string generator_config_json;  // provenance header, verbatim
  std::uint64_t seed = 0;
  std::string manifest_digest;

  std::vector<std::size_t> split_indices(const std::string& split) const;
};

// Directory layout: <dir>/manifest.csv + <dir>/imgs/<split>/*.pgm.
// The manifest embeds the generator config and seed as header comments.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Digest of an existing manifest file (hex FNV-1a64).
std::string manifest_digest_of(const std::string& dir);

}  // namespace ltnvae

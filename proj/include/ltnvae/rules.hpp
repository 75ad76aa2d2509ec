#pragma once

#include <string>
#include <vector>

#include "ltnvae/dataset.hpp"
#include "ltnvae/real_logic.hpp"
#include "ltnvae/vae.hpp"

namespace ltnvae {

// Relative weights of the four rule families before normalization. The
// default (all 1) reproduces the uniform 1/(2+2|F|) average; setting the
// adapt/iso weights to 0 ablates the disentanglement constraints.
struct RuleWeights {
  double rec = 1.0;
  double reg = 1.0;
  double adapt = 1.0;
  double iso = 1.0;
};

// Compiled rule structure for one training setup: the partition order every
// batch follows, each factor's reserved dims and differ-in-one pair list,
// and the normalized per-component weights (they sum to 1).
struct RuleSet {
  struct Factor {
    std::string name;
    DimSet dims;
    DimSet complement;
    std::vector<std::pair<std::size_t, std::size_t>> pair_indices;  // into partitions
    std::vector<std::pair<PartitionKey, PartitionKey>> pairs;       // V_f
  };

  std::vector<PartitionKey> partitions;  // sorted key order
  std::vector<Factor> factors;
  logic::AggregatorConfig agg;
  double w_rec = 0, w_reg = 0;
  std::vector<double> w_adapt, w_iso;  // aligned with factors
  bool normalize_per_partition = false;
  int latent = 0;

  static RuleSet build(const PartitionedDataset& ds, int latent,
                       const RuleWeights& weights = {},
                       const logic::AggregatorConfig& agg = {},
                       bool normalize_per_partition = false);

  double weight_sum() const {
    double s = w_rec + w_reg;
    for (double w : w_adapt) s += w;
    for (double w : w_iso) s += w;
    return s;
  }
};

// Per-rule satisfaction values for one batch; all in [0,1]. `total` is the
// weighted mean of the components (recomputed in double so the identity
// holds to 1e-10 regardless of the training dtype).
struct LossBreakdown {
  double recloss = 0;
  double regloss = 0;
  std::vector<std::pair<std::string, double>> adapt;
  std::vector<std::pair<std::string, double>> iso;
  double total = 0;

  double recompose(const RuleSet& rules) const {
    double s = rules.w_rec * recloss + rules.w_reg * regloss;
    for (std::size_t f = 0; f < adapt.size(); ++f) s += rules.w_adapt[f] * adapt[f].second;
    for (std::size_t f = 0; f < iso.size(); ++f) s += rules.w_iso[f] * iso[f].second;
    return s;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out = {"recloss", "regloss"};
    for (const auto& [n, v] : adapt) out.push_back("adapt_" + n);
    for (const auto& [n, v] : iso) out.push_back("iso_" + n);
    out.push_back("total");
    return out;
  }
  std::vector<double> column_values() const {
    std::vector<double> out = {recloss, regloss};
    for (const auto& [n, v] : adapt) out.push_back(v);
    for (const auto& [n, v] : iso) out.push_back(v);
    out.push_back(total);
    return out;
  }
};

inline RuleSet RuleSet::build(const PartitionedDataset& ds, int latent,
                              const RuleWeights& weights,
                              const logic::AggregatorConfig& agg,
                              bool normalize_per_partition) {
  RuleSet rs;
  rs.agg = agg;
  rs.latent = latent;
  rs.normalize_per_partition = normalize_per_partition;
  for (const auto& [k, idx] : ds.partitions) rs.partitions.push_back(k);
  if (rs.partitions.empty()) throw ConfigError("rules: dataset has no partitions");

  auto index_of = [&](const PartitionKey& k) {
    for (std::size_t i = 0; i < rs.partitions.size(); ++i)
      if (rs.partitions[i] == k) return i;
    throw ContractError("rules: partition key not found");
  };

  std::vector<bool> dim_used(static_cast<std::size_t>(latent), false);
  std::int64_t reserved = 0;
  for (const auto& f : ds.factors) {
    Factor fr;
    fr.name = f.name;
    fr.dims = f.dims;
    if (fr.dims.empty())
      throw ConfigError("rules: factor '" + f.name + "' has no reserved latent dims");
    for (auto d : fr.dims) {
      if (d < 0 || d >= latent)
        throw ConfigError("rules: reserved dim " + std::to_string(d) +
                          " out of range for latent size " + std::to_string(latent));
      if (dim_used[static_cast<std::size_t>(d)])
        throw ConfigError("rules: latent dim " + std::to_string(d) +
                          " reserved by more than one factor");
      dim_used[static_cast<std::size_t>(d)] = true;
      ++reserved;
    }
    fr.complement = complement_dims(fr.dims, latent);
    fr.pairs = pair_set(ds, f.name);
    if (fr.pairs.empty())
      throw ConfigError("rules: factor '" + f.name +
                        "' has no differ-in-one partition pairs (needs >= 2 observed values)");
    for (const auto& [a, b] : fr.pairs)
      fr.pair_indices.emplace_back(index_of(a), index_of(b));
    rs.factors.push_back(std::move(fr));
  }
  if (reserved + 1 > latent)
    throw ConfigError("rules: latent size must exceed the number of reserved dims");

  double raw = 0.0;
  std::vector<double> comps;
  comps.push_back(weights.rec);
  comps.push_back(weights.reg);
  for (std::size_t i = 0; i < rs.factors.size(); ++i) {
    comps.push_back(weights.adapt);
    comps.push_back(weights.iso);
  }
  for (double w : comps) {
    if (w < 0) throw ConfigError("rules: negative rule weight");
    raw += w;
  }
  if (raw <= 0) throw ConfigError("rules: all rule weights are zero");
  rs.w_rec = weights.rec / raw;
  rs.w_reg = weights.reg / raw;
  for (std::size_t i = 0; i < rs.factors.size(); ++i) {
    rs.w_adapt.push_back(weights.adapt / raw);
    rs.w_iso.push_back(weights.iso / raw);
  }
  return rs;
}

// ---- rule combinators over graph nodes ----
// These take raw (unnormalized, nonnegative) predicate row vectors and apply
// the batch normalization + quantifier structure. They are the unit-testable
// core; build_rule_graph below wires them to the encoder/decoder.

// Rec/Reg shape: normalize raw values (pooled across the concatenated batch
// by default), forall within each partition, exists across partitions.
template <typename T>
Var<T> partition_rule(Graph<T>& g, const std::vector<Var<T>>& raw_per_partition,
                      const logic::AggregatorConfig& agg, bool per_partition_norm) {
  if (raw_per_partition.empty()) throw ContractError("partition_rule: no partitions");
  std::vector<Var<T>> truths;
  if (per_partition_norm) {
    for (auto raw : raw_per_partition) truths.push_back(logic::batch_normalize(raw));
  } else {
    Var<T> pooled = logic::batch_normalize(g.concat0(raw_per_partition));
    std::int64_t off = 0;
    for (auto raw : raw_per_partition) {
      std::int64_t len = raw.value().numel();
      truths.push_back(g.slice0(pooled, off, len));
      off += len;
    }
  }
  std::vector<Var<T>> per_partition;
  for (auto t : truths) per_partition.push_back(logic::forall(t, agg));
  return logic::exists(g.concat0(per_partition), agg);
}

// Adapt/Iso shape: normalize raw KLT values pooled across all pairs of the
// factor, forall within each pair, optional negation, then conjunction
// (product t-norm) across pairs. Pooling across pairs keeps a factor whose
// pairs all look alike from scoring as adapted through a degenerate min-max.
template <typename T>
Var<T> pair_rule(Graph<T>& g, const std::vector<Var<T>>& raw_per_pair,
                 const logic::AggregatorConfig& agg, bool negate_after_forall) {
  if (raw_per_pair.empty()) throw ContractError("pair_rule: no pairs");
  Var<T> pooled = logic::batch_normalize(g.concat0(raw_per_pair));
  std::vector<Var<T>> per_pair;
  std::int64_t off = 0;
  for (auto raw : raw_per_pair) {
    std::int64_t len = raw.value().numel();
    Var<T> t = logic::forall(g.slice0(pooled, off, len), agg);
    off += len;
    per_pair.push_back(negate_after_forall ? logic::negate(t) : t);
  }
  Var<T> acc = per_pair[0];
  for (std::size_t i = 1; i < per_pair.size(); ++i) acc = logic::tnorm(acc, per_pair[i]);
  return acc;
}

template <typename T>
struct RuleNodes {
  Var<T> rec, reg, total;
  std::vector<Var<T>> adapt, iso;  // aligned with RuleSet factors

  LossBreakdown breakdown(const RuleSet& rules) const {
    LossBreakdown b;
    b.recloss = static_cast<double>(rec.scalar());
    b.regloss = static_cast<double>(reg.scalar());
    for (std::size_t f = 0; f < adapt.size(); ++f) {
      b.adapt.emplace_back(rules.factors[f].name, static_cast<double>(adapt[f].scalar()));
      b.iso.emplace_back(rules.factors[f].name, static_cast<double>(iso[f].scalar()));
    }
    b.total = b.recompose(rules);
    return b;
  }
};

// Rules over already-encoded codes. mu/lg: [K*B, n] ordered by partition;
// rec_raw: [K*B] raw reconstruction errors (pass an invalid Var and
// with_rec=false to skip the reconstruction rule, e.g. in wiring tests).
template <typename T>
RuleNodes<T> build_rules_from_codes(Graph<T>& g, const RuleSet& rules, Var<T> mu,
                                    Var<T> lg, Var<T> rec_raw, std::int64_t batch) {
  std::int64_t k_parts = static_cast<std::int64_t>(rules.partitions.size());
  if (mu.value().shape[0] != k_parts * batch)
    throw ContractError("rules: code rows do not match partitions * batch");

  RuleNodes<T> out;
  auto slice_rows = [&](Var<T> x, std::size_t part) {
    return g.slice0(x, static_cast<std::int64_t>(part) * batch, batch);
  };

  std::vector<Var<T>> rec_groups, reg_groups;
  for (std::size_t p = 0; p < rules.partitions.size(); ++p) {
    rec_groups.push_back(slice_rows(rec_raw, p));
    Var<T> mu_p = slice_rows(mu, p);
    Var<T> lg_p = slice_rows(lg, p);
    reg_groups.push_back(klu_rows(g, mu_p, lg_p));
  }
  out.rec = partition_rule(g, rec_groups, rules.agg, rules.normalize_per_partition);
  out.reg = partition_rule(g, reg_groups, rules.agg, rules.normalize_per_partition);

  for (const auto& f : rules.factors) {
    std::vector<Var<T>> adapt_raw, iso_raw;
    Var<T> mu_f = g.select_cols(mu, f.dims);
    Var<T> lg_f = g.select_cols(lg, f.dims);
    Var<T> mu_c = g.select_cols(mu, f.complement);
    Var<T> lg_c = g.select_cols(lg, f.complement);
    for (const auto& [ka, kb] : f.pair_indices) {
      adapt_raw.push_back(klt_rows(g, slice_rows(mu_f, ka), slice_rows(lg_f, ka),
                                   slice_rows(mu_f, kb), slice_rows(lg_f, kb)));
      iso_raw.push_back(klt_rows(g, slice_rows(mu_c, ka), slice_rows(lg_c, ka),
                                 slice_rows(mu_c, kb), slice_rows(lg_c, kb)));
    }
    out.adapt.push_back(pair_rule(g, adapt_raw, rules.agg, /*negate=*/true));
    out.iso.push_back(pair_rule(g, iso_raw, rules.agg, /*negate=*/false));
  }

  Var<T> total = out.rec * g.scalar_const(static_cast<T>(rules.w_rec)) +
                 out.reg * g.scalar_const(static_cast<T>(rules.w_reg));
  for (std::size_t f = 0; f < rules.factors.size(); ++f) {
    total = total + out.adapt[f] * g.scalar_const(static_cast<T>(rules.w_adapt[f]));
    total = total + out.iso[f] * g.scalar_const(static_cast<T>(rules.w_iso[f]));
  }
  out.total = total;
  return out;
}

// Full training loss over one aligned batch of images. `images` is the
// concatenated [K*B,H,W,C] tensor ordered like rules.partitions; `eps` the
// reparameterization noise [K*B, n].
template <typename T>
RuleNodes<T> build_rule_graph(Graph<T>& g, VaeModel<T>& model, const RuleSet& rules,
                              Tensor<T> images, Tensor<T> eps, std::int64_t batch,
                              bool training) {
  std::int64_t k_parts = static_cast<std::int64_t>(rules.partitions.size());
  if (images.shape[0] != k_parts * batch)
    throw ContractError("rules: image rows do not match partitions * batch");
  Var<T> x = g.constant(std::move(images));
  auto code = model.encode_graph(g, x, training);
  Var<T> z = model.sample_graph(g, code, g.constant(std::move(eps)));
  Var<T> xhat = model.decode_graph(g, z, training);
  Var<T> xflat = g.reshape(x, {k_parts * batch, model.arch().pixel_count()});
  Var<T> rec_raw = rec_rows(g, xflat, xhat);
  return build_rules_from_codes(g, rules, code.mu, code.logvar, rec_raw, batch);
}

}  // namespace ltnvae

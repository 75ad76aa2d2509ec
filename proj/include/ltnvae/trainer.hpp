#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ltnvae/rules.hpp"

namespace ltnvae {

struct TrainingConfig {
  int epochs = 60;
  int batch = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double val_fraction = 0.1;
  int patience = 10;
  int min_epochs = 30;
  std::uint64_t seed = 0;
  std::string numeric = "float32";

  void validate() const {
    if (epochs < 0) throw ConfigError("training: epochs must be >= 0");
    if (batch < 1) throw ConfigError("training: batch must be >= 1");
    if (!(lr > 0)) throw ConfigError("training: lr must be > 0");
    if (val_fraction < 0 || val_fraction >= 1)
      throw ConfigError("training: val_fraction must be in [0,1)");
    if (numeric != "float32" && numeric != "float64")
      throw ConfigError("training: numeric must be float32 or float64");
  }
};

template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const TrainingConfig& cfg) : cfg_(cfg) {}

  void step(ParameterSet<T>& ps) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    ps.for_each([&](const std::string& name, typename ParameterSet<T>::Entry& e) {
      if (!e.trainable) return;
      auto& m = moment(m_, name, e.value.shape);
      auto& v = moment(v_, name, e.value.shape);
      for (std::int64_t i = 0; i < e.value.numel(); ++i) {
        double g = static_cast<double>(e.grad[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.adam_eps);
        e.value[i] -= static_cast<T>(cfg_.lr * update);
      }
    });
  }

 private:
  std::vector<double>& moment(std::map<std::string, std::vector<double>>& store,
                              const std::string& name, const Shape& shape) {
    auto it = store.find(name);
    if (it == store.end())
      it = store.emplace(name, std::vector<double>(shape_numel(shape), 0.0)).first;
    return it->second;
  }

  TrainingConfig cfg_;
  std::map<std::string, std::vector<double>> m_, v_;
  int t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown mean;
  double val_total = std::numeric_limits<double>::quiet_NaN();
};

template <typename T>
struct TrainOutcome {
  VaeModel<T> model;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool diverged = false;
};

namespace detail {

template <typename T>
Tensor<T> gather_images(const std::vector<Sample>& samples,
                        const std::vector<std::vector<std::size_t>>& batch,
                        const ArchitectureConfig& arch) {
  std::int64_t b = static_cast<std::int64_t>(batch.size() * batch[0].size());
  Tensor<T> t({b, arch.height, arch.width, arch.channels});
  std::int64_t px = arch.pixel_count();
  std::int64_t row = 0;
  for (const auto& part : batch)
    for (std::size_t si : part) {
      const auto& img = samples[si].image;
      for (std::int64_t j = 0; j < px; ++j) t[row * px + j] = static_cast<T>(img.pixels[j]);
      ++row;
    }
  return t;
}

template <typename T>
Tensor<T> gaussian_noise(Shape shape, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.normal());
  return t;
}

inline void accumulate(LossBreakdown& acc, const LossBreakdown& b, std::size_t n) {
  double w = 1.0 / static_cast<double>(n);
  if (acc.adapt.empty()) {
    acc.adapt = b.adapt;
    acc.iso = b.iso;
    for (auto& [k, v] : acc.adapt) v = 0;
    for (auto& [k, v] : acc.iso) v = 0;
  }
  acc.recloss += w * b.recloss;
  acc.regloss += w * b.regloss;
  acc.total += w * b.total;
  for (std::size_t i = 0; i < b.adapt.size(); ++i) acc.adapt[i].second += w * b.adapt[i].second;
  for (std::size_t i = 0; i < b.iso.size(); ++i) acc.iso[i].second += w * b.iso[i].second;
}

}  // namespace detail

// Gradient descent on the total rule satisfaction. Each partition's sample
// pool is split into a step slice and a held-out slice; the held-out slice
// drives early stopping (noise-free, eval-mode forward) once `min_epochs`
// have run. The best-scoring parameters are restored before returning.
// A non-finite loss aborts the run and keeps the last good parameters.
template <typename T>
TrainOutcome<T> train(const std::vector<Sample>& samples,
                      const PartitionedDataset& train_parts,
                      const ArchitectureConfig& arch, const RuleSet& rules,
                      const TrainingConfig& cfg) {
  cfg.validate();
  TrainOutcome<T> out;
  out.model = VaeModel<T>::init(arch, cfg.seed);

  // Hold out the trailing val_fraction of each partition (only if every
  // slice can still fill a batch on both sides).
  PartitionedDataset step_parts = train_parts;
  PartitionedDataset val_parts = train_parts;
  bool has_val = cfg.val_fraction > 0;
  for (const auto& [k, idx] : train_parts.partitions) {
    auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * idx.size()));
    if (n_val < static_cast<std::size_t>(cfg.batch) ||
        idx.size() - n_val < static_cast<std::size_t>(cfg.batch)) {
      has_val = false;
      break;
    }
  }
  if (has_val) {
    for (auto& [k, idx] : step_parts.partitions) {
      auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * idx.size()));
      auto& vidx = val_parts.partitions[k];
      vidx.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
      idx.resize(idx.size() - n_val);
    }
  }

  if (cfg.epochs == 0) return out;

  TupleStream steps(step_parts, static_cast<std::size_t>(cfg.batch),
                    Rng::derive(cfg.seed, 0x57e9));
  AdamOptimizer<T> opt(cfg);
  Rng noise_rng(Rng::derive(cfg.seed, 0x0153));

  ParameterSet<T> best = out.model.params();
  double best_score = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;

  auto eval_total = [&](const PartitionedDataset& parts, int epoch) {
    TupleStream vs(parts, static_cast<std::size_t>(cfg.batch),
                   Rng::derive(cfg.seed, 0xeba1));
    auto batches = vs.epoch(epoch);
    double acc = 0;
    for (const auto& batch : batches) {
      auto imgs = detail::gather_images<T>(samples, batch, arch);
      Tensor<T> eps = Tensor<T>::zeros({imgs.shape[0], arch.latent});
      Graph<T> g;
      auto nodes = build_rule_graph(g, out.model, rules, std::move(imgs), std::move(eps),
                                    cfg.batch, /*training=*/false);
      acc += nodes.breakdown(rules).total;
    }
    return acc / static_cast<double>(batches.size());
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto batches = steps.epoch(epoch);
    LossBreakdown mean;
    try {
      for (const auto& batch : batches) {
        auto imgs = detail::gather_images<T>(samples, batch, arch);
        auto eps = detail::gaussian_noise<T>({imgs.shape[0], arch.latent}, noise_rng);
        Graph<T> g;
        auto nodes = build_rule_graph(g, out.model, rules, std::move(imgs), std::move(eps),
                                      cfg.batch, /*training=*/true);
        LossBreakdown b = nodes.breakdown(rules);
        double graph_total = static_cast<double>(nodes.total.scalar());
        if (std::abs(graph_total - b.total) > 1e-4)
          throw ContractError("loss recomposition mismatch at step");
        out.model.params().zero_grads();
        g.backward(nodes.total, &out.model.params());
        opt.step(out.model.params());
        detail::accumulate(mean, b, batches.size());
      }
    } catch (const NumericError&) {
      // Divergence: restore the last good parameters (the initial ones if no
      // epoch ever finished) and stop.
      out.diverged = true;
      out.model = VaeModel<T>(arch, std::move(best));
      out.best_epoch = best_epoch;
      return out;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean = mean;
    double score = mean.total;
    if (has_val) {
      rec.val_total = eval_total(val_parts, epoch);
      score = rec.val_total;
    }
    out.history.push_back(rec);

    if (score < best_score) {
      best_score = score;
      best = out.model.params();
      best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (epoch + 1 >= cfg.min_epochs && since_best >= cfg.patience) break;
  }

  out.model = VaeModel<T>(arch, std::move(best));
  out.best_epoch = best_epoch;
  return out;
}

}  // namespace ltnvae

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ltnvae/autodiff.hpp"
#include "ltnvae/rng.hpp"

namespace ltnvae {

// Encoder/decoder layout. The encoder is a conv stack (each block:
// conv -> batch norm -> relu -> 2x2 max pool) followed by dense layers and
// linear mean / log-variance heads; the decoder mirrors the dense stack and
// ends in a logistic squash so reconstructions stay in [0,1].
struct ArchitectureConfig {
  int height = 32;
  int width = 32;
  int channels = 1;
  std::vector<int> conv_depths = {32, 16};
  std::vector<int> dense_widths = {128, 64};
  int latent = 16;
  int kernel = 3;

  void validate() const {
    if (height < 1 || width < 1 || channels < 1)
      throw ConfigError("architecture: image extents must be >= 1");
    if (latent < 1) throw ConfigError("architecture: latent size must be >= 1");
    if (kernel < 1 || kernel % 2 == 0)
      throw ConfigError("architecture: kernel size must be odd");
    if (dense_widths.empty())
      throw ConfigError("architecture: at least one dense layer required");
    int h = height, w = width;
    for (std::size_t i = 0; i < conv_depths.size(); ++i) {
      if (conv_depths[i] < 1) throw ConfigError("architecture: conv depth must be >= 1");
      if (h % 2 != 0 || w % 2 != 0)
        throw ConfigError("architecture: spatial extent not divisible by 2 at conv block " +
                          std::to_string(i));
      h /= 2;
      w /= 2;
    }
  }

  // Flattened feature count after the conv stack.
  std::int64_t conv_out_size() const {
    std::int64_t h = height, w = width;
    std::int64_t c = channels;
    for (int d : conv_depths) {
      h /= 2;
      w /= 2;
      c = d;
    }
    return h * w * c;
  }

  std::int64_t pixel_count() const {
    return std::int64_t(height) * width * channels;
  }
};

namespace nn {

// Resolves a named tensor to a graph leaf. In training mode trainable
// entries become parameter leaves (gradients flow back into the set);
// otherwise everything enters the tape as a constant.
template <typename T>
using ParamLookup = std::function<Var<T>(const std::string&)>;

template <typename T>
ParamLookup<T> trainable_lookup(Graph<T>& g, ParameterSet<T>& ps) {
  return [&g, &ps](const std::string& name) {
    return ps.trainable(name) ? g.param(ps, name) : g.constant(ps.value(name));
  };
}

template <typename T>
ParamLookup<T> frozen_lookup(Graph<T>& g, const ParameterSet<T>& ps) {
  return [&g, &ps](const std::string& name) { return g.constant(ps.value(name)); };
}

template <typename T>
Var<T> dense(Graph<T>& g, const ParamLookup<T>& p, const std::string& prefix, Var<T> x) {
  return g.matmul(x, p(prefix + ".w")) + p(prefix + ".b");
}

// Batch normalization over the leading axis of a [M,C] view. In training
// mode batch statistics are used and the running buffers in `buffers` are
// advanced; in eval mode the stored running statistics are applied, making
// the transform a per-sample affine map.
template <typename T>
Var<T> batch_norm(Graph<T>& g, const ParamLookup<T>& p, const std::string& prefix,
                  Var<T> x, bool training, ParameterSet<T>* buffers,
                  double momentum = 0.1, double eps = 1e-5) {
  Var<T> gamma = p(prefix + ".gamma");
  Var<T> beta = p(prefix + ".beta");
  if (training) {
    Var<T> mu = g.col_mean(x);
    Var<T> xc = x - mu;
    Var<T> var = g.col_mean(g.pow_c(xc, 2.0));
    Var<T> inv = g.pow_c(g.affine(var, T(1), static_cast<T>(eps)), -0.5);
    if (buffers) {
      auto& rm = buffers->value(prefix + ".running_mean");
      auto& rv = buffers->value(prefix + ".running_var");
      const auto& bm = mu.value();
      const auto& bv = var.value();
      for (std::int64_t i = 0; i < rm.numel(); ++i) {
        rm[i] = static_cast<T>((1.0 - momentum) * rm[i] + momentum * bm[i]);
        rv[i] = static_cast<T>((1.0 - momentum) * rv[i] + momentum * bv[i]);
      }
    }
    return (xc * inv) * gamma + beta;
  }
  Var<T> rm = p(prefix + ".running_mean");
  Var<T> rv = p(prefix + ".running_var");
  Var<T> inv = g.pow_c(g.affine(rv, T(1), static_cast<T>(eps)), -0.5);
  return ((x - rm) * inv) * gamma + beta;
}

// ---- initialization ----

template <typename T>
Tensor<T> he_normal(Shape shape, std::int64_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  double s = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(s * rng.normal());
  return t;
}

template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  Tensor<T> t(std::move(shape));
  double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-lim, lim));
  return t;
}

}  // namespace nn
}  // namespace ltnvae

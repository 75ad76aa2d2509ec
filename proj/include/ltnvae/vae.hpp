#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ltnvae/autodiff.hpp"
#include "ltnvae/image.hpp"
#include "ltnvae/nn.hpp"

namespace ltnvae {

using DimSet = std::vector<std::int64_t>;

// Diagonal-Gaussian posterior parameters for one sample: mean and
// log-variance vectors of the latent distribution.
struct LatentCode {
  std::vector<double> mu;
  std::vector<double> logvar;

  LatentCode() = default;
  LatentCode(std::vector<double> m, std::vector<double> lg)
      : mu(std::move(m)), logvar(std::move(lg)) {
    if (mu.size() != logvar.size())
      throw ShapeError("LatentCode: mu/logvar length mismatch");
    if (mu.empty()) throw ShapeError("LatentCode: empty code");
    for (std::size_t i = 0; i < mu.size(); ++i)
      if (!std::isfinite(mu[i]) || !std::isfinite(logvar[i]))
        throw NumericError("LatentCode: non-finite entry");
  }

  std::size_t size() const { return mu.size(); }

  static LatentCode standard_normal(std::size_t n) {
    return LatentCode(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0));
  }
};

namespace detail {
inline void check_dims(const DimSet& dims, std::size_t n, const char* op) {
  if (dims.empty()) throw DomainError(std::string(op) + ": empty dimension set");
  for (auto d : dims)
    if (d < 0 || static_cast<std::size_t>(d) >= n)
      throw DomainError(std::string(op) + ": dimension " + std::to_string(d) +
                        " out of range for latent size " + std::to_string(n));
}
}  // namespace detail

// ---- closed-form predicates ----

// Mean squared error over all pixels and channels. Zero iff the images agree.
inline double rec_predicate(const ImageTensor& x, const ImageTensor& xhat) {
  if (!x.same_shape(xhat)) throw ShapeError("rec_predicate: image shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = static_cast<double>(x.pixels[i]) - static_cast<double>(xhat.pixels[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

// KL divergence from the code's Gaussian to the standard-normal prior,
// averaged over the given dimensions:  mean_d [ -lg/2 + (e^lg + mu^2)/2 - 1/2 ].
inline double klu(const LatentCode& code, const DimSet& dims) {
  detail::check_dims(dims, code.size(), "klu");
  double acc = 0.0;
  for (auto d : dims) {
    double lg = code.logvar[static_cast<std::size_t>(d)];
    double mu = code.mu[static_cast<std::size_t>(d)];
    acc += -0.5 * lg + 0.5 * (std::exp(lg) + mu * mu) - 0.5;
  }
  return acc / static_cast<double>(dims.size());
}

// KL divergence between two diagonal-Gaussian codes, averaged over dims:
// mean_d [ (lg' - lg)/2 + (e^lg + (mu - mu')^2) / (2 e^lg') - 1/2 ].
inline double klt(const LatentCode& a, const LatentCode& b, const DimSet& dims) {
  if (a.size() != b.size()) throw ShapeError("klt: code length mismatch");
  detail::check_dims(dims, a.size(), "klt");
  double acc = 0.0;
  for (auto d : dims) {
    auto i = static_cast<std::size_t>(d);
    double dm = a.mu[i] - b.mu[i];
    acc += 0.5 * (b.logvar[i] - a.logvar[i]) +
           (std::exp(a.logvar[i]) + dm * dm) / (2.0 * std::exp(b.logvar[i])) - 0.5;
  }
  return acc / static_cast<double>(dims.size());
}

// Restriction of a code to a dimension subset (the Mean/Logvar projections).
inline LatentCode project(const LatentCode& code, const DimSet& dims) {
  detail::check_dims(dims, code.size(), "project");
  std::vector<double> m, lg;
  m.reserve(dims.size());
  lg.reserve(dims.size());
  for (auto d : dims) {
    m.push_back(code.mu[static_cast<std::size_t>(d)]);
    lg.push_back(code.logvar[static_cast<std::size_t>(d)]);
  }
  return LatentCode(std::move(m), std::move(lg));
}

inline DimSet complement_dims(const DimSet& dims, std::int64_t n) {
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (auto d : dims) used[static_cast<std::size_t>(d)] = true;
  DimSet out;
  for (std::int64_t i = 0; i < n; ++i)
    if (!used[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

// Reparameterized sample: z = mu + exp(logvar/2) * noise.
inline std::vector<double> sample_latent(const LatentCode& code,
                                         const std::vector<double>& noise) {
  if (noise.size() != code.size()) throw ShapeError("sample_latent: noise length mismatch");
  std::vector<double> z(code.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = code.mu[i] + std::exp(0.5 * code.logvar[i]) * noise[i];
  return z;
}

// ---- graph-side per-row predicates (training path) ----

// Per-sample mean squared error between [B,D] matrices -> [B].
template <typename T>
Var<T> rec_rows(Graph<T>& g, Var<T> x, Var<T> xhat) {
  return g.row_mean(g.pow_c(x - xhat, 2.0));
}

// Per-sample KL to the standard-normal prior over all columns -> [B].
template <typename T>
Var<T> klu_rows(Graph<T>& g, Var<T> mu, Var<T> lg) {
  Var<T> term = g.affine(g.vexp(lg) + g.pow_c(mu, 2.0) - lg, T(0.5), T(-0.5));
  return g.row_mean(term);
}

// Per-sample KL between two diagonal-Gaussian batches -> [B].
template <typename T>
Var<T> klt_rows(Graph<T>& g, Var<T> mu_a, Var<T> lg_a, Var<T> mu_b, Var<T> lg_b) {
  Var<T> half = g.scalar_const(T(0.5));
  Var<T> d2 = g.pow_c(mu_a - mu_b, 2.0);
  Var<T> num = g.vexp(lg_a) + d2;
  Var<T> den = g.affine(g.vexp(lg_b), T(2), T(0));
  Var<T> term = (lg_b - lg_a) * half + num / den - half;
  return g.row_mean(term);
}

// ---- the model ----

template <typename T>
struct EncodedBatch {
  Var<T> mu;      // [B, n]
  Var<T> logvar;  // [B, n]
};

// Convolutional VAE with named parameters. Graph-building methods are used
// by the trainer (gradients, batch-norm batch statistics); the plain
// encode/decode methods run the same network in eval mode and return values.
template <typename T>
class VaeModel {
 public:
  VaeModel() = default;
  VaeModel(ArchitectureConfig arch, ParameterSet<T> params)
      : arch_(std::move(arch)), params_(std::move(params)) {}

  static VaeModel init(const ArchitectureConfig& arch, std::uint64_t seed) {
    arch.validate();
    ParameterSet<T> ps;
    Rng rng(Rng::derive(seed, 0x10d31));
    int cin = arch.channels;
    for (std::size_t i = 0; i < arch.conv_depths.size(); ++i) {
      int d = arch.conv_depths[i];
      std::string cp = "enc.conv" + std::to_string(i);
      std::int64_t fan_in = std::int64_t(arch.kernel) * arch.kernel * cin;
      // No conv bias: the batch norm right behind it absorbs any shift.
      ps.add(cp + ".w", nn::he_normal<T>({arch.kernel, arch.kernel, cin, d}, fan_in, rng));
      std::string bp = "enc.bn" + std::to_string(i);
      ps.add(bp + ".gamma", Tensor<T>::full({d}, T(1)));
      ps.add(bp + ".beta", Tensor<T>::zeros({d}));
      ps.add(bp + ".running_mean", Tensor<T>::zeros({d}), /*trainable=*/false);
      ps.add(bp + ".running_var", Tensor<T>::full({d}, T(1)), /*trainable=*/false);
      cin = d;
    }
    std::int64_t in = arch.conv_out_size();
    for (std::size_t i = 0; i < arch.dense_widths.size(); ++i) {
      std::int64_t out = arch.dense_widths[i];
      std::string dp = "enc.dense" + std::to_string(i);
      ps.add(dp + ".w", nn::glorot_uniform<T>({in, out}, in, out, rng));
      ps.add(dp + ".b", Tensor<T>::zeros({out}));
      in = out;
    }
    ps.add("enc.mu.w", nn::glorot_uniform<T>({in, arch.latent}, in, arch.latent, rng));
    ps.add("enc.mu.b", Tensor<T>::zeros({arch.latent}));
    ps.add("enc.lg.w", nn::glorot_uniform<T>({in, arch.latent}, in, arch.latent, rng));
    ps.add("enc.lg.b", Tensor<T>::zeros({arch.latent}));

    in = arch.latent;
    std::vector<int> widths(arch.dense_widths.rbegin(), arch.dense_widths.rend());
    for (std::size_t i = 0; i < widths.size(); ++i) {
      std::int64_t out = widths[i];
      std::string dp = "dec.dense" + std::to_string(i);
      ps.add(dp + ".w", nn::glorot_uniform<T>({in, out}, in, out, rng));
      ps.add(dp + ".b", Tensor<T>::zeros({out}));
      in = out;
    }
    std::int64_t px = arch.pixel_count();
    ps.add("dec.out.w", nn::glorot_uniform<T>({in, px}, in, px, rng));
    ps.add("dec.out.b", Tensor<T>::zeros({px}));
    return VaeModel(arch, std::move(ps));
  }

  const ArchitectureConfig& arch() const { return arch_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // Encoder over a [B,H,W,C] input node. `training` selects batch-norm
  // batch statistics (and advances the running buffers) versus stored
  // statistics. Returns mean and log-variance, each [B,n].
  EncodedBatch<T> encode_graph(Graph<T>& g, Var<T> x, bool training) {
    const auto& xs = x.value().shape;
    if (xs.size() != 4 || xs[1] != arch_.height || xs[2] != arch_.width ||
        xs[3] != arch_.channels)
      throw ShapeError("encode: input shape " + shape_str(xs) +
                       " does not match configured image shape");
    auto lookup = training ? nn::trainable_lookup(g, params_)
                           : nn::frozen_lookup<T>(g, params_);
    Var<T> h = x;
    int pad = arch_.kernel / 2;
    for (std::size_t i = 0; i < arch_.conv_depths.size(); ++i) {
      std::string cp = "enc.conv" + std::to_string(i);
      h = g.conv2d(h, lookup(cp + ".w"), pad);
      Shape hs = h.value().shape;  // copy: node storage may reallocate
      std::int64_t m = hs[0] * hs[1] * hs[2];
      Var<T> flat = g.reshape(h, {m, hs[3]});
      flat = nn::batch_norm(g, lookup, "enc.bn" + std::to_string(i), flat, training,
                            training ? &params_ : nullptr);
      h = g.maxpool2(g.relu(g.reshape(flat, hs)));
    }
    std::int64_t b = x.value().shape[0];
    h = g.reshape(h, {b, arch_.conv_out_size()});
    for (std::size_t i = 0; i < arch_.dense_widths.size(); ++i)
      h = g.relu(nn::dense(g, lookup, "enc.dense" + std::to_string(i), h));
    return {nn::dense(g, lookup, "enc.mu", h), nn::dense(g, lookup, "enc.lg", h)};
  }

  // Decoder over a [B,n] latent node; returns [B, H*W*C] in (0,1).
  Var<T> decode_graph(Graph<T>& g, Var<T> z, bool training) {
    const auto& zs = z.value().shape;
    if (zs.size() != 2 || zs[1] != arch_.latent)
      throw ShapeError("decode: latent shape " + shape_str(zs) +
                       " does not match latent size " + std::to_string(arch_.latent));
    auto lookup = training ? nn::trainable_lookup(g, params_)
                           : nn::frozen_lookup<T>(g, params_);
    Var<T> h = z;
    std::size_t depth = arch_.dense_widths.size();
    for (std::size_t i = 0; i < depth; ++i)
      h = g.relu(nn::dense(g, lookup, "dec.dense" + std::to_string(i), h));
    return g.sigmoid(nn::dense(g, lookup, "dec.out", h));
  }

  // Reparameterized sampling node: z = mu + exp(logvar/2) * eps.
  Var<T> sample_graph(Graph<T>& g, const EncodedBatch<T>& code, Var<T> eps) {
    if (eps.value().shape != code.mu.value().shape)
      throw ShapeError("sample: noise shape mismatch");
    return code.mu + g.vexp(g.affine(code.logvar, T(0.5), T(0))) * eps;
  }

  // ---- eval-mode value paths ----

  Tensor<T> batch_to_tensor(const std::vector<const ImageTensor*>& batch) const {
    if (batch.empty()) throw DomainError("encode: empty batch");
    Tensor<T> t({static_cast<std::int64_t>(batch.size()), arch_.height, arch_.width,
                 arch_.channels});
    std::int64_t px = arch_.pixel_count();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const ImageTensor& img = *batch[i];
      if (img.height != arch_.height || img.width != arch_.width ||
          img.channels != arch_.channels)
        throw ShapeError("encode: image shape mismatch at batch index " + std::to_string(i));
      for (std::int64_t j = 0; j < px; ++j)
        t[static_cast<std::int64_t>(i) * px + j] = static_cast<T>(img.pixels[j]);
    }
    return t;
  }

  // Deterministic eval-mode encoding. Order-preserving over the batch.
  std::vector<LatentCode> encode(const std::vector<const ImageTensor*>& batch) {
    Graph<T> g;
    auto code = encode_graph(g, g.constant(batch_to_tensor(batch)), false);
    const auto& mu = code.mu.value();
    const auto& lg = code.logvar.value();
    std::vector<LatentCode> out;
    out.reserve(batch.size());
    std::int64_t n = arch_.latent;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::vector<double> m(n), l(n);
      for (std::int64_t d = 0; d < n; ++d) {
        m[d] = static_cast<double>(mu[static_cast<std::int64_t>(i) * n + d]);
        l[d] = static_cast<double>(lg[static_cast<std::int64_t>(i) * n + d]);
      }
      out.emplace_back(std::move(m), std::move(l));
    }
    return out;
  }

  LatentCode encode_one(const ImageTensor& img) {
    return encode({&img}).front();
  }

  // Deterministic eval-mode decoding of latent vectors into images.
  std::vector<ImageTensor> decode(const std::vector<std::vector<double>>& zs) {
    if (zs.empty()) throw DomainError("decode: empty batch");
    Tensor<T> zt({static_cast<std::int64_t>(zs.size()), arch_.latent});
    for (std::size_t i = 0; i < zs.size(); ++i) {
      if (static_cast<std::int64_t>(zs[i].size()) != arch_.latent)
        throw ShapeError("decode: latent length mismatch at batch index " +
                         std::to_string(i));
      for (std::int64_t d = 0; d < arch_.latent; ++d)
        zt[static_cast<std::int64_t>(i) * arch_.latent + d] = static_cast<T>(zs[i][d]);
    }
    Graph<T> g;
    Var<T> x = decode_graph(g, g.constant(std::move(zt)), false);
    const auto& v = x.value();
    std::vector<ImageTensor> out;
    std::int64_t px = arch_.pixel_count();
    for (std::size_t i = 0; i < zs.size(); ++i) {
      ImageTensor img(arch_.height, arch_.width, arch_.channels);
      for (std::int64_t j = 0; j < px; ++j)
        img.pixels[j] = static_cast<float>(v[static_cast<std::int64_t>(i) * px + j]);
      out.push_back(std::move(img));
    }
    return out;
  }

  template <typename U>
  VaeModel<U> cast() const {
    return VaeModel<U>(arch_, params_.template cast<U>());
  }

 private:
  ArchitectureConfig arch_;
  ParameterSet<T> params_;
};

}  // namespace ltnvae

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ltnvae/autodiff.hpp"
#include "ltnvae/common.hpp"

namespace ltnvae::logic {

inline constexpr double kNormEps = 1e-8;

// Batch of fuzzy truth degrees, each in [0,1]. The currency of every rule.
struct TruthTensor {
  std::vector<double> values;

  TruthTensor() = default;
  explicit TruthTensor(std::vector<double> v) : values(std::move(v)) {
    if (values.empty()) throw DomainError("TruthTensor: length must be >= 1");
    for (double x : values)
      if (!(x >= 0.0 && x <= 1.0))
        throw DomainError("TruthTensor: value outside [0,1]");
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

// Exponent of the generalized-mean aggregators. p = 2 reproduces the
// root-mean-square forms used throughout training.
struct AggregatorConfig {
  double p = 2.0;

  AggregatorConfig() = default;
  explicit AggregatorConfig(double p_) : p(p_) {
    if (!(p >= 1.0)) throw DomainError("AggregatorConfig: p must be >= 1");
  }
};

namespace detail {
inline void require_same_length(const TruthTensor& a, const TruthTensor& b,
                                const char* op) {
  if (a.size() != b.size())
    throw ShapeError(std::string(op) + ": length mismatch " +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}
}  // namespace detail

// ---- connectives on plain truth tensors ----

// Standard negation, 1 - a.
inline TruthTensor negate(const TruthTensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 - a[i];
  return TruthTensor(std::move(out));
}

// Product t-norm, a * b.
inline TruthTensor tnorm(const TruthTensor& a, const TruthTensor& b) {
  detail::require_same_length(a, b, "tnorm");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return TruthTensor(std::move(out));
}

// Dual t-conorm, a + b - a*b.
inline TruthTensor tconorm(const TruthTensor& a, const TruthTensor& b) {
  detail::require_same_length(a, b, "tconorm");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i] - a[i] * b[i];
  return TruthTensor(std::move(out));
}

// Reichenbach implication, 1 - a + a*b.
inline TruthTensor implies(const TruthTensor& a, const TruthTensor& b) {
  detail::require_same_length(a, b, "implies");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 - a[i] + a[i] * b[i];
  return TruthTensor(std::move(out));
}

// Existential aggregator: generalized mean ((1/n) sum a_i^p)^(1/p).
inline double exists(const TruthTensor& a, const AggregatorConfig& cfg = {}) {
  double acc = 0.0;
  for (double x : a.values) acc += std::pow(x, cfg.p);
  return std::pow(acc / static_cast<double>(a.size()), 1.0 / cfg.p);
}

// Universal aggregator: generalized mean w.r.t. the error,
// 1 - ((1/n) sum (1-a_i)^p)^(1/p).
inline double forall(const TruthTensor& a, const AggregatorConfig& cfg = {}) {
  double acc = 0.0;
  for (double x : a.values) acc += std::pow(1.0 - x, cfg.p);
  return 1.0 - std::pow(acc / static_cast<double>(a.size()), 1.0 / cfg.p);
}

// Min-max rescaling of raw predicate outputs into [0,1]. A degenerate batch
// (max - min < eps) maps to all zeros: a constant batch is treated as fully
// satisfied and contributes no gradient.
inline TruthTensor batch_normalize(const std::vector<double>& raw) {
  if (raw.empty()) throw DomainError("batch_normalize: empty batch");
  for (double x : raw)
    if (!std::isfinite(x)) throw NumericError("batch_normalize: non-finite input");
  auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(raw.size(), 0.0);
  if (hi - lo >= kNormEps) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / (hi - lo + kNormEps);
  }
  return TruthTensor(std::move(out));
}

// ---- the same operator set over graph nodes (differentiable path) ----

template <typename T>
Var<T> negate(Var<T> a) { return a.g->affine(a, T(-1), T(1)); }

template <typename T>
Var<T> tnorm(Var<T> a, Var<T> b) { return a * b; }

template <typename T>
Var<T> tconorm(Var<T> a, Var<T> b) { return (a + b) - a * b; }

template <typename T>
Var<T> implies(Var<T> a, Var<T> b) {
  return a.g->affine(a, T(-1), T(1)) + a * b;
}

template <typename T>
Var<T> exists(Var<T> a, const AggregatorConfig& cfg = {}) {
  Graph<T>& g = *a.g;
  return g.pow_c(g.mean_all(g.pow_c(a, cfg.p)), 1.0 / cfg.p);
}

template <typename T>
Var<T> forall(Var<T> a, const AggregatorConfig& cfg = {}) {
  Graph<T>& g = *a.g;
  Var<T> err = g.affine(a, T(-1), T(1));
  return g.affine(g.pow_c(g.mean_all(g.pow_c(err, cfg.p)), 1.0 / cfg.p), T(-1), T(1));
}

template <typename T>
Var<T> batch_normalize(Var<T> raw) {
  Graph<T>& g = *raw.g;
  Var<T> lo = g.min_all(raw);
  Var<T> hi = g.max_all(raw);
  // The degenerate branch is resolved at build time (the tape is eager), so
  // plain and graph flavors agree bit-for-bit on the branch condition.
  if (static_cast<double>(hi.scalar()) - static_cast<double>(lo.scalar()) < kNormEps)
    return g.affine(raw, T(0), T(0));
  Var<T> span = g.affine(hi - lo, T(1), static_cast<T>(kNormEps));
  return (raw - lo) / span;
}

}  // namespace ltnvae::logic

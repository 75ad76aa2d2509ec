#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ltnvae/common.hpp"
#include "ltnvae/rng.hpp"
#include "ltnvae/tensor.hpp"

namespace ltnvae {

// Named tensors (weights, biases, batch-norm buffers) of a model. Gradients
// live next to the values; the graph accumulates into them on backward().
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> init, bool trainable = true) {
    auto [it, inserted] = entries_.emplace(name, Entry{std::move(init), {}, trainable});
    if (!inserted) throw ContractError("duplicate parameter name: " + name);
    it->second.grad = Tensor<T>::zeros(it->second.value.shape);
    return it->second.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  Tensor<T>& value(const std::string& name) { return entry(name).value; }
  const Tensor<T>& value(const std::string& name) const { return entry(name).value; }
  Tensor<T>& grad(const std::string& name) { return entry(name).grad; }
  bool trainable(const std::string& name) const { return entry(name).trainable; }

  void zero_grads() {
    for (auto& [name, e] : entries_)
      std::fill(e.grad.data.begin(), e.grad.data.end(), T(0));
  }

  // Deterministic (name-sorted) iteration.
  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& [name, e] : entries_) fn(name, e);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [name, e] : entries_) fn(name, e);
  }

  std::size_t size() const { return entries_.size(); }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& [name, e] : entries_)
      out.add(name, e.value.template cast<U>(), e.trainable);
    return out;
  }

 private:
  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->entry(name);
  }

  std::map<std::string, Entry> entries_;
};

template <typename T>
class Graph;

// Lightweight handle to a node in a Graph.
template <typename T>
struct Var {
  Graph<T>* g = nullptr;
  int id = -1;

  const Tensor<T>& value() const { return g->node(id).value; }
  const Shape& shape() const { return value().shape; }
  T scalar() const {
    if (value().numel() != 1) throw ContractError("scalar() on non-scalar node");
    return value().data[0];
  }
};

// Eager reverse-mode tape. Every operation computes its value immediately and
// records a closure that propagates gradients; backward() replays the tape in
// reverse creation order (which is a topological order by construction).
template <typename T>
class Graph {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatMap = Eigen::Map<Mat>;
  using CMatMap = Eigen::Map<const Mat>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily during backward
    bool requires_grad = false;
    const char* op = "";
    std::string param_name;  // non-empty for parameter leaves
    std::function<void(Graph&, int)> backward_fn;
  };

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  // ---- leaves ----

  Var<T> constant(Tensor<T> t) {
    return make("const", std::move(t), false, {});
  }

  Var<T> scalar_const(T v) { return constant(Tensor<T>::scalar(v)); }

  Var<T> param(ParameterSet<T>& ps, const std::string& name) {
    Var<T> v = make("param", ps.value(name), true, {});
    node(v.id).param_name = name;
    return v;
  }

  // ---- elementwise binary, with limited broadcasting ----
  // Supported operand combinations: identical shapes; either side a scalar
  // (numel 1); rhs a vector matching the trailing extent of lhs (row
  // broadcast, used for biases and per-channel affine transforms).

  enum class Bcast { Same, LhsScalar, RhsScalar, RhsRow };

  Var<T> add(Var<T> a, Var<T> b) { return binary("add", a, b,
      [](T x, T y) { return x + y; },
      [](T, T, T g) { return g; },
      [](T, T, T g) { return g; }); }

  Var<T> sub(Var<T> a, Var<T> b) { return binary("sub", a, b,
      [](T x, T y) { return x - y; },
      [](T, T, T g) { return g; },
      [](T, T, T g) { return -g; }); }

  Var<T> mul(Var<T> a, Var<T> b) { return binary("mul", a, b,
      [](T x, T y) { return x * y; },
      [](T, T y, T g) { return g * y; },
      [](T x, T, T g) { return g * x; }); }

  Var<T> div(Var<T> a, Var<T> b) { return binary("div", a, b,
      [](T x, T y) { return x / y; },
      [](T, T y, T g) { return g / y; },
      [](T x, T y, T g) { return -g * x / (y * y); }); }

  // scale * x + shift
  Var<T> affine(Var<T> x, T scale, T shift) {
    Tensor<T> out = x.value();
    for (T& v : out.data) v = scale * v + shift;
    Var<T> r = make("affine", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id, scale](Graph& g, int self) {
        g.accumulate(xi, g.node(self).grad, [scale](T gr, T) { return gr * scale; });
      };
    }
    return r;
  }

  Var<T> vexp(Var<T> x) {
    Tensor<T> out = x.value();
    for (T& v : out.data) v = std::exp(v);
    Var<T> r = make("exp", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id](Graph& g, int self) {
        const auto& y = g.node(self).value;
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        for (std::int64_t i = 0; i < y.numel(); ++i) dx[i] += gr[i] * y[i];
      };
    }
    return r;
  }

  Var<T> sigmoid(Var<T> x) {
    Tensor<T> out = x.value();
    for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    Var<T> r = make("sigmoid", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id](Graph& g, int self) {
        const auto& y = g.node(self).value;
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        for (std::int64_t i = 0; i < y.numel(); ++i) dx[i] += gr[i] * y[i] * (T(1) - y[i]);
      };
    }
    return r;
  }

  Var<T> relu(Var<T> x) {
    Tensor<T> out = x.value();
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    Var<T> r = make("relu", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id](Graph& g, int self) {
        const auto& xin = g.node(xi).value;
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        for (std::int64_t i = 0; i < xin.numel(); ++i)
          if (xin[i] > T(0)) dx[i] += gr[i];
      };
    }
    return r;
  }

  // x^p with p a constant. Negative bases are valid only for integral p;
  // the subgradient at x == 0 is defined as 0 so degenerate aggregates stay
  // gradient-free.
  Var<T> pow_c(Var<T> x, double p) {
    bool integral_p = p == std::rint(p);
    Tensor<T> out = x.value();
    for (T& v : out.data) {
      if (v < T(0) && !integral_p)
        throw NumericError("pow: negative base with fractional exponent");
      v = static_cast<T>(std::pow(static_cast<double>(v), p));
    }
    Var<T> r = make("pow", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id, p](Graph& g, int self) {
        const auto& xin = g.node(xi).value;
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        for (std::int64_t i = 0; i < xin.numel(); ++i) {
          if (xin[i] == T(0)) continue;
          dx[i] += gr[i] * static_cast<T>(p * std::pow(static_cast<double>(xin[i]), p - 1.0));
        }
      };
    }
    return r;
  }

  // ---- matrix ops ----

  Var<T> matmul(Var<T> a, Var<T> b) {
    const auto& A = a.value();
    const auto& B = b.value();
    if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
      throw ShapeError("matmul: incompatible shapes " + shape_str(A.shape) + " x " +
                       shape_str(B.shape));
    std::int64_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
    Tensor<T> out({m, n});
    MatMap(out.data.data(), m, n) =
        CMatMap(A.data.data(), m, k) * CMatMap(B.data.data(), k, n);
    Var<T> r = make("matmul", std::move(out), needs(a) || needs(b), {a.id, b.id});
    if (node(r.id).requires_grad) {
      node(r.id).backward_fn = [ai = a.id, bi = b.id, m, k, n](Graph& g, int self) {
        CMatMap G(g.node(self).grad.data.data(), m, n);
        if (g.needs_id(ai)) {
          CMatMap B(g.node(bi).value.data.data(), k, n);
          MatMap(g.grad_buf(ai).data(), m, k).noalias() += G * B.transpose();
        }
        if (g.needs_id(bi)) {
          CMatMap A(g.node(ai).value.data.data(), m, k);
          MatMap(g.grad_buf(bi).data(), k, n).noalias() += A.transpose() * G;
        }
      };
    }
    return r;
  }

  // 2-D convolution, stride 1, symmetric zero padding. x: [B,H,W,C],
  // w: [KH,KW,Cin,Cout], output [B,H',W',Cout]. Implemented as im2col + GEMM;
  // the column matrix is cached for the backward pass.
  Var<T> conv2d(Var<T> x, Var<T> w, int pad) {
    const auto& X = x.value();
    const auto& W = w.value();
    if (X.shape.size() != 4) throw ShapeError("conv2d: input must be [B,H,W,C]");
    if (W.shape.size() != 4) throw ShapeError("conv2d: kernel must be [KH,KW,Cin,Cout]");
    if (W.shape[2] != X.shape[3])
      throw ShapeError("conv2d: channel mismatch " + shape_str(X.shape) + " vs " +
                       shape_str(W.shape));
    std::int64_t B = X.shape[0], H = X.shape[1], Wd = X.shape[2], C = X.shape[3];
    std::int64_t KH = W.shape[0], KW = W.shape[1], Cout = W.shape[3];
    std::int64_t Ho = H + 2 * pad - KH + 1, Wo = Wd + 2 * pad - KW + 1;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");

    std::int64_t rows = B * Ho * Wo, cols = KH * KW * C;
    auto col = std::make_shared<Tensor<T>>(Shape{rows, cols});
    T* cp = col->data.data();
    const T* xp = X.data.data();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t oy = 0; oy < Ho; ++oy)
        for (std::int64_t ox = 0; ox < Wo; ++ox) {
          T* dst = cp + ((b * Ho + oy) * Wo + ox) * cols;
          for (std::int64_t ky = 0; ky < KH; ++ky) {
            std::int64_t iy = oy + ky - pad;
            if (iy < 0 || iy >= H) { dst += KW * C; continue; }
            for (std::int64_t kx = 0; kx < KW; ++kx) {
              std::int64_t ix = ox + kx - pad;
              if (ix < 0 || ix >= Wd) { dst += C; continue; }
              const T* src = xp + ((b * H + iy) * Wd + ix) * C;
              for (std::int64_t c = 0; c < C; ++c) *dst++ = src[c];
            }
          }
        }

    Tensor<T> out({B, Ho, Wo, Cout});
    MatMap(out.data.data(), rows, Cout) =
        CMatMap(cp, rows, cols) * CMatMap(W.data.data(), cols, Cout);
    Var<T> r = make("conv2d", std::move(out), needs(x) || needs(w), {x.id, w.id});
    if (node(r.id).requires_grad) {
      node(r.id).backward_fn = [xi = x.id, wi = w.id, col, B, H, Wd, C, KH, KW, Cout,
                                Ho, Wo, pad, rows, cols](Graph& g, int self) {
        CMatMap G(g.node(self).grad.data.data(), rows, Cout);
        if (g.needs_id(wi)) {
          CMatMap Col(col->data.data(), rows, cols);
          MatMap(g.grad_buf(wi).data(), cols, Cout).noalias() += Col.transpose() * G;
        }
        if (g.needs_id(xi)) {
          Tensor<T> dcol({rows, cols});
          CMatMap Wm(g.node(wi).value.data.data(), cols, Cout);
          MatMap(dcol.data.data(), rows, cols).noalias() = G * Wm.transpose();
          T* dxp = g.grad_buf(xi).data();
          const T* dcp = dcol.data.data();
          for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t oy = 0; oy < Ho; ++oy)
              for (std::int64_t ox = 0; ox < Wo; ++ox) {
                const T* src = dcp + ((b * Ho + oy) * Wo + ox) * cols;
                for (std::int64_t ky = 0; ky < KH; ++ky) {
                  std::int64_t iy = oy + ky - pad;
                  if (iy < 0 || iy >= H) { src += KW * C; continue; }
                  for (std::int64_t kx = 0; kx < KW; ++kx) {
                    std::int64_t ix = ox + kx - pad;
                    if (ix < 0 || ix >= Wd) { src += C; continue; }
                    T* dst = dxp + ((b * H + iy) * Wd + ix) * C;
                    for (std::int64_t c = 0; c < C; ++c) dst[c] += *src++;
                  }
                }
              }
        }
      };
    }
    return r;
  }

  // 2x2 max pooling, stride 2. Requires even spatial extents.
  Var<T> maxpool2(Var<T> x) {
    const auto& X = x.value();
    if (X.shape.size() != 4) throw ShapeError("maxpool2: input must be [B,H,W,C]");
    std::int64_t B = X.shape[0], H = X.shape[1], W = X.shape[2], C = X.shape[3];
    if (H % 2 != 0 || W % 2 != 0) throw ShapeError("maxpool2: odd spatial extent");
    std::int64_t Ho = H / 2, Wo = W / 2;
    Tensor<T> out({B, Ho, Wo, C});
    auto arg = std::make_shared<std::vector<std::int64_t>>(out.data.size());
    const T* xp = X.data.data();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t oy = 0; oy < Ho; ++oy)
        for (std::int64_t ox = 0; ox < Wo; ++ox)
          for (std::int64_t c = 0; c < C; ++c) {
            T best{};
            std::int64_t bi = -1;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                std::int64_t idx = ((b * H + 2 * oy + dy) * W + 2 * ox + dx) * C + c;
                if (bi < 0 || xp[idx] > best) { best = xp[idx]; bi = idx; }
              }
            std::int64_t o = ((b * Ho + oy) * Wo + ox) * C + c;
            out[o] = best;
            (*arg)[static_cast<std::size_t>(o)] = bi;
          }
    Var<T> r = make("maxpool2", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id, arg](Graph& g, int self) {
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        for (std::int64_t i = 0; i < gr.numel(); ++i)
          dx[(*arg)[static_cast<std::size_t>(i)]] += gr[i];
      };
    }
    return r;
  }

  // ---- shape ops ----

  Var<T> reshape(Var<T> x, Shape s) {
    if (shape_numel(s) != x.value().numel())
      throw ShapeError("reshape: numel mismatch " + shape_str(x.shape()) + " -> " +
                       shape_str(s));
    Tensor<T> out(std::move(s), x.value().data);
    Var<T> r = make("reshape", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id](Graph& g, int self) {
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        for (std::int64_t i = 0; i < gr.numel(); ++i) dx[i] += gr[i];
      };
    }
    return r;
  }

  // Concatenate along axis 0. All inputs must agree on trailing extents.
  Var<T> concat0(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw DomainError("concat0: no inputs");
    Shape tail(xs[0].shape().begin() + 1, xs[0].shape().end());
    std::int64_t rows = 0;
    bool rg = false;
    std::vector<int> ids;
    for (const auto& v : xs) {
      Shape t(v.shape().begin() + 1, v.shape().end());
      if (t != tail) throw ShapeError("concat0: trailing shape mismatch");
      rows += v.shape()[0];
      rg = rg || needs(v);
      ids.push_back(v.id);
    }
    Shape os = tail;
    os.insert(os.begin(), rows);
    Tensor<T> out(std::move(os));
    std::int64_t off = 0;
    for (const auto& v : xs) {
      const auto& d = v.value().data;
      std::copy(d.begin(), d.end(), out.data.begin() + off);
      off += v.value().numel();
    }
    Var<T> r = make("concat0", std::move(out), rg, ids);
    if (rg) {
      node(r.id).backward_fn = [ids](Graph& g, int self) {
        const auto& gr = g.node(self).grad;
        std::int64_t off = 0;
        for (int id : ids) {
          std::int64_t n = g.node(id).value.numel();
          if (g.needs_id(id)) {
            auto& dx = g.grad_buf(id);
            for (std::int64_t i = 0; i < n; ++i) dx[i] += gr[off + i];
          }
          off += n;
        }
      };
    }
    return r;
  }

  // Rows [offset, offset+len) along axis 0.
  Var<T> slice0(Var<T> x, std::int64_t offset, std::int64_t len) {
    const auto& X = x.value();
    if (X.shape.empty() || offset < 0 || len <= 0 || offset + len > X.shape[0])
      throw ShapeError("slice0: range out of bounds");
    std::int64_t rs = X.row_size();
    Shape os = X.shape;
    os[0] = len;
    Tensor<T> out(std::move(os));
    std::copy(X.data.begin() + offset * rs, X.data.begin() + (offset + len) * rs,
              out.data.begin());
    Var<T> r = make("slice0", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id, offset, rs, len](Graph& g, int self) {
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        for (std::int64_t i = 0; i < len * rs; ++i) dx[offset * rs + i] += gr[i];
      };
    }
    return r;
  }

  // Column subset of a [R,C] matrix.
  Var<T> select_cols(Var<T> x, const std::vector<std::int64_t>& cols) {
    const auto& X = x.value();
    if (X.shape.size() != 2) throw ShapeError("select_cols: input must be 2-D");
    if (cols.empty()) throw DomainError("select_cols: empty index set");
    for (auto c : cols)
      if (c < 0 || c >= X.shape[1])
        throw DomainError("select_cols: index " + std::to_string(c) + " out of range");
    std::int64_t R = X.shape[0], C = X.shape[1];
    std::int64_t K = static_cast<std::int64_t>(cols.size());
    Tensor<T> out({R, K});
    for (std::int64_t r = 0; r < R; ++r)
      for (std::int64_t j = 0; j < K; ++j) out[r * K + j] = X[r * C + cols[j]];
    Var<T> v = make("select_cols", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(v.id).backward_fn = [xi = x.id, cols, R, C, K](Graph& g, int self) {
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        for (std::int64_t r = 0; r < R; ++r)
          for (std::int64_t j = 0; j < K; ++j) dx[r * C + cols[j]] += gr[r * K + j];
      };
    }
    return v;
  }

  // ---- reductions ----

  Var<T> sum_all(Var<T> x) { return reduce_lin("sum", x, T(1)); }
  Var<T> mean_all(Var<T> x) {
    return reduce_lin("mean", x, T(1) / static_cast<T>(x.value().numel()));
  }

  Var<T> min_all(Var<T> x) { return reduce_extreme("min", x, false); }
  Var<T> max_all(Var<T> x) { return reduce_extreme("max", x, true); }

  // [R,C] -> [R]: mean over each row.
  Var<T> row_mean(Var<T> x) {
    const auto& X = x.value();
    if (X.shape.size() < 2) throw ShapeError("row_mean: input must have rank >= 2");
    std::int64_t R = X.shape[0], C = X.row_size();
    Tensor<T> out({R});
    for (std::int64_t r = 0; r < R; ++r) {
      double acc = 0;
      for (std::int64_t c = 0; c < C; ++c) acc += static_cast<double>(X[r * C + c]);
      out[r] = static_cast<T>(acc / static_cast<double>(C));
    }
    Var<T> v = make("row_mean", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(v.id).backward_fn = [xi = x.id, R, C](Graph& g, int self) {
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        T inv = T(1) / static_cast<T>(C);
        for (std::int64_t r = 0; r < R; ++r)
          for (std::int64_t c = 0; c < C; ++c) dx[r * C + c] += gr[r] * inv;
      };
    }
    return v;
  }

  // [R,C] -> [C]: mean over each column.
  Var<T> col_mean(Var<T> x) {
    const auto& X = x.value();
    if (X.shape.size() != 2) throw ShapeError("col_mean: input must be 2-D");
    std::int64_t R = X.shape[0], C = X.shape[1];
    Tensor<T> out({C});
    for (std::int64_t c = 0; c < C; ++c) {
      double acc = 0;
      for (std::int64_t r = 0; r < R; ++r) acc += static_cast<double>(X[r * C + c]);
      out[c] = static_cast<T>(acc / static_cast<double>(R));
    }
    Var<T> v = make("col_mean", std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(v.id).backward_fn = [xi = x.id, R, C](Graph& g, int self) {
        const auto& gr = g.node(self).grad;
        auto& dx = g.grad_buf(xi);
        T inv = T(1) / static_cast<T>(R);
        for (std::int64_t r = 0; r < R; ++r)
          for (std::int64_t c = 0; c < C; ++c) dx[r * C + c] += gr[c] * inv;
      };
    }
    return v;
  }

  // ---- backward ----

  // Accumulates d(loss)/d(param) into the ParameterSet gradients for every
  // parameter leaf in the tape. loss must be scalar.
  void backward(Var<T> loss, ParameterSet<T>* ps = nullptr) {
    if (loss.g != this) throw ContractError("backward: loss from another graph");
    if (loss.value().numel() != 1) throw ContractError("backward: loss must be scalar");
    grad_buf(loss.id)[0] = T(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.data.empty() || !n.requires_grad) continue;
      if (n.backward_fn) n.backward_fn(*this, id);
    }
    if (ps) {
      for (auto& n : nodes_) {
        if (n.param_name.empty() || n.grad.data.empty()) continue;
        auto& g = ps->grad(n.param_name);
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) g[i] += n.grad[i];
      }
    }
  }

  // Gradient buffer of a node, allocated on first touch.
  std::vector<T>& grad_buf(int id) {
    Node& n = node(id);
    if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.value.shape);
    return n.grad.data;
  }

  bool needs_id(int id) const { return node(id).requires_grad; }

 private:
  bool needs(Var<T> v) const { return node(v.id).requires_grad; }

  Var<T> make(const char* op, Tensor<T> value, bool requires_grad,
              std::vector<int> /*inputs*/) {
    if (!value.all_finite())
      throw NumericError(std::string("non-finite value produced by op '") + op + "'");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.op = op;
    nodes_.push_back(std::move(n));
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  template <typename FwdFn, typename DaFn, typename DbFn>
  Var<T> binary(const char* op, Var<T> a, Var<T> b, FwdFn fwd, DaFn da, DbFn db) {
    const auto& A = a.value();
    const auto& B = b.value();
    Bcast k;
    if (same_shape(A.shape, B.shape)) k = Bcast::Same;
    else if (B.numel() == 1) k = Bcast::RhsScalar;
    else if (A.numel() == 1) k = Bcast::LhsScalar;
    else if (B.shape.size() == 1 && !A.shape.empty() && B.shape[0] == A.shape.back())
      k = Bcast::RhsRow;
    else
      throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(A.shape) +
                       " vs " + shape_str(B.shape));

    const Tensor<T>& big = (k == Bcast::LhsScalar) ? B : A;
    Tensor<T> out(big.shape);
    std::int64_t n = out.numel();
    std::int64_t row = (k == Bcast::RhsRow) ? B.numel() : 0;
    for (std::int64_t i = 0; i < n; ++i) {
      T x = (k == Bcast::LhsScalar) ? A[0] : A[i];
      T y = (k == Bcast::Same) ? B[i]
          : (k == Bcast::RhsScalar || k == Bcast::LhsScalar)
              ? ((k == Bcast::LhsScalar) ? B[i] : B[0])
              : B[i % row];
      out[i] = fwd(x, y);
    }
    Var<T> r = make(op, std::move(out), needs(a) || needs(b), {a.id, b.id});
    if (node(r.id).requires_grad) {
      node(r.id).backward_fn = [ai = a.id, bi = b.id, k, row, da, db](Graph& g, int self) {
        const auto& A = g.node(ai).value;
        const auto& B = g.node(bi).value;
        const auto& gr = g.node(self).grad;
        std::int64_t n = gr.numel();
        auto xa = [&](std::int64_t i) { return (k == Bcast::LhsScalar) ? A[0] : A[i]; };
        auto xb = [&](std::int64_t i) {
          return (k == Bcast::Same) ? B[i]
               : (k == Bcast::RhsScalar) ? B[0]
               : (k == Bcast::LhsScalar) ? B[i] : B[i % row];
        };
        if (g.needs_id(ai)) {
          auto& dx = g.grad_buf(ai);
          if (k == Bcast::LhsScalar) {
            for (std::int64_t i = 0; i < n; ++i) dx[0] += da(xa(i), xb(i), gr[i]);
          } else {
            for (std::int64_t i = 0; i < n; ++i) dx[i] += da(xa(i), xb(i), gr[i]);
          }
        }
        if (g.needs_id(bi)) {
          auto& dx = g.grad_buf(bi);
          if (k == Bcast::Same || k == Bcast::LhsScalar) {
            for (std::int64_t i = 0; i < n; ++i) dx[i] += db(xa(i), xb(i), gr[i]);
          } else if (k == Bcast::RhsScalar) {
            for (std::int64_t i = 0; i < n; ++i) dx[0] += db(xa(i), xb(i), gr[i]);
          } else {
            for (std::int64_t i = 0; i < n; ++i) dx[i % row] += db(xa(i), xb(i), gr[i]);
          }
        }
      };
    }
    return r;
  }

  Var<T> reduce_lin(const char* op, Var<T> x, T w) {
    const auto& X = x.value();
    double acc = 0;
    for (const T& v : X.data) acc += static_cast<double>(v);
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc * static_cast<double>(w)));
    Var<T> r = make(op, std::move(out), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id, w](Graph& g, int self) {
        T gr = g.node(self).grad[0] * w;
        auto& dx = g.grad_buf(xi);
        for (auto& v : dx) v += gr;
      };
    }
    return r;
  }

  Var<T> reduce_extreme(const char* op, Var<T> x, bool is_max) {
    const auto& X = x.value();
    if (X.numel() == 0) throw DomainError(std::string(op) + ": empty input");
    std::int64_t arg = 0;
    for (std::int64_t i = 1; i < X.numel(); ++i)
      if (is_max ? X[i] > X[arg] : X[i] < X[arg]) arg = i;
    Var<T> r = make(op, Tensor<T>::scalar(X[arg]), needs(x), {x.id});
    if (needs(x)) {
      node(r.id).backward_fn = [xi = x.id, arg](Graph& g, int self) {
        g.grad_buf(xi)[arg] += g.node(self).grad[0];
      };
    }
    return r;
  }

  template <typename Fn>
  void accumulate(int id, const Tensor<T>& grad_in, Fn&& fn) {
    auto& dx = grad_buf(id);
    const auto& x = node(id).value;
    for (std::int64_t i = 0; i < grad_in.numel(); ++i) dx[i] += fn(grad_in[i], x[i]);
  }

  std::vector<Node> nodes_;
};

// Operator sugar over Var handles.
template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return a.g->add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return a.g->sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return a.g->mul(a, b); }
template <typename T> Var<T> operator/(Var<T> a, Var<T> b) { return a.g->div(a, b); }

struct FdOptions {
  double step = 1e-3;
  int samples_per_param = 4;
  // Parameters whose analytic gradient magnitude falls below this floor are
  // not sampled; the relative-error formula is meaningless under the forward
  // pass quantization noise there. The float64 suites run with floor 0.
  double min_analytic = 0.0;
  std::uint64_t seed = 17;
};

// Central-difference gradient verification: rebuilds the loss through
// `build` with perturbed parameters and reports
// max |analytic - numeric| / (|numeric| + 1e-8) over the sampled entries.
template <typename T>
double finite_diff_check(const std::function<Var<T>(Graph<T>&)>& build,
                         ParameterSet<T>& params, const FdOptions& opt = {},
                         int* n_checked = nullptr) {
  if (opt.step <= 0) throw DomainError("finite_diff_check: step must be positive");
  params.zero_grads();
  {
    Graph<T> g;
    Var<T> loss = build(g);
    g.backward(loss, &params);
  }
  auto eval = [&]() {
    Graph<T> g;
    return static_cast<double>(build(g).scalar());
  };
  Rng rng(opt.seed);
  double worst = 0.0;
  params.for_each([&](const std::string&, typename ParameterSet<T>::Entry& e) {
    if (!e.trainable) return;
    std::int64_t n = e.value.numel();
    for (int s = 0; s < opt.samples_per_param; ++s) {
      std::int64_t i = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n)));
      double analytic = static_cast<double>(e.grad[i]);
      if (std::abs(analytic) < opt.min_analytic) continue;
      T saved = e.value[i];
      e.value[i] = saved + static_cast<T>(opt.step);
      double fp = eval();
      e.value[i] = saved - static_cast<T>(opt.step);
      double fm = eval();
      e.value[i] = saved;
      double numeric = (fp - fm) / (2.0 * opt.step);
      double rel = std::abs(analytic - numeric) / (std::abs(numeric) + 1e-8);
      worst = std::max(worst, rel);
      if (n_checked) ++*n_checked;
    }
  });
  return worst;
}

}  // namespace ltnvae

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ltnvae/autodiff.hpp"
#include "ltnvae/checkpoint.hpp"
#include "ltnvae/vae.hpp"
#include "test_util.hpp"

using namespace ltnvae;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(s));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Per-operator gradient probes: each builds a scalar loss that weights the
// op output with a fixed random sign pattern so gradients stay O(1).
template <typename T>
std::vector<std::pair<const char*, std::function<Var<T>(Graph<T>&, ParameterSet<T>&)>>>
op_probes() {
  using Build = std::function<Var<T>(Graph<T>&, ParameterSet<T>&)>;
  std::vector<std::pair<const char*, Build>> probes;
  auto weighted_sum = [](Graph<T>& g, Var<T> x, std::uint64_t seed) {
    Rng r(seed);
    Tensor<T> w(x.value().shape);
    // Signed magnitudes bounded away from zero: no weight subset can cancel
    // exactly, so every sampled analytic gradient is genuinely nonzero.
    for (auto& v : w.data) {
      double m = r.uniform(0.5, 1.5);
      v = static_cast<T>(r.uniform() < 0.5 ? -m : m);
    }
    return g.sum_all(x * g.constant(std::move(w)));
  };
  probes.emplace_back("add", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.param(ps, "a") + g.param(ps, "b"), 1);
  });
  probes.emplace_back("sub", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.param(ps, "a") - g.param(ps, "b"), 2);
  });
  probes.emplace_back("mul", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.param(ps, "a") * g.param(ps, "b"), 3);
  });
  probes.emplace_back("div", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    Var<T> b = g.affine(g.param(ps, "b"), T(1), T(3));  // keep away from 0
    return weighted_sum(g, g.param(ps, "a") / b, 4);
  });
  probes.emplace_back("scalar broadcast", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.param(ps, "a") * g.param(ps, "s"), 5);
  });
  probes.emplace_back("row broadcast", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.reshape(g.param(ps, "a"), {6, 4}) + g.param(ps, "row"), 6);
  });
  probes.emplace_back("exp", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.vexp(g.param(ps, "a")), 7);
  });
  probes.emplace_back("sigmoid", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.sigmoid(g.param(ps, "a")), 8);
  });
  probes.emplace_back("relu", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.relu(g.param(ps, "shifted")), 9);
  });
  probes.emplace_back("pow", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.pow_c(g.affine(g.param(ps, "a"), T(1), T(2)), 1.7), 10);
  });
  probes.emplace_back("matmul", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(
        g, g.matmul(g.reshape(g.param(ps, "a"), {4, 6}), g.param(ps, "m")), 11);
  });
  probes.emplace_back("conv2d", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.conv2d(g.param(ps, "img"), g.param(ps, "kern"), 1), 12);
  });
  probes.emplace_back("maxpool2", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    return weighted_sum(g, g.maxpool2(g.param(ps, "pool_in")), 13);
  });
  probes.emplace_back("reductions", [](Graph<T>& g, ParameterSet<T>& ps) {
    // min/max are piecewise linear: probe them on the margin-separated input
    // so the central difference stays on one linear piece.
    Var<T> a = g.param(ps, "a");
    Var<T> m = g.param(ps, "shifted");
    return g.sum_all(g.concat0(std::vector<Var<T>>{
        g.mean_all(a), g.sum_all(g.pow_c(a * a, 1.0)), g.min_all(m), g.max_all(m)}));
  });
  probes.emplace_back("row/col means", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    Var<T> m = g.reshape(g.param(ps, "a"), {6, 4});
    return weighted_sum(g, g.concat0(std::vector<Var<T>>{g.row_mean(m), g.col_mean(m)}), 14);
  });
  probes.emplace_back("slice/select/concat", [weighted_sum](Graph<T>& g, ParameterSet<T>& ps) {
    Var<T> m = g.reshape(g.param(ps, "a"), {6, 4});
    Var<T> top = g.slice0(m, 0, 3);
    Var<T> cols = g.select_cols(m, {1, 3});
    return weighted_sum(g, g.concat0(std::vector<Var<T>>{g.row_mean(top), g.row_mean(cols)}),
                        15);
  });
  return probes;
}

template <typename T>
ParameterSet<T> probe_params(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet<T> ps;
  ps.add("a", random_tensor<T>({24}, rng, 0.1, 0.9));
  ps.add("b", random_tensor<T>({24}, rng, 0.1, 0.9));
  ps.add("s", random_tensor<T>({1}, rng, 0.5, 1.5));
  ps.add("row", random_tensor<T>({4}, rng, -0.5, 0.5));
  ps.add("m", random_tensor<T>({6, 5}, rng, -0.7, 0.7));
  ps.add("img", random_tensor<T>({2, 6, 6, 3}, rng, -0.8, 0.8));
  ps.add("kern", random_tensor<T>({3, 3, 3, 4}, rng, -0.5, 0.5));
  // Pool/relu inputs keep a margin away from ties and kinks so central
  // differences stay on one linear piece.
  Tensor<T> pool({1, 4, 4, 2});
  Tensor<T> shifted({24});
  for (std::int64_t i = 0; i < pool.numel(); ++i)
    pool[i] = static_cast<T>(0.37 * static_cast<double>((i * 7) % 32) - 4.0);
  for (std::int64_t i = 0; i < shifted.numel(); ++i)
    shifted[i] = static_cast<T>(i % 2 == 0 ? 0.5 + 0.1 * static_cast<double>(i)
                                           : -0.5 - 0.1 * static_cast<double>(i));
  ps.add("pool_in", std::move(pool));
  ps.add("shifted", std::move(shifted));
  return ps;
}

}  // namespace

TEST_CASE("tensor basics and shape validation") {
  Tensor<double> t({2, 3});
  CHECK(t.numel() == 6);
  CHECK_THROWS_AS(Tensor<double>({0, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor<double>({2, 2}, {1.0, 2.0}), ShapeError);
  Graph<double> g;
  auto a = g.constant(Tensor<double>({2, 2}, {1, 2, 3, 4}));
  auto b = g.constant(Tensor<double>({4}, {1, 2, 3, 4}));
  CHECK_THROWS_AS(g.matmul(a, a) + b, ShapeError);  // [2,2] vs [4]
  CHECK_THROWS_AS(g.matmul(b, b), ShapeError);
  CHECK_THROWS_AS(g.reshape(a, {3, 3}), ShapeError);
  CHECK_THROWS_AS(g.maxpool2(a), ShapeError);
}

TEST_CASE("forward values of core ops") {
  Graph<double> g;
  auto a = g.constant(Tensor<double>({2, 2}, {1, 2, 3, 4}));
  auto b = g.constant(Tensor<double>({2, 2}, {5, 6, 7, 8}));
  auto prod = g.matmul(a, b);
  CHECK(prod.value().data == std::vector<double>{19, 22, 43, 50});
  CHECK(g.mean_all(a).scalar() == doctest::Approx(2.5));
  CHECK(g.min_all(a).scalar() == 1.0);
  CHECK(g.max_all(b).scalar() == 8.0);
  auto pooled = g.maxpool2(g.constant(Tensor<double>({1, 2, 2, 1}, {1, 7, 3, 2})));
  CHECK(pooled.value().data == std::vector<double>{7});
  auto rm = g.row_mean(a);
  CHECK(rm.value().data == std::vector<double>{1.5, 3.5});
  auto cm = g.col_mean(a);
  CHECK(cm.value().data == std::vector<double>{2, 3});
}

TEST_CASE("conv2d matches a hand-computed case") {
  Graph<double> g;
  // 3x3 single-channel input, identity-ish 3x3 kernel with one off-center tap
  Tensor<double> img({1, 3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> kern({3, 3, 1, 1}, {0, 0, 0, 0, 1, 0, 0, 0, 2});
  auto out = g.conv2d(g.constant(img), g.constant(kern), 1);
  // out(y,x) = in(y,x) + 2*in(y+1,x+1), zero padded
  CHECK(out.value().data == std::vector<double>{1 + 10, 2 + 12, 3, 4 + 16, 5 + 18, 6, 7, 8, 9});
}

TEST_CASE("backward contract: constants and linear cases") {
  ParameterSet<double> ps;
  Rng rng(5);
  ps.add("w", random_tensor<double>({3, 3}, rng));
  {
    Graph<double> g;
    auto loss = g.scalar_const(3.0);
    ps.zero_grads();
    g.backward(loss, &ps);
    for (double v : ps.grad("w").data) CHECK(v == 0.0);
  }
  {
    Graph<double> g;
    auto loss = g.sum_all(g.param(ps, "w"));
    ps.zero_grads();
    g.backward(loss, &ps);
    for (double v : ps.grad("w").data) CHECK(v == 1.0);
  }
  {
    Graph<double> g;
    auto v = g.param(ps, "w");
    CHECK_THROWS_AS(g.backward(v, &ps), ContractError);  // non-scalar loss
  }
}

TEST_CASE("every backend operator passes float64 gradient checks") {
  auto ps = probe_params<double>(101);
  FdOptions opt;
  opt.step = 1e-6;
  opt.samples_per_param = 6;
  for (auto& [name, build] : op_probes<double>()) {
    CAPTURE(name);
    auto bound = [&, b = build](Graph<double>& g) { return b(g, ps); };
    CHECK(finite_diff_check<double>(bound, ps, opt) < 1e-6);
  }
}

TEST_CASE("every backend operator passes float32 gradient checks") {
  auto ps = probe_params<float>(101);
  FdOptions opt;
  opt.step = 1e-2;
  opt.samples_per_param = 6;
  // Gradients below ~0.02 cannot be resolved to 0.1% through a float32
  // forward pass (quantization ~1e-7 against step * gradient); the float64
  // suite above covers those with no floor.
  opt.min_analytic = 2e-2;
  for (auto& [name, build] : op_probes<float>()) {
    CAPTURE(name);
    auto bound = [&, b = build](Graph<float>& g) { return b(g, ps); };
    int checked = 0;
    CHECK(finite_diff_check<float>(bound, ps, opt, &checked) < 1e-3);
    CHECK(checked > 0);
  }
}

TEST_CASE("random 3-layer net gradients match finite differences") {
  Rng rng(7);
  ParameterSet<float> ps;
  ps.add("w1", random_tensor<float>({8 * 8, 16}, rng, -0.3, 0.3));
  ps.add("b1", random_tensor<float>({16}, rng, -0.1, 0.1));
  ps.add("w2", random_tensor<float>({16, 8}, rng, -0.4, 0.4));
  ps.add("b2", random_tensor<float>({8}, rng, -0.1, 0.1));
  ps.add("w3", random_tensor<float>({8, 1}, rng, -0.5, 0.5));
  Tensor<float> x = random_tensor<float>({4, 8 * 8}, rng, 0.0, 1.0);
  auto build = [&](Graph<float>& g) {
    auto h1 = g.sigmoid(g.matmul(g.constant(x), g.param(ps, "w1")) + g.param(ps, "b1"));
    auto h2 = g.sigmoid(g.matmul(h1, g.param(ps, "w2")) + g.param(ps, "b2"));
    return g.mean_all(g.matmul(h2, g.param(ps, "w3")));
  };
  FdOptions opt;
  opt.step = 1e-2;
  opt.samples_per_param = 8;
  opt.min_analytic = 2e-2;
  int checked = 0;
  CHECK(finite_diff_check<float>(build, ps, opt, &checked) < 1e-3);
  CHECK(checked >= 4);
}

TEST_CASE("finite_diff_check rejects a zero step") {
  ParameterSet<double> ps;
  ps.add("x", Tensor<double>::scalar(1.0));
  auto build = [&](Graph<double>& g) { return g.param(ps, "x"); };
  FdOptions opt;
  opt.step = 0.0;
  CHECK_THROWS_AS(finite_diff_check<double>(build, ps, opt), DomainError);
}

TEST_CASE("identity graph has zero finite-difference error") {
  ParameterSet<double> ps;
  ps.add("x", Tensor<double>::scalar(0.7));
  auto build = [&](Graph<double>& g) { return g.param(ps, "x"); };
  FdOptions opt;
  opt.step = 1e-4;
  CHECK(finite_diff_check<double>(build, ps, opt) < 1e-10);
}

TEST_CASE("non-finite intermediates are reported with the op") {
  Graph<double> g;
  auto x = g.constant(Tensor<double>::scalar(1000.0));
  try {
    g.vexp(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("exp") != std::string::npos);
  }
}

TEST_CASE("determinism: identical seeds give bit-identical outputs") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    ParameterSet<float> ps;
    ps.add("w", random_tensor<float>({10, 10}, rng));
    Graph<float> g;
    auto y = g.sigmoid(g.matmul(g.param(ps, "w"), g.param(ps, "w")));
    return y.value().data;
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}

TEST_CASE("checkpoint round trip is exact and self-describing") {
  ArchitectureConfig arch;
  arch.height = 8;
  arch.width = 8;
  arch.conv_depths = {4};
  arch.dense_widths = {16};
  arch.latent = 5;
  auto model = VaeModel<float>::init(arch, 99);
  auto dir = std::filesystem::temp_directory_path() / "ltnvae_ckpt_test";
  std::filesystem::create_directories(dir);
  std::string stem = (dir / "model").string();
  save_checkpoint(stem, model, {{"seed", 99}});

  auto meta = load_checkpoint_meta(stem);
  CHECK(meta.at("dtype") == "float32");
  CHECK(meta.at("arch").at("latent") == 5);
  CHECK(meta.at("seed") == 99);

  auto loaded = load_checkpoint<float>(stem);
  bool all_equal = true;
  model.params().for_each([&](const std::string& name, const auto& e) {
    all_equal = all_equal && loaded.params().value(name).data == e.value.data;
    all_equal = all_equal && loaded.params().trainable(name) == e.trainable;
  });
  CHECK(all_equal);
  CHECK_THROWS_AS(load_checkpoint<double>(stem), IoError);  // dtype mismatch
  auto as_double = load_checkpoint_as_double(stem);
  CHECK(as_double.params().value("enc.mu.b").numel() == 5);
  std::filesystem::remove_all(dir);
}

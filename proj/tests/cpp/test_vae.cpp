#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ltnvae/vae.hpp"
#include "test_util.hpp"

using namespace ltnvae;

namespace {

ArchitectureConfig tiny_arch() {
  ArchitectureConfig a;
  a.height = 8;
  a.width = 8;
  a.channels = 1;
  a.conv_depths = {4};
  a.dense_widths = {16, 8};
  a.latent = 5;
  return a;
}

ImageTensor noise_image(int h, int w, int c, Rng& rng) {
  ImageTensor img(h, w, c);
  for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("latent code invariants") {
  CHECK_THROWS_AS(LatentCode({1.0}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(LatentCode({std::nan("")}, {0.0}), NumericError);
  LatentCode c({0.5, -0.5}, {0.0, 1.0});
  CHECK(c.size() == 2);
}

TEST_CASE("rec predicate: identity, hand value, quadratic scaling, permutation") {
  ImageTensor ones(2, 2, 1), zeros(2, 2, 1);
  for (auto& p : ones.pixels) p = 1.0f;
  CHECK(rec_predicate(ones, ones) == 0.0);
  CHECK(rec_predicate(ones, zeros) == doctest::Approx(1.0));

  Rng rng(21);
  ImageTensor a = noise_image(4, 4, 1, rng);
  ImageTensor mid(4, 4, 1), far(4, 4, 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    mid.pixels[i] = a.pixels[i] * 0.5f;  // error field e
    far.pixels[i] = 0.0f;                // error field 2e
  }
  CHECK(rec_predicate(a, far) == doctest::Approx(4.0 * rec_predicate(a, mid)));

  // simultaneous pixel permutation leaves the value unchanged
  ImageTensor pa = a, pb = mid;
  std::vector<std::size_t> perm(a.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    pa.pixels[i] = a.pixels[perm[i]];
    pb.pixels[i] = mid.pixels[perm[i]];
  }
  CHECK(rec_predicate(pa, pb) == doctest::Approx(rec_predicate(a, mid)).epsilon(1e-12));

  ImageTensor other(2, 4, 1);
  CHECK_THROWS_AS(rec_predicate(a, other), ShapeError);
}

TEST_CASE("klu hand values and Monte-Carlo agreement") {
  CHECK(klu(LatentCode({0, 0}, {0, 0}), {0, 1}) == 0.0);
  CHECK(klu(LatentCode({1}, {0}), {0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(klu(LatentCode({0}, {std::log(2.0)}), {0}) ==
        doctest::Approx(0.15343).epsilon(1e-4));
  CHECK_THROWS_AS(klu(LatentCode({0}, {0}), DimSet{}), DomainError);
  CHECK_THROWS_AS(klu(LatentCode({0}, {0}), DimSet{3}), DomainError);

  Rng rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    double mu = rng.uniform(-1, 1), lg = rng.uniform(-0.7, 0.7);
    double mc = testutil::mc_kl_gaussian(mu, lg, 0.0, 0.0, 100000, rng);
    CHECK(std::abs(klu(LatentCode({mu}, {lg}), {0}) - mc) < 1e-2);
  }
}

TEST_CASE("klt hand values, Monte-Carlo agreement and asymmetry") {
  LatentCode a({0}, {0});
  CHECK(klt(a, a, {0}) == 0.0);
  CHECK(klt(a, LatentCode({1}, {0}), {0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(klt(a, LatentCode({0}, {std::log(2.0)}), {0}) ==
        doctest::Approx(0.09657).epsilon(1e-4));

  // klt is not symmetric
  LatentCode b({0.7}, {0.9});
  CHECK(klt(a, b, {0}) != doctest::Approx(klt(b, a, {0})).epsilon(1e-6));

  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    double m1 = rng.uniform(-1, 1), l1 = rng.uniform(-0.7, 0.7);
    double m2 = rng.uniform(-1, 1), l2 = rng.uniform(-0.7, 0.7);
    double mc = testutil::mc_kl_gaussian(m1, l1, m2, l2, 100000, rng);
    CHECK(std::abs(klt(LatentCode({m1}, {l1}), LatentCode({m2}, {l2}), {0}) - mc) < 1e-2);
  }
}

TEST_CASE("klu equals klt against the standard-normal code") {
  Rng rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> mu(6), lg(6);
    for (auto& v : mu) v = rng.uniform(-2, 2);
    for (auto& v : lg) v = rng.uniform(-1.5, 1.5);
    LatentCode code(mu, lg);
    LatentCode prior = LatentCode::standard_normal(6);
    DimSet dims = {0, 2, 5};
    CHECK(std::abs(klu(code, dims) - klt(code, prior, dims)) < 1e-10);
    // Gibbs: both divergences are nonnegative
    CHECK(klu(code, dims) >= 0.0);
    LatentCode other({rng.uniform(-2, 2)}, {rng.uniform(-1, 1)});
    CHECK(klt(LatentCode({mu[0]}, {lg[0]}), other, {0}) >= 0.0);
  }
}

TEST_CASE("projection restricts codes and partitions indices") {
  std::vector<double> mu(30), lg(30);
  for (std::size_t i = 0; i < 30; ++i) {
    mu[i] = static_cast<double>(i);
    lg[i] = -static_cast<double>(i);
  }
  LatentCode code(mu, lg);
  DimSet all(30);
  for (std::size_t i = 0; i < 30; ++i) all[i] = static_cast<std::int64_t>(i);
  auto full = project(code, all);
  CHECK(full.mu == code.mu);

  auto dim3 = project(code, {3});
  CHECK(dim3.size() == 1);
  CHECK(dim3.mu[0] == 3.0);

  auto rest = complement_dims({3}, 30);
  CHECK(rest.size() == 29);
  auto proj_rest = project(code, rest);
  CHECK(proj_rest.size() == 29);
  for (auto d : rest) CHECK(d != 3);
  CHECK_THROWS_AS(project(code, {30}), DomainError);
}

TEST_CASE("sampling: zero noise, unit sigma, linearity in mu") {
  LatentCode code({0.5, -1.0}, {0.0, 2.0});
  auto z0 = sample_latent(code, {0.0, 0.0});
  CHECK(z0 == code.mu);
  LatentCode unit({0.0, 0.0}, {0.0, 0.0});
  auto z1 = sample_latent(unit, {0.3, -0.2});
  CHECK(z1[0] == doctest::Approx(0.3));
  CHECK(z1[1] == doctest::Approx(-0.2));
  CHECK_THROWS_AS(sample_latent(code, {0.0}), ShapeError);

  // gradient of z wrt mu is the identity map
  Graph<double> g;
  ParameterSet<double> ps;
  ps.add("mu", Tensor<double>({1, 2}, {0.5, -1.0}));
  auto mu = g.param(ps, "mu");
  auto lg = g.constant(Tensor<double>({1, 2}, {0.0, 2.0}));
  auto eps = g.constant(Tensor<double>({1, 2}, {0.7, 0.3}));
  auto z = mu + g.vexp(g.affine(lg, 0.5, 0.0)) * eps;
  ps.zero_grads();
  g.backward(g.sum_all(z), &ps);
  CHECK(ps.grad("mu").data == std::vector<double>{1.0, 1.0});
}

TEST_CASE("encode/decode shape, determinism and batching contracts") {
  auto arch = tiny_arch();
  auto model = VaeModel<double>::init(arch, 31);
  Rng rng(32);
  ImageTensor img = noise_image(8, 8, 1, rng);
  auto code = model.encode_one(img);
  CHECK(code.size() == 5);
  for (double v : code.mu) CHECK(std::isfinite(v));

  // identical inputs give identical codes
  auto code2 = model.encode_one(img);
  CHECK(code.mu == code2.mu);
  CHECK(code.logvar == code2.logvar);

  // batch encode preserves order; identical images in one batch get
  // identical codes (bit-equality across batch sizes is not promised: the
  // GEMM kernel path depends on the extents)
  ImageTensor img2 = noise_image(8, 8, 1, rng);
  auto codes = model.encode({&img, &img2, &img});
  CHECK(codes[1].mu != codes[0].mu);
  for (std::size_t d = 0; d < code.size(); ++d) {
    CHECK(codes[0].mu[d] == doctest::Approx(codes[2].mu[d]).epsilon(1e-12));
    CHECK(codes[0].mu[d] == doctest::Approx(code.mu[d]).epsilon(1e-12));
  }

  // decode: range contract, determinism and order preservation
  std::vector<double> z1(5, 0.2), z2(5, -0.7);
  auto decoded = model.decode({z1, z2, z1});
  for (const auto& im : decoded) {
    CHECK(im.height == 8);
    im.validate_range();
  }
  CHECK(decoded[0].pixels == decoded[2].pixels);
  CHECK(decoded[0].pixels != decoded[1].pixels);

  ImageTensor wrong(4, 4, 1);
  CHECK_THROWS_AS(model.encode_one(wrong), ShapeError);
  CHECK_THROWS_AS(model.decode({{0.1, 0.2}}), ShapeError);
}

TEST_CASE("graph predicates agree with the closed forms") {
  Rng rng(33);
  std::int64_t b = 3, n = 4;
  Tensor<double> mu_a({b, n}), lg_a({b, n}), mu_b({b, n}), lg_b({b, n});
  for (auto* t : {&mu_a, &mu_b})
    for (auto& v : t->data) v = rng.uniform(-2, 2);
  for (auto* t : {&lg_a, &lg_b})
    for (auto& v : t->data) v = rng.uniform(-1, 1);

  Graph<double> g;
  auto klu_node = klu_rows(g, g.constant(mu_a), g.constant(lg_a));
  auto klt_node = klt_rows(g, g.constant(mu_a), g.constant(lg_a), g.constant(mu_b),
                           g.constant(lg_b));
  DimSet dims = {0, 1, 2, 3};
  for (std::int64_t r = 0; r < b; ++r) {
    std::vector<double> ma(n), la(n), mb(n), lb(n);
    for (std::int64_t d = 0; d < n; ++d) {
      ma[d] = mu_a[r * n + d];
      la[d] = lg_a[r * n + d];
      mb[d] = mu_b[r * n + d];
      lb[d] = lg_b[r * n + d];
    }
    CHECK(klu_node.value()[r] ==
          doctest::Approx(klu(LatentCode(ma, la), dims)).epsilon(1e-12));
    CHECK(klt_node.value()[r] ==
          doctest::Approx(klt(LatentCode(ma, la), LatentCode(mb, lb), dims)).epsilon(1e-12));
  }

  // rec rows against the image predicate
  ImageTensor x(2, 2, 1), y(2, 2, 1);
  for (std::size_t i = 0; i < 4; ++i) {
    x.pixels[i] = static_cast<float>(0.1 * static_cast<double>(i + 1));
    y.pixels[i] = static_cast<float>(0.9 - 0.2 * static_cast<double>(i));
  }
  Tensor<double> xt({1, 4}), yt({1, 4});
  for (std::size_t i = 0; i < 4; ++i) {
    xt[static_cast<std::int64_t>(i)] = x.pixels[i];
    yt[static_cast<std::int64_t>(i)] = y.pixels[i];
  }
  auto rec_node = rec_rows(g, g.constant(xt), g.constant(yt));
  CHECK(rec_node.value()[0] == doctest::Approx(rec_predicate(x, y)).epsilon(1e-12));
}

TEST_CASE("encoder and decoder pass gradient checks") {
  auto arch = tiny_arch();
  auto model = VaeModel<double>::init(arch, 34);
  Rng rng(35);
  Tensor<double> x({2, 8, 8, 1});
  for (auto& v : x.data) v = rng.uniform(0, 1);
  Tensor<double> eps({2, 5});
  for (auto& v : eps.data) v = rng.normal();

  auto build = [&](Graph<double>& g) {
    auto code = model.encode_graph(g, g.constant(x), /*training=*/true);
    auto z = model.sample_graph(g, code, g.constant(eps));
    auto xhat = model.decode_graph(g, z, /*training=*/true);
    auto xflat = g.reshape(g.constant(x), {2, 64});
    return g.mean_all(rec_rows(g, xflat, xhat) + klu_rows(g, code.mu, code.logvar));
  };
  FdOptions opt;
  opt.step = 1e-5;
  opt.samples_per_param = 4;
  CHECK(finite_diff_check<double>(build, model.params(), opt) < 1e-6);
}

TEST_CASE("architecture validation") {
  ArchitectureConfig bad = tiny_arch();
  bad.height = 10;  // second pool cannot halve 5
  bad.conv_depths = {4, 4};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = tiny_arch();
  bad.kernel = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = tiny_arch();
  bad.latent = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

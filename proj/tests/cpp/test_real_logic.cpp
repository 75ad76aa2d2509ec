#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ltnvae/real_logic.hpp"
#include "test_util.hpp"

using namespace ltnvae;
using logic::AggregatorConfig;
using logic::TruthTensor;

TEST_CASE("truth tensor validates its domain") {
  CHECK_THROWS_AS(TruthTensor(std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(TruthTensor({0.5, 1.2}), DomainError);
  CHECK_THROWS_AS(TruthTensor({-0.001}), DomainError);
  CHECK_NOTHROW(TruthTensor({0.0, 1.0, 0.5}));
  CHECK_THROWS_AS(AggregatorConfig(0.5), DomainError);
}

TEST_CASE("negation boundary cases and involution") {
  CHECK(logic::negate(TruthTensor({0.0}))[0] == doctest::Approx(1.0));
  CHECK(logic::negate(TruthTensor({0.25}))[0] == doctest::Approx(0.75));
  Rng rng(3);
  TruthTensor a(testutil::random_truths(64, rng));
  auto round_trip = logic::negate(logic::negate(a));
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(round_trip[i] == doctest::Approx(a[i]).epsilon(1e-15));
}

TEST_CASE("t-norm identity, annihilator and direct value") {
  TruthTensor a({0.3, 0.8});
  auto with_one = logic::tnorm(a, TruthTensor({1.0, 1.0}));
  CHECK(with_one[0] == doctest::Approx(0.3));
  CHECK(with_one[1] == doctest::Approx(0.8));
  CHECK(logic::tnorm(TruthTensor({0.5}), TruthTensor({0.5}))[0] == doctest::Approx(0.25));
  auto with_zero = logic::tnorm(a, TruthTensor({0.0, 0.0}));
  CHECK(with_zero[0] == 0.0);
  CHECK(with_zero[1] == 0.0);
  CHECK_THROWS_AS(logic::tnorm(a, TruthTensor({0.1})), ShapeError);
}

TEST_CASE("t-norm algebra on random tensors") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    TruthTensor a(testutil::random_truths(16, rng));
    TruthTensor b(testutil::random_truths(16, rng));
    TruthTensor c(testutil::random_truths(16, rng));
    auto ab = logic::tnorm(a, b);
    auto ba = logic::tnorm(b, a);
    for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == ba[i]);
    auto ab_c = logic::tnorm(ab, c);
    auto a_bc = logic::tnorm(a, logic::tnorm(b, c));
    for (std::size_t i = 0; i < ab_c.size(); ++i)
      CHECK(std::abs(ab_c[i] - a_bc[i]) < 1e-12);
  }
}

TEST_CASE("duality between t-norm and t-conorm") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    TruthTensor a(testutil::random_truths(8, rng));
    TruthTensor b(testutil::random_truths(8, rng));
    auto lhs = logic::tconorm(a, b);
    auto rhs = logic::negate(logic::tnorm(logic::negate(a), logic::negate(b)));
    for (std::size_t i = 0; i < lhs.size(); ++i)
      CHECK(std::abs(lhs[i] - rhs[i]) < 1e-12);
  }
  CHECK(logic::tconorm(TruthTensor({0.5}), TruthTensor({0.5}))[0] == doctest::Approx(0.75));
  CHECK(logic::tconorm(TruthTensor({0.7}), TruthTensor({0.0}))[0] == doctest::Approx(0.7));
  CHECK(logic::tconorm(TruthTensor({1.0}), TruthTensor({0.42}))[0] == doctest::Approx(1.0));
}

TEST_CASE("implication boundary cases") {
  CHECK(logic::implies(TruthTensor({1.0}), TruthTensor({0.37}))[0] == doctest::Approx(0.37));
  CHECK(logic::implies(TruthTensor({0.0}), TruthTensor({0.9}))[0] == doctest::Approx(1.0));
  CHECK(logic::implies(TruthTensor({0.5}), TruthTensor({0.5}))[0] == doctest::Approx(0.75));
}

TEST_CASE("aggregator fixed points and hand values") {
  AggregatorConfig p2;
  CHECK(logic::exists(TruthTensor({1.0, 1.0, 1.0}), p2) == doctest::Approx(1.0));
  CHECK(logic::forall(TruthTensor({1.0, 1.0, 1.0}), p2) == doctest::Approx(1.0));
  // ((1^2 + 0^2)/2)^(1/2) and its error-side dual
  CHECK(logic::exists(TruthTensor({1.0, 0.0}), p2) == doctest::Approx(0.70711).epsilon(1e-4));
  CHECK(logic::forall(TruthTensor({1.0, 0.0}), p2) == doctest::Approx(0.29289).epsilon(1e-4));
  // single element: identity for any p
  CHECK(logic::exists(TruthTensor({0.42}), p2) == doctest::Approx(0.42));
  CHECK(logic::forall(TruthTensor({0.42}), AggregatorConfig(3.0)) == doctest::Approx(0.42));
}

TEST_CASE("aggregators are monotone and forall <= exists") {
  Rng rng(13);
  AggregatorConfig p2;
  for (int trial = 0; trial < 200; ++trial) {
    auto vals = testutil::random_truths(12, rng, 0.01, 0.99);
    TruthTensor a(vals);
    double fa = logic::forall(a, p2);
    double ea = logic::exists(a, p2);
    CHECK(fa <= ea + 1e-12);
    auto raised = vals;
    std::size_t at = rng.below(vals.size());
    raised[at] = std::min(1.0, raised[at] + rng.uniform(0.0, 1.0 - raised[at]));
    TruthTensor b(raised);
    CHECK(logic::forall(b, p2) >= fa - 1e-12);
    CHECK(logic::exists(b, p2) >= ea - 1e-12);
  }
}

TEST_CASE("batch normalization examples") {
  auto flat = logic::batch_normalize({5.0, 5.0, 5.0});
  CHECK(flat[0] == 0.0);
  CHECK(flat[1] == 0.0);
  CHECK(flat[2] == 0.0);
  auto ramp = logic::batch_normalize({2.0, 4.0, 6.0});
  CHECK(ramp[0] == doctest::Approx(0.0));
  CHECK(ramp[1] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(ramp[2] == doctest::Approx(1.0).epsilon(1e-7));
  auto unit = logic::batch_normalize({0.0, 1.0});
  CHECK(unit[0] == doctest::Approx(0.0));
  CHECK(unit[1] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK_THROWS_AS(logic::batch_normalize({1.0, std::nan("")}), NumericError);
}

TEST_CASE("batch normalization stays in range and preserves order") {
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> raw(20);
    for (auto& v : raw) v = rng.uniform(0.0, 10.0);
    auto t = logic::batch_normalize(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(t[i] >= 0.0);
      CHECK(t[i] <= 1.0);
      for (std::size_t j = 0; j < raw.size(); ++j)
        if (raw[i] < raw[j]) CHECK(t[i] <= t[j]);
    }
  }
}

TEST_CASE("graph flavor matches the plain flavor") {
  Rng rng(15);
  auto av = testutil::random_truths(10, rng);
  auto bv = testutil::random_truths(10, rng);
  Graph<double> g;
  auto a = g.constant(Tensor<double>::vector(av));
  auto b = g.constant(Tensor<double>::vector(bv));
  TruthTensor ta(av), tb(bv);

  auto check_vec = [&](Var<double> node, const TruthTensor& expect) {
    for (std::size_t i = 0; i < expect.size(); ++i)
      CHECK(node.value()[static_cast<std::int64_t>(i)] ==
            doctest::Approx(expect[i]).epsilon(1e-14));
  };
  check_vec(logic::negate(a), logic::negate(ta));
  check_vec(logic::tnorm(a, b), logic::tnorm(ta, tb));
  check_vec(logic::tconorm(a, b), logic::tconorm(ta, tb));
  check_vec(logic::implies(a, b), logic::implies(ta, tb));
  CHECK(logic::exists(a).scalar() == doctest::Approx(logic::exists(ta)).epsilon(1e-14));
  CHECK(logic::forall(a).scalar() == doctest::Approx(logic::forall(ta)).epsilon(1e-14));

  std::vector<double> raw = {3.0, 0.5, 2.0, 0.5};
  auto plain = logic::batch_normalize(raw);
  auto node = logic::batch_normalize(g.constant(Tensor<double>::vector(raw)));
  check_vec(node, plain);
}

TEST_CASE("real logic operations pass float64 gradient checks") {
  Rng rng(16);
  auto av = testutil::random_truths(8, rng, 0.1, 0.9);
  auto bv = testutil::random_truths(8, rng, 0.1, 0.9);
  ParameterSet<double> ps;
  ps.add("a", Tensor<double>::vector(av));
  ps.add("b", Tensor<double>::vector(bv));

  FdOptions opt;
  opt.step = 1e-6;
  opt.samples_per_param = 8;

  auto check = [&](const std::function<Var<double>(Graph<double>&)>& build) {
    CHECK(finite_diff_check<double>(build, ps, opt) < 1e-4);
  };
  check([&](Graph<double>& g) {
    return g.sum_all(logic::negate(g.param(ps, "a")));
  });
  check([&](Graph<double>& g) {
    return g.sum_all(logic::tnorm(g.param(ps, "a"), g.param(ps, "b")));
  });
  check([&](Graph<double>& g) {
    return g.sum_all(logic::tconorm(g.param(ps, "a"), g.param(ps, "b")));
  });
  check([&](Graph<double>& g) {
    return g.sum_all(logic::implies(g.param(ps, "a"), g.param(ps, "b")));
  });
  check([&](Graph<double>& g) { return logic::exists(g.param(ps, "a")); });
  check([&](Graph<double>& g) { return logic::forall(g.param(ps, "a")); });
  check([&](Graph<double>& g) {
    return g.sum_all(logic::batch_normalize(g.param(ps, "a")));
  });
}

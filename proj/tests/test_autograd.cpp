#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fedsplit/autograd.hpp"
#include "fedsplit/error.hpp"
#include "fedsplit/gradcheck.hpp"

using namespace fedsplit;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : t.data()) v = n(rng);
  return t;
}

// Central-difference check of a loss built from named parameters.
double check(const LossFn& fn, const ParameterSet& params, std::size_t probes = 100) {
  PrecisionScope scope(Precision::F64);
  GradCheckOptions opts;
  opts.probes = probes;
  return finite_diff_check(fn, params, opts).max_rel_error;
}

}  // namespace

TEST_CASE("gelu scalar values") {
  CHECK(gelu_scalar(0.0) == 0.0);
  CHECK(gelu_scalar(10.0) == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(std::abs(gelu_scalar(1.0) - 0.841345) < 1e-6);
  // Independent form: x * Phi(x) with Phi via erfc.
  for (double x : {-3.0, -0.7, 0.2, 2.5}) {
    const double phi = 0.5 * std::erfc(-x / std::sqrt(2.0));
    CHECK(gelu_scalar(x) == doctest::Approx(x * phi).epsilon(1e-14));
  }
}

TEST_CASE("softmax cross entropy values and gradient rows") {
  PrecisionScope scope(Precision::F64);
  SUBCASE("uniform logits, C = 4") {
    Graph g;
    Var x = g.parameter("x", Tensor({1, 4}, 0.0));
    const int label = 2;
    Var loss = softmax_cross_entropy(x, std::span<const int>(&label, 1));
    CHECK(loss.value().item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("logits [2, 0], label 0") {
    Graph g;
    Var x = g.parameter("x", Tensor({1, 2}, {2.0, 0.0}));
    const int label = 0;
    Var loss = softmax_cross_entropy(x, std::span<const int>(&label, 1));
    CHECK(std::abs(loss.value().item() - 0.126928) < 1e-6);
  }
  SUBCASE("gradient rows sum to zero") {
    std::mt19937_64 rng(3);
    Graph g;
    Var x = g.parameter("x", random_tensor({5, 3}, rng, 2.0));
    const std::vector<int> labels{0, 2, 1, 1, 0};
    const ParameterSet grads = g.backward(softmax_cross_entropy(x, labels));
    const Tensor& dx = grads.at("x");
    for (std::size_t r = 0; r < 5; ++r) CHECK(std::abs(dx[r * 3] + dx[r * 3 + 1] + dx[r * 3 + 2]) < 1e-12);
  }
  SUBCASE("label out of range") {
    Graph g;
    Var x = g.parameter("x", Tensor({1, 2}));
    const int label = 2;
    try {
      (void)softmax_cross_entropy(x, std::span<const int>(&label, 1));
      FAIL("expected an index error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Index);
    }
  }
}

TEST_CASE("backward on simple losses") {
  PrecisionScope scope(Precision::F64);
  SUBCASE("sum") {
    Graph g;
    Var w = g.parameter("w", Tensor({3}, {4.0, -1.0, 2.0}));
    const ParameterSet grads = g.backward(sum(w));
    for (double v : grads.at("w").data()) CHECK(v == 1.0);
  }
  SUBCASE("half squared norm") {
    Graph g;
    Var w = g.parameter("w", Tensor({2}, {1.0, 2.0}));
    const ParameterSet grads = g.backward(scale(sum(mul(w, w)), 0.5));
    CHECK(grads.at("w")[0] == 1.0);
    CHECK(grads.at("w")[1] == 2.0);
  }
  SUBCASE("unreached parameters get zeros") {
    Graph g;
    Var w = g.parameter("w", Tensor({2}, 1.0));
    g.parameter("unused", Tensor({2, 2}, 5.0));
    const ParameterSet grads = g.backward(sum(w));
    CHECK(grads.at("unused").shape() == Shape{2, 2});
    for (double v : grads.at("unused").data()) CHECK(v == 0.0);
  }
  SUBCASE("non-scalar loss") {
    Graph g;
    Var w = g.parameter("w", Tensor({2}, 1.0));
    CHECK_THROWS_AS((void)g.backward(w), Error);
  }
}

TEST_CASE("layer norm statistics") {
  PrecisionScope scope(Precision::F64);
  std::mt19937_64 rng(11);
  const Tensor x = random_tensor({4, 16}, rng, 3.0);
  const Tensor y = layer_norm(x, Tensor({16}, 1.0), Tensor({16}, 0.0), 1e-5);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 16; ++j) mean += y[r * 16 + j];
    mean /= 16.0;
    for (std::size_t j = 0; j < 16; ++j) var += (y[r * 16 + j] - mean) * (y[r * 16 + j] - mean);
    var /= 16.0;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
  // eps = 0 is accepted; a two-element row normalizes to -1, 1.
  const Tensor z = layer_norm(Tensor({1, 2}, {1.0, 3.0}), Tensor({2}, 1.0), Tensor({2}, 0.0), 0.0);
  CHECK(z[0] == doctest::Approx(-1.0));
  CHECK(z[1] == doctest::Approx(1.0));
}

TEST_CASE("embedding rejects out-of-range ids") {
  Graph g;
  Var table = g.parameter("t", Tensor({4, 2}));
  const std::vector<std::int32_t> ids{0, 4};
  try {
    (void)embedding(table, ids);
    FAIL("expected an index error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Index);
  }
}

TEST_CASE("every primitive op matches central differences in 64-bit mode") {
  std::mt19937_64 rng(5);
  ParameterSet p;
  p.insert("a", random_tensor({6, 4}, rng));
  p.insert("b", random_tensor({4, 3}, rng));
  p.insert("bias", random_tensor({3}, rng));
  p.insert("c", random_tensor({6, 3}, rng));
  p.insert("gamma", random_tensor({3}, rng, 0.5));
  p.insert("beta", random_tensor({3}, rng, 0.5));
  p.insert("table", random_tensor({5, 4}, rng));
  p.insert("pos", random_tensor({3, 4}, rng));
  p.insert("wq", random_tensor({4, 4}, rng));
  p.insert("wk", random_tensor({4, 4}, rng));
  p.insert("col", random_tensor({4, 1}, rng));
  const std::vector<std::int32_t> ids{1, 2, 0, 4, 3, 1};
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1};
  const std::vector<int> labels{2, 0};
  const std::vector<double> targets{0.5, -1.0, 2.0, 1.5, 0.0, 0.25};

  using M = std::map<std::string, Var>;
  SUBCASE("matmul, add_tiled, sum") {
    CHECK(check([](Graph&, const M& v) { return sum(add_tiled(matmul(v.at("a"), v.at("b")), v.at("bias"))); }, p) < 1e-6);
  }
  SUBCASE("add, mul, scale") {
    CHECK(check([](Graph&, const M& v) {
            Var y = matmul(v.at("a"), v.at("b"));
            return sum(scale(mul(add(y, v.at("c")), y), 0.3));
          },
          p) < 1e-6);
  }
  SUBCASE("gelu") {
    CHECK(check([](Graph&, const M& v) { return sum(mul(gelu(v.at("c")), v.at("c"))); }, p) < 1e-6);
  }
  SUBCASE("layer_norm") {
    CHECK(check([](Graph&, const M& v) {
            Var y = layer_norm(v.at("c"), v.at("gamma"), v.at("beta"));
            return sum(mul(y, y));
          },
          p) < 1e-5);
  }
  SUBCASE("embedding and tiled positions") {
    CHECK(check([&](Graph&, const M& v) {
            Var e = add_tiled(embedding(v.at("table"), ids), v.at("pos"));
            return sum(mul(e, e));
          },
          p) < 1e-6);
  }
  SUBCASE("attention with padding") {
    CHECK(check([&](Graph&, const M& v) {
            Var x = v.at("a");  // 2 sequences of 3 rows, d = 4, 2 heads
            Var z = attention(matmul(x, v.at("wq")), matmul(x, v.at("wk")), x, mask, 2, 2);
            return sum(mul(z, z));
          },
          p) < 1e-5);
  }
  SUBCASE("mean_pool and cross entropy") {
    CHECK(check([&](Graph&, const M& v) {
            Var pooled = mean_pool(matmul(v.at("a"), v.at("b")), mask, 2);
            return softmax_cross_entropy(pooled, labels);
          },
          p) < 1e-6);
  }
  SUBCASE("mse loss") {
    CHECK(check([&](Graph&, const M& v) { return mse_loss(matmul(v.at("a"), v.at("col")), targets); }, p) < 1e-6);
  }
}

TEST_CASE("finite_diff_check on a linear model is exact") {
  ParameterSet p;
  p.insert("w", Tensor({3}, {0.5, -1.0, 2.0}));
  const Tensor x({3}, {1.0, 2.0, 3.0});
  const double err = check([&](Graph& g, const std::map<std::string, Var>& v) { return sum(mul(v.at("w"), g.constant(x))); }, p);
  CHECK(err < 1e-6);
}

TEST_CASE("ops are deterministic") {
  std::mt19937_64 rng(9);
  const Tensor a = random_tensor({8, 8}, rng);
  Graph g1, g2;
  Var x1 = g1.constant(a), x2 = g2.constant(a);
  const std::vector<std::uint8_t> mask(8, 1);
  CHECK(attention(x1, x1, gelu(x1), mask, 2, 2).value().bit_equal(attention(x2, x2, gelu(x2), mask, 2, 2).value()));
}

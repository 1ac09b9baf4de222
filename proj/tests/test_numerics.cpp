#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pnv/grad_check.hpp"
#include "pnv/graph.hpp"
#include "pnv/rng.hpp"
#include "pnv/tensor.hpp"

using namespace pnv;

namespace {

// Scalarizes any node as the sum of squared entries, so random-graph
// gradient checks see a non-constant gradient everywhere.
int sum_sq(Graph& g, int id) {
  const int flat = g.apply(OpKind::kConcat, {id});
  return g.apply(OpKind::kMatMul, {flat, flat});
}

int sum_all(Graph& g, int id) {
  const int flat = g.apply(OpKind::kConcat, {id});
  return g.apply(OpKind::kSumRows, {flat});
}

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_CASE("matmul basic products") {
  Graph g;
  const int a = g.leaf(Tensor::from_matrix(2, 2, {1, 2, 3, 4}));
  const int b = g.leaf(Tensor::from_matrix(2, 1, {5, 6}));
  const int c = g.apply(OpKind::kMatMul, {a, b});
  CHECK(g.value(c).shape == std::vector<int64_t>{2, 1});
  CHECK(g.value(c)[0] == doctest::Approx(17).epsilon(1e-12));
  CHECK(g.value(c)[1] == doctest::Approx(39).epsilon(1e-12));

  const int eye = g.leaf(Tensor::from_matrix(2, 2, {1, 0, 0, 1}));
  const int ae = g.apply(OpKind::kMatMul, {a, eye});
  CHECK(max_abs_diff(g.value(ae), g.value(a)) == 0.0);
}

TEST_CASE("matmul shape mismatch names kind and shapes") {
  Graph g;
  const int a = g.leaf(Tensor::from_matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  const int b = g.leaf(Tensor::from_matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  bool threw = false;
  try {
    g.apply(OpKind::kMatMul, {a, b});
  } catch (const std::invalid_argument& e) {
    threw = true;
    const std::string msg = e.what();
    CHECK(msg.find("MatMul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("matmul transpose flags match explicit transposes") {
  Rng rng(11);
  const Tensor a = random_tensor({4, 3}, rng);
  const Tensor b = random_tensor({4, 5}, rng);
  Tensor at({3, 4});
  for (int64_t r = 0; r < 4; ++r)
    for (int64_t c = 0; c < 3; ++c) at.at(c, r) = a.at(r, c);
  Graph g;
  OpAttrs ta;
  ta.transpose_a = true;
  const int viaflag =
      g.apply(OpKind::kMatMul, {g.leaf(a), g.leaf(b)}, ta);
  const int manual = g.apply(OpKind::kMatMul, {g.leaf(at), g.leaf(b)});
  CHECK(max_abs_diff(g.value(viaflag), g.value(manual)) == 0.0);
}

TEST_CASE("matmul rank-1 promotions") {
  Graph g;
  const int v = g.leaf(Tensor::from_vector({1, 2, 3}));
  const int dot = g.apply(OpKind::kMatMul, {v, v});
  CHECK(g.value(dot).shape == std::vector<int64_t>{1});
  CHECK(g.value(dot)[0] == doctest::Approx(14).epsilon(1e-15));

  const int m = g.leaf(Tensor::from_matrix(3, 2, {1, 0, 0, 1, 1, 1}));
  const int row = g.apply(OpKind::kMatMul, {v, m});
  CHECK(g.value(row).shape == std::vector<int64_t>{2});
  CHECK(g.value(row)[0] == doctest::Approx(4).epsilon(1e-15));
  CHECK(g.value(row)[1] == doctest::Approx(5).epsilon(1e-15));
}

TEST_CASE("relu values and subgradient at zero") {
  Graph g;
  const int x = g.leaf(Tensor::from_vector({-1, 0, 2}), true);
  const int y = g.apply(OpKind::kReLU, {x});
  CHECK(g.value(y)[0] == 0.0);
  CHECK(g.value(y)[1] == 0.0);
  CHECK(g.value(y)[2] == 2.0);
  const int loss = sum_all(g, y);
  g.backward(loss);
  const Tensor gx = g.grad_of(x);
  CHECK(gx[0] == 0.0);
  CHECK(gx[1] == 0.0);  // subgradient at the kink is 0
  CHECK(gx[2] == 1.0);
}

TEST_CASE("softmax rows") {
  Graph g;
  const int x = g.leaf(Tensor::from_vector({0, 0}));
  const int y = g.apply(OpKind::kSoftmaxRows, {x});
  CHECK(g.value(y)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.value(y)[1] == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(3);
  const Tensor big = random_tensor({4, 6}, rng, 1000.0);
  const int b = g.apply(OpKind::kSoftmaxRows, {g.leaf(big)});
  CHECK(g.value(b).all_finite());
  for (int64_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (int64_t c = 0; c < 6; ++c) s += g.value(b).at(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sum rows and max rows") {
  Graph g;
  const int x = g.leaf(Tensor::from_matrix(2, 3, {1, 5, 2, -1, -2, -3}));
  const int s = g.apply(OpKind::kSumRows, {x});
  CHECK(g.value(s)[0] == 8.0);
  CHECK(g.value(s)[1] == -6.0);
  const int m = g.apply(OpKind::kMaxRows, {x});
  CHECK(g.value(m)[0] == 5.0);
  CHECK(g.value(m)[1] == -1.0);

  OpAttrs col;
  col.axis = 0;
  const int mc = g.apply(OpKind::kMaxRows, {x}, col);
  CHECK(g.value(mc).shape == std::vector<int64_t>{3});
  CHECK(g.value(mc)[0] == 1.0);
  CHECK(g.value(mc)[1] == 5.0);
  CHECK(g.value(mc)[2] == 2.0);
}

TEST_CASE("max rows routes gradient to lowest tied index") {
  Graph g;
  const int x = g.leaf(Tensor::from_vector({3, 3, 1}), true);
  const int m = g.apply(OpKind::kMaxRows, {x});
  g.backward(m);
  const Tensor gx = g.grad_of(x);
  CHECK(gx[0] == 1.0);
  CHECK(gx[1] == 0.0);
  CHECK(gx[2] == 0.0);
}

TEST_CASE("l2 normalize") {
  Graph g;
  const int x = g.leaf(Tensor::from_vector({3, 4}));
  const int y = g.apply(OpKind::kL2NormalizeVec, {x});
  CHECK(g.value(y)[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(g.value(y)[1] == doctest::Approx(0.8).epsilon(1e-15));

  const int z = g.leaf(Tensor::from_vector({0, 0, 0}));
  const int yz = g.apply(OpKind::kL2NormalizeVec, {z});
  CHECK(g.value(yz).all_finite());

  const int u = g.leaf(Tensor::from_vector({1, 0}));
  const int yu = g.apply(OpKind::kL2NormalizeVec, {u});
  CHECK(max_abs_diff(g.value(yu), g.value(u)) == 0.0);
}

TEST_CASE("concat flattens and scale and sub") {
  Graph g;
  const int a = g.leaf(Tensor::from_matrix(2, 2, {1, 2, 3, 4}));
  const int b = g.leaf(Tensor::from_vector({5, 6}));
  const int c = g.apply(OpKind::kConcat, {a, b});
  CHECK(g.value(c).shape == std::vector<int64_t>{6});
  CHECK(g.value(c)[2] == 3.0);
  CHECK(g.value(c)[5] == 6.0);

  OpAttrs half;
  half.factor = 0.5;
  const int sc = g.apply(OpKind::kScale, {b}, half);
  CHECK(g.value(sc)[0] == 2.5);

  const int d = g.apply(OpKind::kSub, {b, b});
  CHECK(g.value(d)[0] == 0.0);
  CHECK_THROWS_AS(g.apply(OpKind::kSub, {a, b}), std::invalid_argument);
}

TEST_CASE("backward of summed relu") {
  Graph g;
  const int x = g.leaf(Tensor::from_vector({1, -1}), true);
  const int loss = sum_all(g, g.apply(OpKind::kReLU, {x}));
  g.backward(loss);
  const Tensor gx = g.grad_of(x);
  CHECK(gx[0] == 1.0);
  CHECK(gx[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar root") {
  Graph g;
  const int x = g.leaf(Tensor::from_vector({1, 2, 3}), true);
  const int y = g.apply(OpKind::kReLU, {x});
  bool threw = false;
  try {
    g.backward(y);
  } catch (const std::invalid_argument& e) {
    threw = true;
    CHECK(std::string(e.what()).find("scalar") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("matmul weight gradient matches finite differences") {
  // loss(w) = sum(MatMul([[1,2]], w)) at w = 0; the analytic gradient is
  // checked against central differences computed with forward passes only.
  const Tensor x = Tensor::from_matrix(1, 2, {1, 2});
  auto loss_at = [&](const Tensor& w) {
    Graph g;
    return g.value(sum_all(g, g.apply(OpKind::kMatMul, {g.leaf(x), g.leaf(w)})))[0];
  };
  Tensor w({2, 1});
  const double h = 1e-6;
  Tensor numeric({2, 1});
  for (int64_t i = 0; i < w.size(); ++i) {
    Tensor wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    numeric[i] = (loss_at(wp) - loss_at(wm)) / (2 * h);
  }
  Graph g;
  const int wid = g.leaf(w, true);
  g.backward(sum_all(g, g.apply(OpKind::kMatMul, {g.leaf(x), wid})));
  const Tensor analytic = g.grad_of(wid);
  CHECK(max_abs_diff(analytic, numeric) < 1e-8);
  CHECK(analytic[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(analytic[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("grad_check quadratic and empty") {
  auto quad = [](Graph& g, const std::vector<int>& ids) {
    return g.apply(OpKind::kMatMul, {ids[0], ids[0]});
  };
  CHECK(grad_check(quad, {Tensor::from_vector({1, 2})}, 1e-6) < 1e-9);

  auto constant = [](Graph& g, const std::vector<int>&) {
    return g.leaf(Tensor::scalar(7.0));
  };
  CHECK(grad_check(constant, {}, 1e-6) == 0.0);
}

TEST_CASE("every primitive passes random gradient checks") {
  int cases = 0;
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    Rng rng(seed);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 2}, rng);
    const Tensor w = random_tensor({4, 3}, rng);
    const Tensor bias = random_tensor({3}, rng);
    const Tensor v = random_tensor({5}, rng);

    struct NamedBuilder {
      const char* name;
      LossBuilder build;
      std::vector<Tensor> params;
    };
    OpAttrs axis0;
    axis0.axis = 0;
    OpAttrs ta;
    ta.transpose_a = true;
    OpAttrs tb;
    tb.transpose_b = true;
    const std::vector<NamedBuilder> builders = {
        {"matmul", [](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kMatMul, {p[0], p[1]}));
         }, {a, b}},
        {"matmul_ta", [ta](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kMatMul, {p[0], p[1]}, ta));
         }, {a, random_tensor({3, 2}, rng)}},
        {"matmul_tb", [tb](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kMatMul, {p[0], p[1]}, tb));
         }, {a, random_tensor({2, 4}, rng)}},
        {"affine", [](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kAffineRows, {p[0], p[1], p[2]}));
         }, {a, w, bias}},
        {"relu", [](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kReLU, {p[0]}));
         }, {a}},
        {"softmax", [](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kSoftmaxRows, {p[0]}));
         }, {a}},
        {"sumrows", [](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kSumRows, {p[0]}));
         }, {a}},
        {"l2norm", [](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kL2NormalizeVec, {p[0]}));
         }, {v}},
        {"maxrows", [](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kMaxRows, {p[0]}));
         }, {a}},
        {"maxcols", [axis0](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kMaxRows, {p[0]}, axis0));
         }, {a}},
        {"concat", [](Graph& g, const std::vector<int>& p) {
           return sum_sq(g, g.apply(OpKind::kConcat, {p[0], p[1]}));
         }, {a, v}},
        {"scale_sub", [](Graph& g, const std::vector<int>& p) {
           OpAttrs f;
           f.factor = -2.5;
           const int s = g.apply(OpKind::kScale, {p[0]}, f);
           return sum_sq(g, g.apply(OpKind::kSub, {p[0], s}));
         }, {a}},
        {"chain", [](Graph& g, const std::vector<int>& p) {
           const int h1 = g.apply(OpKind::kAffineRows, {p[0], p[1], p[2]});
           const int r = g.apply(OpKind::kReLU, {h1});
           const int sm = g.apply(OpKind::kSoftmaxRows, {r});
           const int flat = g.apply(OpKind::kConcat, {sm});
           const int nrm = g.apply(OpKind::kL2NormalizeVec, {flat});
           return sum_sq(g, nrm);
         }, {a, w, bias}},
    };
    for (const auto& nb : builders) {
      ++cases;
      INFO(nb.name << " seed " << seed);
      CHECK(grad_check(nb.build, nb.params, 1e-6) < 1e-4);
    }
  }
  CHECK(cases >= 50);
}

TEST_CASE("finite inputs stay finite through every primitive") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    const int x = g.leaf(random_tensor({3, 3}, rng, 1e6));
    CHECK(g.value(g.apply(OpKind::kReLU, {x})).all_finite());
    CHECK(g.value(g.apply(OpKind::kSoftmaxRows, {x})).all_finite());
    CHECK(g.value(g.apply(OpKind::kSumRows, {x})).all_finite());
    CHECK(g.value(g.apply(OpKind::kMaxRows, {x})).all_finite());
    const int f = g.apply(OpKind::kConcat, {x});
    CHECK(g.value(g.apply(OpKind::kL2NormalizeVec, {f})).all_finite());
    CHECK(g.value(g.apply(OpKind::kMatMul, {x, x})).all_finite());
  }
}

TEST_CASE("evaluation is deterministic") {
  auto run = [] {
    Rng rng(123);
    Graph g;
    const int x = g.leaf(random_tensor({8, 6}, rng), true);
    const int w = g.leaf(random_tensor({6, 4}, rng), true);
    const int b = g.leaf(random_tensor({4}, rng), true);
    const int h = g.apply(OpKind::kAffineRows, {x, w, b});
    const int loss = sum_sq(g, g.apply(OpKind::kSoftmaxRows, {g.apply(OpKind::kReLU, {h})}));
    g.backward(loss);
    std::vector<double> out = g.value(loss).data;
    for (int id : g.parameters()) {
      const Tensor t = g.grad_of(id);
      out.insert(out.end(), t.data.begin(), t.data.end());
    }
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("unknown primitive kind is rejected") {
  Graph g;
  const int x = g.leaf(Tensor::from_vector({1}));
  CHECK_THROWS_AS(g.apply(static_cast<OpKind>(99), {x}), std::invalid_argument);
  CHECK_THROWS_AS(g.apply(OpKind::kLeaf, {x}), std::invalid_argument);
}

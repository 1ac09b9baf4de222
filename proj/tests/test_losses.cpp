#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pnv/losses.hpp"
#include "pnv/rng.hpp"

using namespace pnv;

namespace {

TupleDistances random_distances(Rng& rng, int n_negs) {
  TupleDistances d;
  d.delta_pos = rng.uniform(0.0, 2.0);
  for (int i = 0; i < n_negs; ++i) {
    d.delta_neg.push_back(rng.uniform(0.0, 4.0));
    d.delta_neg_star.push_back(rng.uniform(0.0, 4.0));
  }
  return d;
}

Tensor random_descriptor(Rng& rng, int64_t dim) {
  Tensor t({dim});
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  double n = 0.0;
  for (double v : t.data) n += v * v;
  n = std::sqrt(n);
  for (auto& v : t.data) v /= n;
  return t;
}

}  // namespace

TEST_CASE("squared euclidean distance") {
  CHECK(sq_euclidean({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK(sq_euclidean({0.0, 0.0}, {3.0, 4.0}) == 25.0);
  CHECK_THROWS_AS(sq_euclidean({1.0}, {1.0, 2.0}), std::invalid_argument);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Tensor a = random_descriptor(rng, 16);
    const Tensor b = random_descriptor(rng, 16);
    const double d = sq_euclidean(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 4.0 + 1e-12);  // diameter bound on the unit sphere
  }
}

TEST_CASE("margin defaults") {
  const Margins m;
  CHECK(m.alpha == 0.5);
  CHECK(m.beta == 0.2);
}

TEST_CASE("lazy triplet evaluation") {
  Margins m;
  TupleDistances d;
  d.delta_pos = 0.1;
  d.delta_neg = {0.8, 0.4};
  CHECK(lazy_triplet(d, m) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(sum_triplet(d, m) == doctest::Approx(0.2).epsilon(1e-15));  // one inactive hinge

  d.delta_neg = {0.7};  // single negative: lazy == sum
  CHECK(lazy_triplet(d, m) == sum_triplet(d, m));

  d.delta_neg = {0.6, 5.0};  // all >= alpha + delta_pos
  CHECK(lazy_triplet(d, m) == 0.0);

  d.delta_neg.clear();
  CHECK_THROWS_AS(lazy_triplet(d, m), std::invalid_argument);
}

TEST_CASE("lazy quadruplet evaluation") {
  Margins m;
  TupleDistances d;
  d.delta_pos = 0.1;
  d.delta_neg = {0.4};
  d.delta_neg_star = {0.25};
  CHECK(lazy_quadruplet(d, m) == doctest::Approx(0.25).epsilon(1e-15));

  d.delta_neg = {5.0};
  d.delta_neg_star = {5.0};  // both hinges inactive
  CHECK(lazy_quadruplet(d, m) == 0.0);

  d.delta_neg = {0.4, 0.8};
  d.delta_neg_star = {1e9, 1e9};  // second term vanishes in the far limit
  CHECK(lazy_quadruplet(d, m) == lazy_triplet(d, m));

  d.delta_neg_star = {0.1};
  CHECK_THROWS_AS(lazy_quadruplet(d, m), std::invalid_argument);
}

TEST_CASE("compounding of sum versus lazy") {
  Margins m;
  TupleDistances d;
  d.delta_pos = 0.2;
  d.delta_neg = {0.3, 0.3, 0.3, 0.3};  // each violates by 0.4
  CHECK(lazy_triplet(d, m) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(sum_triplet(d, m) == doctest::Approx(1.6).epsilon(1e-15));
}

TEST_CASE("lazy bounded by sum over random tuples") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const TupleDistances d = random_distances(rng, 1 + rng.next_int(20));
    const Margins m;
    CHECK(lazy_triplet(d, m) <= sum_triplet(d, m) + 1e-15);
    CHECK(lazy_quadruplet(d, m) <= sum_quadruplet(d, m) + 1e-15);
    CHECK(lazy_triplet(d, m) >= 0.0);
    CHECK(lazy_quadruplet(d, m) >= 0.0);
  }
}

TEST_CASE("losses ignore negative order") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    TupleDistances d = random_distances(rng, 6);
    TupleDistances shuffled = d;
    // reverse keeps the neg/neg_star pairing consistent
    std::reverse(shuffled.delta_neg.begin(), shuffled.delta_neg.end());
    std::reverse(shuffled.delta_neg_star.begin(), shuffled.delta_neg_star.end());
    const Margins m;
    for (LossKind k : {LossKind::kTriplet, LossKind::kQuadruplet, LossKind::kLazyTriplet,
                       LossKind::kLazyQuadruplet})
      CHECK(tuple_loss(k, d, m) == doctest::Approx(tuple_loss(k, shuffled, m)).epsilon(1e-12));
  }
}

TEST_CASE("loss names round-trip and reject unknowns") {
  for (LossKind k : {LossKind::kTriplet, LossKind::kQuadruplet, LossKind::kLazyTriplet,
                     LossKind::kLazyQuadruplet})
    CHECK(parse_loss_name(loss_name(k)) == k);
  bool threw = false;
  try {
    parse_loss_name("contrastive");
  } catch (const std::invalid_argument& e) {
    threw = true;
    CHECK(std::string(e.what()).find("lazy_quadruplet") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("graph losses match the scalar mirror") {
  Rng rng(7);
  const Margins m;
  for (int trial = 0; trial < 25; ++trial) {
    const int n_negs = 1 + rng.next_int(8);
    const int64_t dim = 8;
    Graph g;
    const int anchor = g.leaf(random_descriptor(rng, dim));
    const int pos = g.leaf(random_descriptor(rng, dim));
    const int star = g.leaf(random_descriptor(rng, dim));
    std::vector<int> negs;
    for (int i = 0; i < n_negs; ++i) negs.push_back(g.leaf(random_descriptor(rng, dim)));

    TupleDistances d;
    d.delta_pos = sq_euclidean(g.value(anchor), g.value(pos));
    for (int id : negs) {
      d.delta_neg.push_back(sq_euclidean(g.value(anchor), g.value(id)));
      d.delta_neg_star.push_back(sq_euclidean(g.value(star), g.value(id)));
    }
    for (LossKind k : {LossKind::kTriplet, LossKind::kQuadruplet, LossKind::kLazyTriplet,
                       LossKind::kLazyQuadruplet}) {
      const int node = tuple_loss_node(g, k, m, anchor, pos, negs, star);
      CHECK(g.value(node)[0] == doctest::Approx(tuple_loss(k, d, m)).epsilon(1e-12));
    }
  }
}

TEST_CASE("lazy gradient flows only through the hardest negative") {
  Rng rng(13);
  const Margins m;
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int64_t dim = 6;
    Graph g;
    const int anchor = g.leaf(random_descriptor(rng, dim), true);
    const int pos = g.leaf(random_descriptor(rng, dim), true);
    std::vector<int> negs;
    for (int i = 0; i < 5; ++i) negs.push_back(g.leaf(random_descriptor(rng, dim), true));
    const int loss = tuple_loss_node(g, LossKind::kLazyTriplet, m, anchor, pos, negs);
    if (g.value(loss)[0] <= 1e-9) continue;  // inactive tuples route no gradient
    g.backward(loss);

    TupleDistances d;
    d.delta_pos = sq_euclidean(g.value(anchor), g.value(pos));
    for (int id : negs) d.delta_neg.push_back(sq_euclidean(g.value(anchor), g.value(id)));
    size_t hardest = 0;
    for (size_t i = 1; i < d.delta_neg.size(); ++i)
      if (d.delta_neg[i] < d.delta_neg[hardest]) hardest = i;

    ++checked;
    for (size_t i = 0; i < negs.size(); ++i) {
      const Tensor gN = g.grad_of(negs[i]);
      double mag = 0.0;
      for (double v : gN.data) mag += std::fabs(v);
      if (i == hardest)
        CHECK(mag > 0.0);
      else
        CHECK(mag == 0.0);
    }
  }
  CHECK(checked > 5);
}

TEST_CASE("inactive tuples leave zero gradients") {
  const Margins m;
  Graph g;
  const int anchor = g.leaf(Tensor::from_vector({1, 0}), true);
  const int pos = g.leaf(Tensor::from_vector({1, 0}), true);
  const int far = g.leaf(Tensor::from_vector({-1, 0}), true);  // distance 4 >> alpha
  const int loss = tuple_loss_node(g, LossKind::kLazyTriplet, m, anchor, pos, {far});
  CHECK(g.value(loss)[0] == 0.0);
  g.backward(loss);
  for (int id : {anchor, pos, far}) {
    const Tensor gr = g.grad_of(id);
    for (double v : gr.data) CHECK(v == 0.0);
  }
}

TEST_CASE("quadruplet requires the extra negative node") {
  Graph g;
  const int a = g.leaf(Tensor::from_vector({1, 0}));
  const int p = g.leaf(Tensor::from_vector({0, 1}));
  CHECK_THROWS_AS(tuple_loss_node(g, LossKind::kLazyQuadruplet, Margins{}, a, p, {p}),
                  std::invalid_argument);
  CHECK_THROWS_AS(tuple_loss_node(g, LossKind::kLazyTriplet, Margins{}, a, p, {}),
                  std::invalid_argument);
}

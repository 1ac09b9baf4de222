#include "pnv/losses.hpp"

#include <algorithm>
#include <stdexcept>

namespace pnv {

double sq_euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("sq_euclidean: length mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double sq_euclidean(const Tensor& a, const Tensor& b) { return sq_euclidean(a.data, b.data); }

namespace {

void check_tuple(const TupleDistances& d, bool with_star) {
  if (d.delta_neg.empty())
    throw std::invalid_argument("tuple loss: negatives must be non-empty");
  if (with_star && d.delta_neg_star.size() != d.delta_neg.size())
    throw std::invalid_argument("tuple loss: delta_neg_star length " +
                                std::to_string(d.delta_neg_star.size()) +
                                " does not match delta_neg length " +
                                std::to_string(d.delta_neg.size()));
}

double hinge(double margin, double pos, double neg) {
  return std::max(0.0, margin + pos - neg);
}

}  // namespace

double lazy_triplet(const TupleDistances& d, const Margins& m) {
  check_tuple(d, false);
  double worst = 0.0;
  for (double dn : d.delta_neg) worst = std::max(worst, hinge(m.alpha, d.delta_pos, dn));
  return worst;
}

double sum_triplet(const TupleDistances& d, const Margins& m) {
  check_tuple(d, false);
  double total = 0.0;
  for (double dn : d.delta_neg) total += hinge(m.alpha, d.delta_pos, dn);
  return total;
}

double lazy_quadruplet(const TupleDistances& d, const Margins& m) {
  check_tuple(d, true);
  double second = 0.0;
  for (double ds : d.delta_neg_star) second = std::max(second, hinge(m.beta, d.delta_pos, ds));
  return lazy_triplet(d, m) + second;
}

double sum_quadruplet(const TupleDistances& d, const Margins& m) {
  check_tuple(d, true);
  double second = 0.0;
  for (double ds : d.delta_neg_star) second += hinge(m.beta, d.delta_pos, ds);
  return sum_triplet(d, m) + second;
}

bool needs_neg_star(LossKind k) {
  return k == LossKind::kQuadruplet || k == LossKind::kLazyQuadruplet;
}

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::kTriplet: return "triplet";
    case LossKind::kQuadruplet: return "quadruplet";
    case LossKind::kLazyTriplet: return "lazy_triplet";
    case LossKind::kLazyQuadruplet: return "lazy_quadruplet";
  }
  return "unknown";
}

LossKind parse_loss_name(const std::string& name) {
  for (LossKind k : {LossKind::kTriplet, LossKind::kQuadruplet, LossKind::kLazyTriplet,
                     LossKind::kLazyQuadruplet})
    if (name == loss_name(k)) return k;
  throw std::invalid_argument(
      "unknown loss '" + name +
      "'; valid names: triplet, quadruplet, lazy_triplet, lazy_quadruplet");
}

double tuple_loss(LossKind kind, const TupleDistances& d, const Margins& m) {
  switch (kind) {
    case LossKind::kTriplet: return sum_triplet(d, m);
    case LossKind::kQuadruplet: return sum_quadruplet(d, m);
    case LossKind::kLazyTriplet: return lazy_triplet(d, m);
    case LossKind::kLazyQuadruplet: return lazy_quadruplet(d, m);
  }
  throw std::invalid_argument("tuple_loss: unknown loss kind");
}

int sq_dist_node(Graph& g, int a, int b) {
  const int diff = g.apply(OpKind::kSub, {a, b});
  return g.apply(OpKind::kMatMul, {diff, diff});
}

namespace {

// max(0, margin + pos - neg) as a [1] node
int hinge_node(Graph& g, int margin_leaf, int pos, int neg) {
  const int gap = g.apply(OpKind::kSub, {neg, pos});
  return g.apply(OpKind::kReLU, {g.apply(OpKind::kSub, {margin_leaf, gap})});
}

int reduce_hinges(Graph& g, bool lazy, const std::vector<int>& hinges) {
  const int cat = g.apply(OpKind::kConcat, hinges);
  return g.apply(lazy ? OpKind::kMaxRows : OpKind::kSumRows, {cat});
}

}  // namespace

int tuple_loss_node(Graph& g, LossKind kind, const Margins& m, int anchor, int positive,
                    const std::vector<int>& negatives, int neg_star) {
  if (negatives.empty())
    throw std::invalid_argument("tuple_loss_node: negatives must be non-empty");
  const bool lazy = kind == LossKind::kLazyTriplet || kind == LossKind::kLazyQuadruplet;
  const int alpha = g.leaf(Tensor::scalar(m.alpha));
  const int delta_pos = sq_dist_node(g, anchor, positive);
  std::vector<int> hinges;
  hinges.reserve(negatives.size());
  for (int neg : negatives)
    hinges.push_back(hinge_node(g, alpha, delta_pos, sq_dist_node(g, anchor, neg)));
  int loss = reduce_hinges(g, lazy, hinges);
  if (needs_neg_star(kind)) {
    if (neg_star < 0)
      throw std::invalid_argument("tuple_loss_node: quadruplet losses need a neg_star node");
    const int beta = g.leaf(Tensor::scalar(m.beta));
    std::vector<int> second;
    second.reserve(negatives.size());
    for (int neg : negatives)
      second.push_back(hinge_node(g, beta, delta_pos, sq_dist_node(g, neg_star, neg)));
    const int term2 = reduce_hinges(g, lazy, second);
    OpAttrs neg1;
    neg1.factor = -1.0;
    loss = g.apply(OpKind::kSub, {loss, g.apply(OpKind::kScale, {term2}, neg1)});
  }
  return loss;
}

}  // namespace pnv

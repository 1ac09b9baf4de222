#pragma once

// Metric-learning losses over descriptor tuples. Distances are squared
// Euclidean. The lazy variants hinge only on the hardest negative; the sum
// variants accumulate every negative's hinge. The quadruplet forms add a
// second hinge against an extra negative that is far from every tuple
// member, pushing negatives apart from each other as well.

#include <cstdint>
#include <string>
#include <vector>

#include "pnv/graph.hpp"

namespace pnv {

struct Margins {
  double alpha = 0.5;  // positive-vs-negative hinge margin
  double beta = 0.2;   // second hinge margin in the quadruplet forms
};

// Precomputed squared distances for one tuple: anchor-positive,
// anchor-negative per negative, and extra-negative-to-negative per negative.
struct TupleDistances {
  double delta_pos = 0.0;
  std::vector<double> delta_neg;
  std::vector<double> delta_neg_star;
};

double sq_euclidean(const std::vector<double>& a, const std::vector<double>& b);
double sq_euclidean(const Tensor& a, const Tensor& b);

double lazy_triplet(const TupleDistances& d, const Margins& m);
double sum_triplet(const TupleDistances& d, const Margins& m);
double lazy_quadruplet(const TupleDistances& d, const Margins& m);
double sum_quadruplet(const TupleDistances& d, const Margins& m);

enum class LossKind { kTriplet, kQuadruplet, kLazyTriplet, kLazyQuadruplet };

bool needs_neg_star(LossKind k);
const char* loss_name(LossKind k);
LossKind parse_loss_name(const std::string& name);

double tuple_loss(LossKind kind, const TupleDistances& d, const Margins& m);

// Graph form over descriptor nodes (each rank-1, same length). neg_star is
// required for the quadruplet kinds and ignored otherwise. Returns a scalar
// node; gradients flow only through the hinges that are active, and for the
// lazy kinds only through the hardest one.
int tuple_loss_node(Graph& g, LossKind kind, const Margins& m, int anchor, int positive,
                    const std::vector<int>& negatives, int neg_star = -1);

// Squared Euclidean distance between two rank-1 nodes, as a [1] node.
int sq_dist_node(Graph& g, int a, int b);

}  // namespace pnv

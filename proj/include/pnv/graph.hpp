#pragma once

// Taped reverse-mode autodiff over a fixed primitive set. Forward values
// are computed eagerly at apply(); backward() sweeps the tape in reverse,
// skipping nodes that never received a gradient, so the hard-negative max
// in the losses only back-propagates through the selected branch.

#include <string>
#include <vector>

#include "pnv/tensor.hpp"

namespace pnv {

enum class OpKind {
  kLeaf,
  kMatMul,
  kAffineRows,
  kReLU,
  kSoftmaxRows,
  kSumRows,
  kL2NormalizeVec,
  kMaxRows,
  kConcat,
  kScale,
  kSub,
};

const char* kind_name(OpKind k);

// Kind-specific scalars. MatMul reads the transpose flags, Scale reads
// factor, MaxRows reads axis (1 = per row, 0 = per column).
struct OpAttrs {
  double factor = 1.0;
  bool transpose_a = false;
  bool transpose_b = false;
  int axis = 1;
};

// Guard in L2NormalizeVec: vectors shorter than this keep a finite output.
inline constexpr double kL2NormEps = 1e-12;

struct Node {
  OpKind kind = OpKind::kLeaf;
  OpAttrs attrs;
  std::vector<int> inputs;
  Tensor value;
  Tensor grad;           // allocated lazily on first accumulation
  bool grad_set = false;
  bool trainable = false;
  // cached forward extras
  std::vector<int64_t> arg;  // MaxRows argmax per output entry
};

class Graph {
 public:
  // Adds an input node. Trainable leaves are the graph's parameters.
  int leaf(Tensor value, bool trainable = false);

  // Applies one primitive; validates shapes and computes the value now.
  int apply(OpKind kind, const std::vector<int>& inputs, const OpAttrs& attrs = {});

  // Reverse sweep from a scalar loss (shape [1]). Clears previous gradients.
  void backward(int loss_id);

  const Tensor& value(int id) const { return node(id).value; }

  // Gradient of the loss w.r.t. node id; zeros if the sweep never reached it.
  Tensor grad_of(int id) const;

  const std::vector<int>& parameters() const { return params_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  const Node& node(int id) const;
  Node& node(int id);
  void forward(Node& n);
  void backprop(int id);
  void accumulate(int id, const double* g, int64_t len);
  double* grad_buffer(int id);

  std::vector<Node> nodes_;
  std::vector<int> params_;
};

// Single-threaded BLAS-backed matrix product C (+)= op(A) * op(B).
void gemm_accum(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
                const double* a, int64_t lda, const double* b, int64_t ldb,
                double* c, int64_t ldc, double beta);

}  // namespace pnv

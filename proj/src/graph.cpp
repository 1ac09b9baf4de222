#include "pnv/graph.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

extern "C" void openblas_set_num_threads(int);

namespace pnv {

const char* kind_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "Leaf";
    case OpKind::kMatMul: return "MatMul";
    case OpKind::kAffineRows: return "AffineRows";
    case OpKind::kReLU: return "ReLU";
    case OpKind::kSoftmaxRows: return "SoftmaxRows";
    case OpKind::kSumRows: return "SumRows";
    case OpKind::kL2NormalizeVec: return "L2NormalizeVec";
    case OpKind::kMaxRows: return "MaxRows";
    case OpKind::kConcat: return "Concat";
    case OpKind::kScale: return "Scale";
    case OpKind::kSub: return "Sub";
  }
  return "unknown";
}

void gemm_accum(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
                const double* a, int64_t lda, const double* b, int64_t ldb,
                double* c, int64_t ldc, double beta) {
  static const bool threads_pinned = [] {
    openblas_set_num_threads(1);  // keeps reductions in a fixed order
    return true;
  }();
  (void)threads_pinned;
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, a, static_cast<int>(lda), b,
              static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

namespace {

[[noreturn]] void shape_error(OpKind k, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(kind_name(k)) + ": incompatible shapes " +
                              a.shape_str() + " and " + b.shape_str());
}

[[noreturn]] void shape_error(OpKind k, const Tensor& a, const char* why) {
  throw std::invalid_argument(std::string(kind_name(k)) + ": " + why + ", got shape " +
                              a.shape_str());
}

void expect_arity(OpKind k, const std::vector<int>& inputs, size_t n) {
  if (inputs.size() != n)
    throw std::invalid_argument(std::string(kind_name(k)) + ": expected " + std::to_string(n) +
                                " inputs, got " + std::to_string(inputs.size()));
}

// Effective 2-D view of a rank-1 or rank-2 operand for MatMul.
struct MatView {
  int64_t rows = 0, cols = 0;  // after any transpose
  int64_t ld = 0;              // physical leading dimension
  bool trans = false;
  bool was_rank1 = false;
};

MatView left_view(OpKind k, const Tensor& t, bool trans) {
  MatView v;
  if (t.rank() == 1) {
    if (trans) shape_error(k, t, "transpose flag requires a rank-2 operand");
    v.rows = 1;
    v.cols = t.size();
    v.ld = t.size();
    v.was_rank1 = true;
  } else {
    v.rows = trans ? t.cols() : t.rows();
    v.cols = trans ? t.rows() : t.cols();
    v.ld = t.cols();
    v.trans = trans;
  }
  return v;
}

MatView right_view(OpKind k, const Tensor& t, bool trans) {
  MatView v;
  if (t.rank() == 1) {
    if (trans) shape_error(k, t, "transpose flag requires a rank-2 operand");
    v.rows = t.size();
    v.cols = 1;
    v.ld = 1;
    v.was_rank1 = true;
  } else {
    v.rows = trans ? t.cols() : t.rows();
    v.cols = trans ? t.rows() : t.cols();
    v.ld = t.cols();
    v.trans = trans;
  }
  return v;
}

bool all_zero(const double* p, int64_t n) {
  for (int64_t i = 0; i < n; ++i)
    if (p[i] != 0.0) return false;
  return true;
}

}  // namespace

const Node& Graph::node(int id) const {
  if (id < 0 || id >= node_count()) throw std::out_of_range("Graph: unknown node id");
  return nodes_[static_cast<size_t>(id)];
}

Node& Graph::node(int id) {
  if (id < 0 || id >= node_count()) throw std::out_of_range("Graph: unknown node id");
  return nodes_[static_cast<size_t>(id)];
}

int Graph::leaf(Tensor value, bool trainable) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.trainable = trainable;
  nodes_.push_back(std::move(n));
  const int id = node_count() - 1;
  if (trainable) params_.push_back(id);
  return id;
}

int Graph::apply(OpKind kind, const std::vector<int>& inputs, const OpAttrs& attrs) {
  if (kind == OpKind::kLeaf)
    throw std::invalid_argument("Graph::apply: Leaf nodes are created with leaf()");
  for (int id : inputs) node(id);  // validates ids
  Node n;
  n.kind = kind;
  n.attrs = attrs;
  n.inputs = inputs;
  forward(n);
  nodes_.push_back(std::move(n));
  return node_count() - 1;
}

void Graph::forward(Node& n) {
  switch (n.kind) {
    case OpKind::kMatMul: {
      expect_arity(n.kind, n.inputs, 2);
      const Tensor& a = value(n.inputs[0]);
      const Tensor& b = value(n.inputs[1]);
      const MatView va = left_view(n.kind, a, n.attrs.transpose_a);
      const MatView vb = right_view(n.kind, b, n.attrs.transpose_b);
      if (va.cols != vb.rows) shape_error(n.kind, a, b);
      if (va.was_rank1 && vb.was_rank1)
        n.value = Tensor({1});
      else if (va.was_rank1)
        n.value = Tensor({vb.cols});
      else if (vb.was_rank1)
        n.value = Tensor({va.rows});
      else
        n.value = Tensor({va.rows, vb.cols});
      gemm_accum(va.trans, vb.trans, va.rows, vb.cols, va.cols, a.data.data(), va.ld,
                 b.data.data(), vb.ld, n.value.data.data(), vb.cols, 0.0);
      break;
    }
    case OpKind::kAffineRows: {
      expect_arity(n.kind, n.inputs, 3);
      const Tensor& x = value(n.inputs[0]);
      const Tensor& w = value(n.inputs[1]);
      const Tensor& b = value(n.inputs[2]);
      if (w.rank() != 2) shape_error(n.kind, w, "weight must be rank-2");
      if (b.rank() != 1 || b.size() != w.cols()) shape_error(n.kind, w, b);
      const MatView vx = left_view(n.kind, x, false);
      if (vx.cols != w.rows()) shape_error(n.kind, x, w);
      n.value = vx.was_rank1 ? Tensor({w.cols()}) : Tensor({vx.rows, w.cols()});
      gemm_accum(false, false, vx.rows, w.cols(), w.rows(), x.data.data(), vx.ld,
                 w.data.data(), w.cols(), n.value.data.data(), w.cols(), 0.0);
      const int64_t o = w.cols();
      for (int64_t r = 0; r < vx.rows; ++r)
        for (int64_t c = 0; c < o; ++c) n.value.data[static_cast<size_t>(r * o + c)] += b[c];
      break;
    }
    case OpKind::kReLU: {
      expect_arity(n.kind, n.inputs, 1);
      const Tensor& x = value(n.inputs[0]);
      n.value = Tensor(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) n.value[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    }
    case OpKind::kSoftmaxRows: {
      expect_arity(n.kind, n.inputs, 1);
      const Tensor& x = value(n.inputs[0]);
      const int64_t rows = x.rank() == 2 ? x.rows() : 1;
      const int64_t cols = x.rank() == 2 ? x.cols() : x.size();
      n.value = Tensor(x.shape);
      for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * cols;
        double* yr = n.value.data.data() + r * cols;
        double m = xr[0];
        for (int64_t c = 1; c < cols; ++c) m = std::max(m, xr[c]);
        double sum = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
          yr[c] = std::exp(xr[c] - m);  // shift keeps exp in range
          sum += yr[c];
        }
        for (int64_t c = 0; c < cols; ++c) yr[c] /= sum;
      }
      break;
    }
    case OpKind::kSumRows: {
      expect_arity(n.kind, n.inputs, 1);
      const Tensor& x = value(n.inputs[0]);
      const int64_t rows = x.rank() == 2 ? x.rows() : 1;
      const int64_t cols = x.rank() == 2 ? x.cols() : x.size();
      n.value = Tensor({rows});
      for (int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        const double* xr = x.data.data() + r * cols;
        for (int64_t c = 0; c < cols; ++c) s += xr[c];
        n.value[r] = s;
      }
      break;
    }
    case OpKind::kL2NormalizeVec: {
      expect_arity(n.kind, n.inputs, 1);
      const Tensor& x = value(n.inputs[0]);
      if (x.rank() != 1) shape_error(n.kind, x, "input must be rank-1");
      double ss = 0.0;
      for (int64_t i = 0; i < x.size(); ++i) ss += x[i] * x[i];
      const double d = std::max(std::sqrt(ss), kL2NormEps);
      n.value = Tensor(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) n.value[i] = x[i] / d;
      break;
    }
    case OpKind::kMaxRows: {
      expect_arity(n.kind, n.inputs, 1);
      const Tensor& x = value(n.inputs[0]);
      if (x.rank() == 1 || n.attrs.axis == 1) {
        const int64_t rows = x.rank() == 2 ? x.rows() : 1;
        const int64_t cols = x.rank() == 2 ? x.cols() : x.size();
        n.value = Tensor({rows});
        n.arg.assign(static_cast<size_t>(rows), 0);
        for (int64_t r = 0; r < rows; ++r) {
          const double* xr = x.data.data() + r * cols;
          int64_t best = 0;
          for (int64_t c = 1; c < cols; ++c)
            if (xr[c] > xr[best]) best = c;  // ties keep the lowest index
          n.value[r] = xr[best];
          n.arg[static_cast<size_t>(r)] = best;
        }
      } else if (n.attrs.axis == 0) {
        const int64_t rows = x.rows(), cols = x.cols();
        n.value = Tensor({cols});
        n.arg.assign(static_cast<size_t>(cols), 0);
        for (int64_t c = 0; c < cols; ++c) {
          int64_t best = 0;
          for (int64_t r = 1; r < rows; ++r)
            if (x.at(r, c) > x.at(best, c)) best = r;
          n.value[c] = x.at(best, c);
          n.arg[static_cast<size_t>(c)] = best;
        }
      } else {
        shape_error(n.kind, x, "axis must be 0 or 1");
      }
      break;
    }
    case OpKind::kConcat: {
      if (n.inputs.empty())
        throw std::invalid_argument("Concat: expected at least one input");
      int64_t total = 0;
      for (int id : n.inputs) total += value(id).size();
      n.value = Tensor({total});
      int64_t off = 0;
      for (int id : n.inputs) {
        const Tensor& x = value(id);
        std::memcpy(n.value.data.data() + off, x.data.data(),
                    static_cast<size_t>(x.size()) * sizeof(double));
        off += x.size();
      }
      break;
    }
    case OpKind::kScale: {
      expect_arity(n.kind, n.inputs, 1);
      const Tensor& x = value(n.inputs[0]);
      n.value = Tensor(x.shape);
      for (int64_t i = 0; i < x.size(); ++i) n.value[i] = n.attrs.factor * x[i];
      break;
    }
    case OpKind::kSub: {
      expect_arity(n.kind, n.inputs, 2);
      const Tensor& a = value(n.inputs[0]);
      const Tensor& b = value(n.inputs[1]);
      if (!a.same_shape(b)) shape_error(n.kind, a, b);
      n.value = Tensor(a.shape);
      for (int64_t i = 0; i < a.size(); ++i) n.value[i] = a[i] - b[i];
      break;
    }
    default:
      throw std::invalid_argument("Graph::apply: unknown primitive kind");
  }
}

double* Graph::grad_buffer(int id) {
  Node& n = node(id);
  if (!n.grad_set) {
    n.grad = Tensor(n.value.shape);
    n.grad_set = true;
  }
  return n.grad.data.data();
}

void Graph::accumulate(int id, const double* g, int64_t len) {
  double* buf = grad_buffer(id);
  for (int64_t i = 0; i < len; ++i) buf[i] += g[i];
}

Tensor Graph::grad_of(int id) const {
  const Node& n = node(id);
  return n.grad_set ? n.grad : Tensor(n.value.shape);
}

void Graph::backward(int loss_id) {
  const Node& loss = node(loss_id);
  if (loss.value.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                loss.value.shape_str());
  for (Node& n : nodes_) {
    n.grad = Tensor();
    n.grad_set = false;
  }
  double seed = 1.0;
  accumulate(loss_id, &seed, 1);
  for (int id = loss_id; id >= 0; --id) {
    const Node& n = node(id);
    if (!n.grad_set || n.kind == OpKind::kLeaf) continue;
    backprop(id);
  }
}

void Graph::backprop(int id) {
  // Copies out of node(id) stay valid while accumulate() grows the tape's
  // gradient buffers; nodes_ itself is not resized during backward.
  const Node& n = node(id);
  const Tensor& dy = n.grad;
  switch (n.kind) {
    case OpKind::kMatMul: {
      const Tensor& a = value(n.inputs[0]);
      const Tensor& b = value(n.inputs[1]);
      const MatView va = left_view(n.kind, a, n.attrs.transpose_a);
      const MatView vb = right_view(n.kind, b, n.attrs.transpose_b);
      const int64_t m = va.rows, k = va.cols, c = vb.cols;
      const double* dc = dy.data.data();
      double* da = grad_buffer(n.inputs[0]);
      if (!va.trans) {
        if (!vb.trans)  // dA += dC * B^T
          gemm_accum(false, true, m, k, c, dc, c, b.data.data(), vb.ld, da, va.ld, 1.0);
        else  // dA += dC * B
          gemm_accum(false, false, m, k, c, dc, c, b.data.data(), vb.ld, da, va.ld, 1.0);
      } else {
        if (!vb.trans)  // dA += B * dC^T
          gemm_accum(false, true, k, m, c, b.data.data(), vb.ld, dc, c, da, m, 1.0);
        else  // dA += B^T * dC^T
          gemm_accum(true, true, k, m, c, b.data.data(), vb.ld, dc, c, da, m, 1.0);
      }
      double* db = grad_buffer(n.inputs[1]);
      if (!vb.trans) {
        if (!va.trans)  // dB += A^T * dC
          gemm_accum(true, false, k, c, m, a.data.data(), va.ld, dc, c, db, vb.ld, 1.0);
        else  // dB += A * dC
          gemm_accum(false, false, k, c, m, a.data.data(), va.ld, dc, c, db, vb.ld, 1.0);
      } else {
        if (!va.trans)  // dB += dC^T * A
          gemm_accum(true, false, c, k, m, dc, c, a.data.data(), va.ld, db, k, 1.0);
        else  // dB += dC^T * A^T
          gemm_accum(true, true, c, k, m, dc, c, a.data.data(), va.ld, db, k, 1.0);
      }
      break;
    }
    case OpKind::kAffineRows: {
      const Tensor& x = value(n.inputs[0]);
      const Tensor& w = value(n.inputs[1]);
      const MatView vx = left_view(n.kind, x, false);
      const int64_t rows = vx.rows, i = w.rows(), o = w.cols();
      const double* dc = dy.data.data();
      // dX += dY * W^T
      gemm_accum(false, true, rows, i, o, dc, o, w.data.data(), o,
                 grad_buffer(n.inputs[0]), vx.ld, 1.0);
      // dW += X^T * dY
      gemm_accum(true, false, i, o, rows, x.data.data(), vx.ld, dc, o,
                 grad_buffer(n.inputs[1]), o, 1.0);
      double* db = grad_buffer(n.inputs[2]);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < o; ++c) db[c] += dc[r * o + c];
      break;
    }
    case OpKind::kReLU: {
      const Tensor& x = value(n.inputs[0]);
      double* dx = grad_buffer(n.inputs[0]);
      for (int64_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0) dx[i] += dy[i];  // subgradient at 0 is 0
      break;
    }
    case OpKind::kSoftmaxRows: {
      const Tensor& y = n.value;
      const int64_t rows = y.rank() == 2 ? y.rows() : 1;
      const int64_t cols = y.rank() == 2 ? y.cols() : y.size();
      double* dx = grad_buffer(n.inputs[0]);
      for (int64_t r = 0; r < rows; ++r) {
        const double* yr = y.data.data() + r * cols;
        const double* gr = dy.data.data() + r * cols;
        double dot = 0.0;
        for (int64_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
        for (int64_t c = 0; c < cols; ++c) dx[r * cols + c] += yr[c] * (gr[c] - dot);
      }
      break;
    }
    case OpKind::kSumRows: {
      const Tensor& x = value(n.inputs[0]);
      const int64_t rows = x.rank() == 2 ? x.rows() : 1;
      const int64_t cols = x.rank() == 2 ? x.cols() : x.size();
      double* dx = grad_buffer(n.inputs[0]);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) dx[r * cols + c] += dy[r];
      break;
    }
    case OpKind::kL2NormalizeVec: {
      const Tensor& x = value(n.inputs[0]);
      double ss = 0.0;
      for (int64_t i = 0; i < x.size(); ++i) ss += x[i] * x[i];
      const double norm = std::sqrt(ss);
      double* dx = grad_buffer(n.inputs[0]);
      if (norm >= kL2NormEps) {
        const Tensor& y = n.value;
        double dot = 0.0;
        for (int64_t i = 0; i < x.size(); ++i) dot += dy[i] * y[i];
        for (int64_t i = 0; i < x.size(); ++i) dx[i] += (dy[i] - y[i] * dot) / norm;
      } else {
        for (int64_t i = 0; i < x.size(); ++i) dx[i] += dy[i] / kL2NormEps;
      }
      break;
    }
    case OpKind::kMaxRows: {
      const Tensor& x = value(n.inputs[0]);
      double* dx = grad_buffer(n.inputs[0]);
      if (x.rank() == 1 || n.attrs.axis == 1) {
        const int64_t cols = x.rank() == 2 ? x.cols() : x.size();
        for (size_t r = 0; r < n.arg.size(); ++r)
          dx[static_cast<int64_t>(r) * cols + n.arg[r]] += dy[static_cast<int64_t>(r)];
      } else {
        const int64_t cols = x.cols();
        for (size_t c = 0; c < n.arg.size(); ++c)
          dx[n.arg[c] * cols + static_cast<int64_t>(c)] += dy[static_cast<int64_t>(c)];
      }
      break;
    }
    case OpKind::kConcat: {
      int64_t off = 0;
      for (int input : n.inputs) {
        const int64_t len = value(input).size();
        const double* slice = dy.data.data() + off;
        // A slice of exact zeros cannot change any gradient downstream;
        // skipping it keeps unselected loss branches off the sweep.
        if (!all_zero(slice, len)) accumulate(input, slice, len);
        off += len;
      }
      break;
    }
    case OpKind::kScale: {
      const int64_t len = dy.size();
      double* dx = grad_buffer(n.inputs[0]);
      for (int64_t i = 0; i < len; ++i) dx[i] += n.attrs.factor * dy[i];
      break;
    }
    case OpKind::kSub: {
      const int64_t len = dy.size();
      double* da = grad_buffer(n.inputs[0]);
      for (int64_t i = 0; i < len; ++i) da[i] += dy[i];
      double* db = grad_buffer(n.inputs[1]);
      for (int64_t i = 0; i < len; ++i) db[i] -= dy[i];
      break;
    }
    default:
      break;
  }
}

}  // namespace pnv

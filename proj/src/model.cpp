#include "pnv/model.hpp"

#include <cmath>
#include <stdexcept>

#include "pnv/rng.hpp"

namespace pnv {

namespace {
constexpr double kAssignSharpness = 10.0;
}

void ModelConfig::validate() const {
  if (n_points <= 0) throw std::invalid_argument("ModelConfig: n_points must be positive");
  if (mlp_widths.empty()) throw std::invalid_argument("ModelConfig: mlp_widths must be non-empty");
  for (int64_t w : mlp_widths)
    if (w <= 0) throw std::invalid_argument("ModelConfig: mlp widths must be positive");
  if (n_clusters <= 0) throw std::invalid_argument("ModelConfig: n_clusters must be positive");
  if (out_dim <= 0) throw std::invalid_argument("ModelConfig: out_dim must be positive");
  if (variant == Variant::kVlad && out_dim >= feature_dim() * n_clusters)
    throw std::invalid_argument(
        "ModelConfig: out_dim must be smaller than feature_dim * n_clusters, got " +
        std::to_string(out_dim) + " vs " + std::to_string(feature_dim() * n_clusters));
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.n_points = 4096;
  c.mlp_widths = {64, 128, 1024};
  c.n_clusters = 64;
  c.out_dim = 256;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.n_points = 8;
  c.mlp_widths = {8, 8};
  c.n_clusters = 4;
  c.out_dim = 8;
  return c;
}

namespace {

Tensor uniform_init(int64_t rows, int64_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t({rows, cols});
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  ModelParams p;
  int64_t in = 3;
  for (int64_t width : config.mlp_widths) {
    p.mlp.emplace_back(uniform_init(in, width, rng), Tensor({width}));
    in = width;
  }
  const int64_t k = config.n_clusters, d = config.feature_dim();
  p.clusters = Tensor({k, d});
  for (auto& v : p.clusters.data) v = rng.uniform(-1.0, 1.0);
  // Soft assignment starts as a sharpened nearest-cluster rule:
  // w column = 2*s*c_k, bias = -s*|c_k|^2, so logits order points by
  // -s*|p - c_k|^2 up to a shared per-point constant.
  p.assign_w = Tensor({d, k});
  p.assign_b = Tensor({k});
  for (int64_t kk = 0; kk < k; ++kk) {
    double sq = 0.0;
    for (int64_t dd = 0; dd < d; ++dd) {
      const double c = p.clusters.at(kk, dd);
      p.assign_w.at(dd, kk) = 2.0 * kAssignSharpness * c;
      sq += c * c;
    }
    p.assign_b[kk] = -kAssignSharpness * sq;
  }
  p.head_w = uniform_init(config.head_in(), config.out_dim, rng);
  p.head_b = Tensor({config.out_dim});
  return p;
}

std::vector<std::pair<std::string, const Tensor*>> named_params(const ModelParams& p) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (size_t i = 0; i < p.mlp.size(); ++i) {
    out.emplace_back("mlp" + std::to_string(i) + ".weight", &p.mlp[i].first);
    out.emplace_back("mlp" + std::to_string(i) + ".bias", &p.mlp[i].second);
  }
  out.emplace_back("clusters", &p.clusters);
  out.emplace_back("assign.weight", &p.assign_w);
  out.emplace_back("assign.bias", &p.assign_b);
  out.emplace_back("head.weight", &p.head_w);
  out.emplace_back("head.bias", &p.head_b);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> named_params(ModelParams& p) {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (const auto& [name, t] : named_params(static_cast<const ModelParams&>(p)))
    out.emplace_back(name, const_cast<Tensor*>(t));
  return out;
}

std::vector<Tensor> flatten_params(const ModelParams& p) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_params(p)) out.push_back(*t);
  return out;
}

ModelParams unflatten_params(const ModelConfig& config, const std::vector<Tensor>& flat) {
  const size_t expected = 2 * config.mlp_widths.size() + 5;
  if (flat.size() != expected)
    throw std::invalid_argument("unflatten_params: expected " + std::to_string(expected) +
                                " tensors, got " + std::to_string(flat.size()));
  ModelParams p;
  size_t i = 0;
  for (size_t l = 0; l < config.mlp_widths.size(); ++l) {
    Tensor w = flat[i++];
    Tensor b = flat[i++];
    p.mlp.emplace_back(std::move(w), std::move(b));
  }
  p.clusters = flat[i++];
  p.assign_w = flat[i++];
  p.assign_b = flat[i++];
  p.head_w = flat[i++];
  p.head_b = flat[i++];
  return p;
}

ParamIds add_param_leaves(Graph& g, const ModelParams& p, bool trainable) {
  ParamIds ids;
  for (const auto& [w, b] : p.mlp)
    ids.mlp.emplace_back(g.leaf(w, trainable), g.leaf(b, trainable));
  ids.clusters = g.leaf(p.clusters, trainable);
  ids.assign_w = g.leaf(p.assign_w, trainable);
  ids.assign_b = g.leaf(p.assign_b, trainable);
  ids.head_w = g.leaf(p.head_w, trainable);
  ids.head_b = g.leaf(p.head_b, trainable);
  return ids;
}

ParamIds param_ids_from_list(const ModelConfig& config, const std::vector<int>& list) {
  const size_t expected = 2 * config.mlp_widths.size() + 5;
  if (list.size() != expected)
    throw std::invalid_argument("param_ids_from_list: expected " + std::to_string(expected) +
                                " ids, got " + std::to_string(list.size()));
  ParamIds ids;
  size_t i = 0;
  for (size_t l = 0; l < config.mlp_widths.size(); ++l) {
    const int w = list[i++];
    const int b = list[i++];
    ids.mlp.emplace_back(w, b);
  }
  ids.clusters = list[i++];
  ids.assign_w = list[i++];
  ids.assign_b = list[i++];
  ids.head_w = list[i++];
  ids.head_b = list[i++];
  return ids;
}

int features_node(Graph& g, const ModelConfig& config, const ParamIds& ids, int cloud_id) {
  int x = cloud_id;
  for (size_t l = 0; l < ids.mlp.size(); ++l) {
    x = g.apply(OpKind::kAffineRows, {x, ids.mlp[l].first, ids.mlp[l].second});
    if (l + 1 < ids.mlp.size()) x = g.apply(OpKind::kReLU, {x});  // last layer stays linear
  }
  return x;
}

int vlad_raw_node(Graph& g, const ModelConfig& config, const ParamIds& ids, int features_id,
                  std::vector<int>* residual_rows) {
  const int64_t n = config.n_points, k = config.n_clusters;
  const int logits = g.apply(OpKind::kAffineRows, {features_id, ids.assign_w, ids.assign_b});
  const int assign = g.apply(OpKind::kSoftmaxRows, {logits});  // [N, K]
  Tensor ones({1, n});
  for (auto& v : ones.data) v = 1.0;
  const int ones_row = g.leaf(std::move(ones));
  OpAttrs ta;
  ta.transpose_a = true;
  // weighted = A^T P' [K,D] and masses = 1^T A [1,K] in one pass each;
  // V_k = weighted_k - masses_k * c_k is then assembled per cluster row.
  const int weighted = g.apply(OpKind::kMatMul, {assign, features_id}, ta);
  const int masses = g.apply(OpKind::kMatMul, {ones_row, assign});
  std::vector<int> residuals;
  residuals.reserve(static_cast<size_t>(k));
  for (int64_t kk = 0; kk < k; ++kk) {
    Tensor e_col({k, 1});
    e_col[kk] = 1.0;
    Tensor e_row({1, k});
    e_row[kk] = 1.0;
    const int pick = g.leaf(std::move(e_row));
    const int t1 = g.apply(OpKind::kMatMul, {pick, weighted});                  // [1,D]
    const int s_k = g.apply(OpKind::kMatMul, {masses, g.leaf(std::move(e_col))});  // [1,1]
    const int c_k = g.apply(OpKind::kMatMul, {pick, ids.clusters});             // [1,D]
    const int t2 = g.apply(OpKind::kMatMul, {s_k, c_k});                        // [1,D]
    residuals.push_back(g.apply(OpKind::kSub, {t1, t2}));
  }
  if (residual_rows) *residual_rows = residuals;
  return g.apply(OpKind::kConcat, residuals);
}

DescribeNodes describe_nodes(Graph& g, const ModelConfig& config, const ParamIds& ids,
                             const Tensor& cloud) {
  config.validate();
  if (cloud.rank() != 2 || cloud.cols() != 3 || cloud.rows() != config.n_points)
    throw std::invalid_argument("describe: cloud must be [" + std::to_string(config.n_points) +
                                ",3], got " + cloud.shape_str());
  const int cloud_id = g.leaf(cloud);
  const int features = features_node(g, config, ids, cloud_id);
  DescribeNodes out;
  int pooled;
  if (config.variant == Variant::kVlad) {
    std::vector<int> residual_rows;
    out.vlad_raw = vlad_raw_node(g, config, ids, features, &residual_rows);
    if (config.intra_norm) {
      std::vector<int> blocks;
      for (int r : residual_rows) {
        const int flat = g.apply(OpKind::kConcat, {r});
        blocks.push_back(g.apply(OpKind::kL2NormalizeVec, {flat}));
      }
      pooled = g.apply(OpKind::kL2NormalizeVec, {g.apply(OpKind::kConcat, blocks)});
    } else {
      pooled = g.apply(OpKind::kL2NormalizeVec, {out.vlad_raw});
    }
  } else {
    OpAttrs axis0;
    axis0.axis = 0;
    pooled = g.apply(OpKind::kMaxRows, {features}, axis0);  // [D]
  }
  const int head = g.apply(OpKind::kAffineRows, {pooled, ids.head_w, ids.head_b});
  out.descriptor = g.apply(OpKind::kL2NormalizeVec, {head});
  return out;
}

Tensor describe(const ModelConfig& config, const ModelParams& params, const Tensor& cloud) {
  Graph g;
  const ParamIds ids = add_param_leaves(g, params, /*trainable=*/false);
  return g.value(describe_nodes(g, config, ids, cloud).descriptor);
}

std::vector<Tensor> collect_param_grads(const Graph& g, const ParamIds& ids) {
  std::vector<Tensor> out;
  for (const auto& [w, b] : ids.mlp) {
    out.push_back(g.grad_of(w));
    out.push_back(g.grad_of(b));
  }
  out.push_back(g.grad_of(ids.clusters));
  out.push_back(g.grad_of(ids.assign_w));
  out.push_back(g.grad_of(ids.assign_b));
  out.push_back(g.grad_of(ids.head_w));
  out.push_back(g.grad_of(ids.head_b));
  return out;
}

}  // namespace pnv

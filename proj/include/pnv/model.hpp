#pragma once

// Global descriptor network: a shared per-point MLP lifts each point of a
// normalized cloud into feature space, a soft-assignment VLAD layer (or a
// per-dimension max pool in the kMax variant) aggregates the set, and a
// fully connected head compresses to a unit-length output vector.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pnv/graph.hpp"
#include "pnv/tensor.hpp"

namespace pnv {

enum class Variant { kVlad, kMax };

struct ModelConfig {
  int64_t n_points = 256;
  std::vector<int64_t> mlp_widths = {64, 128, 256};
  int64_t n_clusters = 16;
  int64_t out_dim = 64;
  Variant variant = Variant::kVlad;
  uint64_t seed = 0;
  bool intra_norm = true;  // per-cluster L2 before the global L2

  int64_t feature_dim() const { return mlp_widths.back(); }
  int64_t head_in() const {
    return variant == Variant::kVlad ? feature_dim() * n_clusters : feature_dim();
  }
  void validate() const;

  static ModelConfig desk();         // N=256, widths 64/128/256, K=16, O=64
  static ModelConfig paper_scale();  // N=4096, widths 64/128/1024, K=64, O=256
  static ModelConfig tiny();         // N=8, widths 8/8, K=4, O=8
};

struct ModelParams {
  std::vector<std::pair<Tensor, Tensor>> mlp;  // (weight [in,out], bias [out]) per layer
  Tensor clusters;                             // [K, D]
  Tensor assign_w;                             // [D, K]
  Tensor assign_b;                             // [K]
  Tensor head_w;                               // [head_in, O]
  Tensor head_b;                               // [O]
};

// Deterministic initialization from config.seed: uniform +-sqrt(6/(in+out))
// weights, zero biases, clusters uniform in (-1,1), and the assignment
// affine derived from the clusters so softmax assignment starts as a
// distance-based clustering (sharpness 10).
ModelParams init_params(const ModelConfig& config);

// Fixed parameter order shared by checkpoints, the optimizer and gradient
// collection: mlp0.weight, mlp0.bias, ..., clusters, assign.weight,
// assign.bias, head.weight, head.bias.
std::vector<std::pair<std::string, const Tensor*>> named_params(const ModelParams& p);
std::vector<std::pair<std::string, Tensor*>> named_params(ModelParams& p);
std::vector<Tensor> flatten_params(const ModelParams& p);
ModelParams unflatten_params(const ModelConfig& config, const std::vector<Tensor>& flat);

struct ParamIds {
  std::vector<std::pair<int, int>> mlp;
  int clusters = -1, assign_w = -1, assign_b = -1, head_w = -1, head_b = -1;
};

ParamIds add_param_leaves(Graph& g, const ModelParams& p, bool trainable = true);
ParamIds param_ids_from_list(const ModelConfig& config, const std::vector<int>& ids);

// Per-point feature matrix [N, D] for a cloud [N, 3].
int features_node(Graph& g, const ModelConfig& config, const ParamIds& ids, int cloud_id);

// Concatenated VLAD vector [D*K] before any normalization. residual_rows,
// when given, receives the K per-cluster [1,D] node ids.
int vlad_raw_node(Graph& g, const ModelConfig& config, const ParamIds& ids, int features_id,
                  std::vector<int>* residual_rows = nullptr);

struct DescribeNodes {
  int descriptor = -1;  // [O], unit length
  int vlad_raw = -1;    // [D*K] pre-normalization; -1 for the kMax variant
};

DescribeNodes describe_nodes(Graph& g, const ModelConfig& config, const ParamIds& ids,
                             const Tensor& cloud);

// Forward-only convenience; builds a throwaway graph.
Tensor describe(const ModelConfig& config, const ModelParams& params, const Tensor& cloud);

// Gradients in named_params order; zeros where the sweep did not reach.
std::vector<Tensor> collect_param_grads(const Graph& g, const ParamIds& ids);

}  // namespace pnv

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pnv/losses.hpp"
#include "pnv/model.hpp"
#include "pnv/pipeline.hpp"
#include "pnv/rng.hpp"

namespace pnv {

struct TrainConfig {
  LossKind loss = LossKind::kLazyQuadruplet;
  Margins margins;
  int tuples_per_batch = 3;
  int negatives_per_tuple = 18;
  int mining_pool = 2000;
  int cache_refresh_iters = 1000;
  int positives_sampled = 2;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int64_t max_iters = 2000;
  uint64_t seed = 0;
};

// Training submaps with their pairwise labels precomputed. Ids are indices
// into `submaps`. neg_mask holds one bit per submap pair (negative or not),
// so second-negative candidates come from mask intersections.
struct TrainingSet {
  std::vector<Submap> submaps;
  std::vector<std::vector<int>> positives;
  std::vector<std::vector<int>> negatives;
  std::vector<std::vector<uint64_t>> neg_mask;
};

TrainingSet build_training_set(std::vector<Submap> submaps, double positive_max_m = 10.0,
                               double negative_min_m = 50.0);

struct DescriptorCache {
  std::vector<Tensor> descriptors;  // by submap id
  int64_t refreshed_at = 0;
};

// Recomputes every descriptor with the given params; parallel over submaps.
DescriptorCache refresh_cache(const ModelConfig& config, const ModelParams& params,
                              const std::vector<Submap>& submaps, int64_t iteration);

struct TrainingTuple {
  int anchor = -1;
  int positive = -1;
  std::vector<int> negatives;
  int neg_star = -1;  // set only for the quadruplet kinds
};

// Anchor uniform over usable submaps; positive = nearer (in cached descriptor
// space) of positives_sampled random positives; negatives = the
// negatives_per_tuple cache-nearest among mining_pool random negatives;
// neg_star uniform among submaps negative to every tuple member. Throws after
// bounded retries when no usable anchor comes up.
TrainingTuple sample_tuple(const TrainingSet& set, const DescriptorCache& cache,
                           const TrainConfig& config, Rng& rng);

// Caps mining_pool at the set size and negatives_per_tuple at the pool,
// recording a warning per applied clamp.
TrainConfig clamp_to_set(const TrainConfig& config, int set_size,
                         std::vector<std::string>* warnings);

struct AdamState {
  std::vector<Tensor> m, v;
  int64_t t = 0;
};

// One bias-corrected Adam step on an arbitrary tensor list.
void adam_update(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                 AdamState& state, double lr, double beta1, double beta2, double eps);
void adam_update(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state,
                 const TrainConfig& config);

// Builds the mean-loss graph for the batch, backpropagates, applies one Adam
// step. Returns the batch loss evaluated before the update. Throws on a
// non-finite loss, naming the iteration and anchor ids.
double train_step(const ModelConfig& mcfg, ModelParams& params, AdamState& state,
                  const TrainingSet& set, const std::vector<TrainingTuple>& batch,
                  const TrainConfig& config, int64_t iteration);

struct TraceRow {
  int64_t iter = 0;
  double loss = 0;
  int64_t cache_age = 0;
  double probe_recall = 0;
  bool has_probe = false;
};

struct TrainResult {
  ModelParams params;
  std::vector<TraceRow> trace;
  std::vector<std::string> warnings;
};

// Full schedule: cache refresh every cache_refresh_iters, trace every 50
// iterations. `probe` (optional) is evaluated at each trace row on current
// params, e.g. held-out recall.
TrainResult train_loop(const ModelConfig& mcfg, const TrainingSet& set, const TrainConfig& config,
                       const ModelParams* initial = nullptr,
                       const std::function<double(const ModelParams&)>& probe = {});

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

}  // namespace pnv

#include "pnv/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pnv/parallel.hpp"

namespace pnv {

namespace {

constexpr int kAnchorRetries = 128;

}  // namespace

TrainingSet build_training_set(std::vector<Submap> submaps, double positive_max_m,
                               double negative_min_m) {
  TrainingSet set;
  set.submaps = std::move(submaps);
  const int n = static_cast<int>(set.submaps.size());
  const size_t words = (static_cast<size_t>(n) + 63) / 64;
  set.positives.resize(n);
  set.negatives.resize(n);
  set.neg_mask.assign(n, std::vector<uint64_t>(words, 0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const PairLabel label =
          label_pair(set.submaps[i], set.submaps[j], positive_max_m, negative_min_m);
      if (label == PairLabel::kPositive) {
        set.positives[i].push_back(j);
        set.positives[j].push_back(i);
      } else if (label == PairLabel::kNegative) {
        set.negatives[i].push_back(j);
        set.negatives[j].push_back(i);
        set.neg_mask[i][static_cast<size_t>(j) / 64] |= 1ULL << (j % 64);
        set.neg_mask[j][static_cast<size_t>(i) / 64] |= 1ULL << (i % 64);
      }
    }
  return set;
}

DescriptorCache refresh_cache(const ModelConfig& config, const ModelParams& params,
                              const std::vector<Submap>& submaps, int64_t iteration) {
  DescriptorCache cache;
  cache.refreshed_at = iteration;
  cache.descriptors.resize(submaps.size());
  parallel_for(static_cast<int64_t>(submaps.size()), [&](int64_t i) {
    cache.descriptors[static_cast<size_t>(i)] =
        describe(config, params, submaps[static_cast<size_t>(i)].cloud);
  });
  return cache;
}

TrainConfig clamp_to_set(const TrainConfig& config, int set_size,
                         std::vector<std::string>* warnings) {
  TrainConfig out = config;
  if (out.mining_pool > set_size) {
    if (warnings)
      warnings->push_back("mining pool " + std::to_string(out.mining_pool) +
                          " clamped to training-set size " + std::to_string(set_size));
    out.mining_pool = set_size;
  }
  if (out.negatives_per_tuple > out.mining_pool) {
    if (warnings)
      warnings->push_back("negatives per tuple " + std::to_string(out.negatives_per_tuple) +
                          " clamped to mining pool " + std::to_string(out.mining_pool));
    out.negatives_per_tuple = out.mining_pool;
  }
  return out;
}

namespace {

double cache_dist(const DescriptorCache& cache, int a, int b) {
  return sq_euclidean(cache.descriptors[static_cast<size_t>(a)],
                      cache.descriptors[static_cast<size_t>(b)]);
}

}  // namespace

TrainingTuple sample_tuple(const TrainingSet& set, const DescriptorCache& cache,
                           const TrainConfig& config, Rng& rng) {
  const int n = static_cast<int>(set.submaps.size());
  if (n == 0) throw std::invalid_argument("sample_tuple: empty training set");
  if (cache.descriptors.size() != set.submaps.size())
    throw std::invalid_argument("sample_tuple: cache does not cover the training set");
  const bool quad = needs_neg_star(config.loss);

  for (int attempt = 0; attempt < kAnchorRetries; ++attempt) {
    const int anchor = rng.next_int(n);
    const std::vector<int>& pos = set.positives[static_cast<size_t>(anchor)];
    const std::vector<int>& neg = set.negatives[static_cast<size_t>(anchor)];
    if (pos.empty() || static_cast<int>(neg.size()) < config.negatives_per_tuple) continue;

    TrainingTuple tuple;
    tuple.anchor = anchor;
    // nearer of positives_sampled random positives, ties to the lower id
    for (int i = 0; i < config.positives_sampled; ++i) {
      const int cand = pos[static_cast<size_t>(rng.next_int(static_cast<int>(pos.size())))];
      if (tuple.positive < 0) {
        tuple.positive = cand;
        continue;
      }
      const double have = cache_dist(cache, anchor, tuple.positive);
      const double now = cache_dist(cache, anchor, cand);
      if (now < have || (now == have && cand < tuple.positive)) tuple.positive = cand;
    }

    // hardest negatives_per_tuple out of a mining_pool-sized random sample
    const int64_t pool =
        std::min<int64_t>(config.mining_pool, static_cast<int64_t>(neg.size()));
    const std::vector<int64_t> drawn =
        sample_without_replacement(static_cast<int64_t>(neg.size()), pool, rng);
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(drawn.size());
    for (int64_t d : drawn) {
      const int id = neg[static_cast<size_t>(d)];
      ranked.emplace_back(cache_dist(cache, anchor, id), id);
    }
    std::sort(ranked.begin(), ranked.end());
    for (int i = 0; i < config.negatives_per_tuple; ++i)
      tuple.negatives.push_back(ranked[static_cast<size_t>(i)].second);

    if (quad) {
      // submaps negative to the anchor, the positive and every mined negative
      std::vector<uint64_t> mask = set.neg_mask[static_cast<size_t>(anchor)];
      auto intersect = [&mask, &set](int id) {
        const std::vector<uint64_t>& other = set.neg_mask[static_cast<size_t>(id)];
        for (size_t w = 0; w < mask.size(); ++w) mask[w] &= other[w];
      };
      intersect(tuple.positive);
      for (int id : tuple.negatives) intersect(id);
      std::vector<int> candidates;
      for (size_t w = 0; w < mask.size(); ++w)
        for (uint64_t bits = mask[w]; bits; bits &= bits - 1)
          candidates.push_back(static_cast<int>(w * 64) + std::countr_zero(bits));
      if (candidates.empty()) continue;  // try another anchor
      tuple.neg_star =
          candidates[static_cast<size_t>(rng.next_int(static_cast<int>(candidates.size())))];
    }
    return tuple;
  }
  throw std::runtime_error("sample_tuple: no usable anchor after " +
                           std::to_string(kAnchorRetries) + " attempts");
}

void adam_update(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                 AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_update: parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::zeros_like(*p));
      state.v.push_back(Tensor::zeros_like(*p));
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_update: state does not match the parameter list");
  state.t += 1;
  const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.shape != p.shape)
      throw std::invalid_argument("adam_update: gradient shape " + g.shape_str() +
                                  " does not match parameter shape " + p.shape_str());
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (size_t k = 0; k < p.data.size(); ++k) {
      m.data[k] = beta1 * m.data[k] + (1.0 - beta1) * g.data[k];
      v.data[k] = beta2 * v.data[k] + (1.0 - beta2) * g.data[k] * g.data[k];
      const double mhat = m.data[k] / corr1;
      const double vhat = v.data[k] / corr2;
      p.data[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void adam_update(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state,
                 const TrainConfig& config) {
  std::vector<Tensor*> list;
  for (auto& [name, tensor] : named_params(params)) list.push_back(tensor);
  adam_update(list, grads, state, config.learning_rate, config.beta1, config.beta2,
              config.adam_eps);
}

double train_step(const ModelConfig& mcfg, ModelParams& params, AdamState& state,
                  const TrainingSet& set, const std::vector<TrainingTuple>& batch,
                  const TrainConfig& config, int64_t iteration) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  Graph g;
  const ParamIds ids = add_param_leaves(g, params);
  auto desc = [&](int submap_id) {
    return describe_nodes(g, mcfg, ids, set.submaps[static_cast<size_t>(submap_id)].cloud)
        .descriptor;
  };
  std::vector<int> losses;
  for (const TrainingTuple& t : batch) {
    const int anchor = desc(t.anchor);
    const int positive = desc(t.positive);
    std::vector<int> negatives;
    for (int id : t.negatives) negatives.push_back(desc(id));
    const int neg_star = t.neg_star >= 0 ? desc(t.neg_star) : -1;
    losses.push_back(
        tuple_loss_node(g, config.loss, config.margins, anchor, positive, negatives, neg_star));
  }
  int total = losses.size() == 1 ? losses[0] : g.apply(OpKind::kConcat, losses);
  if (losses.size() > 1) total = g.apply(OpKind::kSumRows, {total});
  OpAttrs mean;
  mean.factor = 1.0 / static_cast<double>(losses.size());
  const int loss_id = g.apply(OpKind::kScale, {total}, mean);
  const double loss = g.value(loss_id).data[0];
  if (!std::isfinite(loss)) {
    std::string anchors;
    for (const TrainingTuple& t : batch)
      anchors += (anchors.empty() ? "" : ",") + std::to_string(t.anchor);
    throw std::runtime_error("train_step: non-finite loss at iteration " +
                             std::to_string(iteration) + " (anchors " + anchors + ")");
  }
  g.backward(loss_id);
  adam_update(params, collect_param_grads(g, ids), state, config);
  return loss;
}

TrainResult train_loop(const ModelConfig& mcfg, const TrainingSet& set, const TrainConfig& config,
                       const ModelParams* initial,
                       const std::function<double(const ModelParams&)>& probe) {
  if (set.submaps.empty()) throw std::invalid_argument("train_loop: empty training set");
  if (config.max_iters <= 0) throw std::invalid_argument("train_loop: max_iters must be positive");
  TrainResult result;
  const TrainConfig cfg = clamp_to_set(config, static_cast<int>(set.submaps.size()),
                                       &result.warnings);
  result.params = initial ? *initial : init_params(mcfg);
  AdamState state;
  Rng rng(cfg.seed);
  DescriptorCache cache = refresh_cache(mcfg, result.params, set.submaps, 1);
  for (int64_t iter = 1; iter <= cfg.max_iters; ++iter) {
    if (iter - cache.refreshed_at >= cfg.cache_refresh_iters)
      cache = refresh_cache(mcfg, result.params, set.submaps, iter);
    std::vector<TrainingTuple> batch;
    for (int t = 0; t < cfg.tuples_per_batch; ++t)
      batch.push_back(sample_tuple(set, cache, cfg, rng));
    const double loss = train_step(mcfg, result.params, state, set, batch, cfg, iter);
    if (iter % 50 == 0 || iter == cfg.max_iters) {
      TraceRow row;
      row.iter = iter;
      row.loss = loss;
      row.cache_age = iter - cache.refreshed_at;
      if (probe) {
        row.probe_recall = probe(result.params);
        row.has_probe = true;
      }
      result.trace.push_back(row);
    }
  }
  return result;
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const bool probed = !trace.empty() && trace.front().has_probe;
  std::fprintf(f, probed ? "iter\tloss\tcache_age\tprobe_recall\n" : "iter\tloss\tcache_age\n");
  for (const TraceRow& row : trace) {
    if (row.has_probe)
      std::fprintf(f, "%lld\t%.17g\t%lld\t%.17g\n", static_cast<long long>(row.iter), row.loss,
                   static_cast<long long>(row.cache_age), row.probe_recall);
    else
      std::fprintf(f, "%lld\t%.17g\t%lld\n", static_cast<long long>(row.iter), row.loss,
                   static_cast<long long>(row.cache_age));
  }
  if (std::fclose(f) != 0) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace pnv

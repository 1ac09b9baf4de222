#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pnv/model.hpp"
#include "pnv/pipeline.hpp"

namespace pnv {

struct IndexEntry {
  int submap_id = -1;
  std::string run_id;
  Vec2 centroid_xy;
  Tensor descriptor;  // [dim], unit length
};

struct DescriptorIndex {
  std::vector<IndexEntry> entries;
  int64_t dim = 0;
};

// One descriptor per submap, computed in parallel; ids follow input order.
DescriptorIndex build_index(const ModelConfig& config, const ModelParams& params,
                            const std::vector<Submap>& submaps);

// Exact k nearest entries by squared Euclidean distance, ascending, distance
// ties broken by ascending id. Linear scan over the whole index.
std::vector<std::pair<int, double>> query_knn(const DescriptorIndex& index, const Tensor& query,
                                              int k);

struct QueryOutcome {
  int query_id = -1;
  std::vector<int> retrieved;     // ranked ids
  std::vector<double> distances;  // squared, same order
  std::vector<bool> within;       // entry centroid within the success radius
};

struct EvalReport {
  std::vector<double> recall_at_n;  // percent, N = 1..max_n
  double recall_top1pct = 0;
  std::vector<QueryOutcome> queries;
  int64_t database_size = 0;
  double radius_m = 0;
  int max_n = 0;
  int top1pct_n = 0;  // ceil(1% of database size)
};

// A query at N succeeds when any of its top N retrievals lies within radius_m
// of the query centroid; recalls are means over queries, in percent.
EvalReport evaluate(const DescriptorIndex& db,
                    const std::vector<std::pair<Submap, Tensor>>& queries, double radius_m = 25.0,
                    int max_n = 25);

// recall_curve.tsv (n, recall) and summary.tsv (key, value), byte-stable.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace pnv

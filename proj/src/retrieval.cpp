#include "pnv/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

#include "pnv/losses.hpp"
#include "pnv/parallel.hpp"

namespace pnv {

DescriptorIndex build_index(const ModelConfig& config, const ModelParams& params,
                            const std::vector<Submap>& submaps) {
  DescriptorIndex index;
  index.dim = config.out_dim;
  index.entries.resize(submaps.size());
  parallel_for(static_cast<int64_t>(submaps.size()), [&](int64_t i) {
    const Submap& sm = submaps[static_cast<size_t>(i)];
    IndexEntry& e = index.entries[static_cast<size_t>(i)];
    e.submap_id = static_cast<int>(i);
    e.run_id = sm.run_id;
    e.centroid_xy = sm.centroid_xy;
    e.descriptor = describe(config, params, sm.cloud);
  });
  return index;
}

std::vector<std::pair<int, double>> query_knn(const DescriptorIndex& index, const Tensor& query,
                                              int k) {
  const int n = static_cast<int>(index.entries.size());
  if (k < 1 || k > n)
    throw std::invalid_argument("query_knn: k=" + std::to_string(k) +
                                " outside [1, " + std::to_string(n) + "]");
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(static_cast<size_t>(n));
  for (const IndexEntry& e : index.entries)
    ranked.emplace_back(sq_euclidean(query, e.descriptor), e.submap_id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::pair<int, double>> out;
  out.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) out.emplace_back(ranked[static_cast<size_t>(i)].second,
                                               ranked[static_cast<size_t>(i)].first);
  return out;
}

EvalReport evaluate(const DescriptorIndex& db,
                    const std::vector<std::pair<Submap, Tensor>>& queries, double radius_m,
                    int max_n) {
  if (queries.empty()) throw std::invalid_argument("evaluate: empty query set");
  if (db.entries.empty()) throw std::invalid_argument("evaluate: empty database");
  if (max_n < 1 || radius_m <= 0)
    throw std::invalid_argument("evaluate: need positive radius and max_n");

  EvalReport report;
  report.database_size = static_cast<int64_t>(db.entries.size());
  report.radius_m = radius_m;
  report.max_n = max_n;
  report.top1pct_n = static_cast<int>((report.database_size + 99) / 100);
  const int k =
      static_cast<int>(std::min<int64_t>(report.database_size,
                                         std::max<int64_t>(max_n, report.top1pct_n)));

  std::unordered_map<int, Vec2> centroid_of;
  for (const IndexEntry& e : db.entries) centroid_of.emplace(e.submap_id, e.centroid_xy);

  report.queries.resize(queries.size());
  parallel_for(static_cast<int64_t>(queries.size()), [&](int64_t qi) {
    const auto& [submap, descriptor] = queries[static_cast<size_t>(qi)];
    QueryOutcome& out = report.queries[static_cast<size_t>(qi)];
    out.query_id = static_cast<int>(qi);
    for (const auto& [id, dist] : query_knn(db, descriptor, k)) {
      out.retrieved.push_back(id);
      out.distances.push_back(dist);
      out.within.push_back(dist2d(centroid_of.at(id), submap.centroid_xy) <= radius_m);
    }
  });

  report.recall_at_n.assign(static_cast<size_t>(max_n), 0.0);
  auto recall_at = [&](int n) {
    int hits = 0;
    for (const QueryOutcome& q : report.queries) {
      const int upto = std::min<int>(n, static_cast<int>(q.within.size()));
      for (int i = 0; i < upto; ++i)
        if (q.within[static_cast<size_t>(i)]) {
          ++hits;
          break;
        }
    }
    return 100.0 * hits / static_cast<double>(report.queries.size());
  };
  for (int n = 1; n <= max_n; ++n) report.recall_at_n[static_cast<size_t>(n - 1)] = recall_at(n);
  report.recall_top1pct = recall_at(report.top1pct_n);
  return report;
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  auto open = [](const std::filesystem::path& p) {
    FILE* f = std::fopen(p.string().c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
    return f;
  };
  auto close = [](FILE* f, const std::filesystem::path& p) {
    if (std::fclose(f) != 0) throw std::runtime_error("write failed for " + p.string());
  };

  const std::filesystem::path curve_path = dir / "recall_curve.tsv";
  FILE* curve = open(curve_path);
  std::fprintf(curve, "n\trecall\n");
  for (size_t i = 0; i < report.recall_at_n.size(); ++i)
    std::fprintf(curve, "%zu\t%.17g\n", i + 1, report.recall_at_n[i]);
  close(curve, curve_path);

  const std::filesystem::path summary_path = dir / "summary.tsv";
  FILE* summary = open(summary_path);
  std::fprintf(summary, "key\tvalue\n");
  std::fprintf(summary, "database_size\t%lld\n", static_cast<long long>(report.database_size));
  std::fprintf(summary, "query_count\t%zu\n", report.queries.size());
  std::fprintf(summary, "radius_m\t%.17g\n", report.radius_m);
  std::fprintf(summary, "max_n\t%d\n", report.max_n);
  std::fprintf(summary, "top1pct_n\t%d\n", report.top1pct_n);
  std::fprintf(summary, "recall_top1pct\t%.17g\n", report.recall_top1pct);
  std::fprintf(summary, "recall_at_1\t%.17g\n", report.recall_at_n.front());
  std::fprintf(summary, "recall_at_max\t%.17g\n", report.recall_at_n.back());
  close(summary, summary_path);
}

}  // namespace pnv

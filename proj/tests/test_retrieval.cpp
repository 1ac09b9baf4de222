#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "pnv/losses.hpp"
#include "pnv/retrieval.hpp"
#include "pnv/rng.hpp"

using namespace pnv;

namespace {

Tensor unit_vec(std::vector<double> v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return Tensor::from_vector(v);
}

DescriptorIndex random_index(int n, int dim, uint64_t seed) {
  Rng rng(seed);
  DescriptorIndex index;
  index.dim = dim;
  for (int i = 0; i < n; ++i) {
    IndexEntry e;
    e.submap_id = i;
    e.run_id = "db";
    e.centroid_xy = {rng.uniform(0, 500), rng.uniform(0, 500)};
    std::vector<double> v(static_cast<size_t>(dim));
    for (double& x : v) x = rng.normal();
    e.descriptor = unit_vec(std::move(v));
    index.entries.push_back(std::move(e));
  }
  return index;
}

Tensor random_unit(int dim, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(dim));
  for (double& x : v) x = rng.normal();
  return unit_vec(std::move(v));
}

}  // namespace

TEST_CASE("index construction from submaps") {
  const ModelConfig mcfg = ModelConfig::tiny();
  const ModelParams params = init_params(mcfg);
  Rng rng(2);
  std::vector<Submap> submaps;
  for (int i = 0; i < 9; ++i) {
    Submap s;
    s.run_id = "runA";
    s.centroid_xy = {10.0 * i, 0.0};
    s.cloud = Tensor({8, 3});
    for (auto& v : s.cloud.data) v = rng.uniform(-1, 1);
    submaps.push_back(std::move(s));
  }
  const DescriptorIndex index = build_index(mcfg, params, submaps);
  REQUIRE(index.entries.size() == 9);
  CHECK(index.dim == mcfg.out_dim);
  for (int i = 0; i < 9; ++i) {
    const IndexEntry& e = index.entries[static_cast<size_t>(i)];
    CHECK(e.submap_id == i);
    CHECK(e.run_id == "runA");
    double norm = 0;
    for (double v : e.descriptor.data) norm += v * v;
    CHECK(std::fabs(norm - 1.0) < 1e-12);
  }
  const DescriptorIndex again = build_index(mcfg, params, submaps);
  for (size_t i = 0; i < 9; ++i)
    CHECK(max_abs_diff(index.entries[i].descriptor, again.entries[i].descriptor) == 0.0);
}

TEST_CASE("knn matches the brute-force oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const DescriptorIndex index = random_index(200, 16, 100 + trial);
    const Tensor q = random_unit(16, rng);
    const int k = 1 + rng.next_int(200);
    const auto got = query_knn(index, q, k);
    REQUIRE(static_cast<int>(got.size()) == k);

    std::vector<std::pair<double, int>> oracle;
    for (const IndexEntry& e : index.entries)
      oracle.emplace_back(sq_euclidean(q, e.descriptor), e.submap_id);
    std::sort(oracle.begin(), oracle.end());
    for (int i = 0; i < k; ++i) {
      CHECK(got[static_cast<size_t>(i)].first == oracle[static_cast<size_t>(i)].second);
      CHECK(got[static_cast<size_t>(i)].second == oracle[static_cast<size_t>(i)].first);
    }
    for (size_t i = 0; i + 1 < got.size(); ++i) CHECK(got[i].second <= got[i + 1].second);
  }
}

TEST_CASE("knn edge cases and ties") {
  DescriptorIndex index = random_index(50, 8, 3);
  const Tensor self = index.entries[31].descriptor;
  const auto hit = query_knn(index, self, 1);
  CHECK(hit[0].first == 31);
  CHECK(hit[0].second == 0.0);

  CHECK_THROWS_AS(query_knn(index, self, 0), std::invalid_argument);
  CHECK_THROWS_AS(query_knn(index, self, 51), std::invalid_argument);

  // duplicated descriptors: equal distances rank by ascending id
  index.entries[40].descriptor = index.entries[10].descriptor;
  const auto tied = query_knn(index, index.entries[10].descriptor, 2);
  CHECK(tied[0].first == 10);
  CHECK(tied[1].first == 40);
  CHECK(tied[0].second == tied[1].second);
}

TEST_CASE("evaluation protocol on a constructed fixture") {
  // db entry 0: closest descriptor but 100 m away; entry 1: second closest, 5 m
  DescriptorIndex db;
  db.dim = 2;
  const char* names[] = {"near_desc_far_place", "good", "far1", "far2"};
  const double angle[] = {0.05, 0.1, 1.2, 1.4};
  const Vec2 spots[] = {{100, 0}, {5, 0}, {200, 0}, {300, 0}};
  for (int i = 0; i < 4; ++i) {
    IndexEntry e;
    e.submap_id = i;
    e.run_id = names[i];
    e.centroid_xy = spots[i];
    e.descriptor = unit_vec({std::cos(angle[i]), std::sin(angle[i])});
    db.entries.push_back(std::move(e));
  }
  Submap q;
  q.centroid_xy = {0, 0};
  const EvalReport report = evaluate(db, {{q, unit_vec({1.0, 0.0})}}, 25.0, 4);
  REQUIRE(report.recall_at_n.size() == 4);
  CHECK(report.recall_at_n[0] == 0.0);    // rank 1 is the 100 m impostor
  CHECK(report.recall_at_n[1] == 100.0);  // rank 2 is 5 m away
  CHECK(report.recall_at_n[2] == 100.0);
  CHECK(report.top1pct_n == 1);
  CHECK(report.recall_top1pct == report.recall_at_n[0]);
  REQUIRE(report.queries.size() == 1);
  CHECK(report.queries[0].retrieved[0] == 0);
  CHECK(report.queries[0].retrieved[1] == 1);
  CHECK(report.queries[0].within[0] == false);
  CHECK(report.queries[0].within[1] == true);

  // all queries far from every centroid: zero everywhere
  Submap nowhere;
  nowhere.centroid_xy = {5000, 5000};
  const EvalReport zero = evaluate(db, {{nowhere, unit_vec({1.0, 0.0})}}, 25.0, 4);
  for (double r : zero.recall_at_n) CHECK(r == 0.0);
  CHECK(zero.recall_top1pct == 0.0);

  CHECK_THROWS_AS(evaluate(db, {}, 25.0, 4), std::invalid_argument);
}

TEST_CASE("recall curve properties on random data") {
  Rng rng(19);
  const DescriptorIndex db = random_index(300, 16, 40);
  CHECK(static_cast<int>((db.entries.size() + 99) / 100) == 3);
  std::vector<std::pair<Submap, Tensor>> queries;
  for (int i = 0; i < 40; ++i) {
    Submap s;
    s.centroid_xy = {rng.uniform(0, 500), rng.uniform(0, 500)};
    queries.emplace_back(s, random_unit(16, rng));
  }
  const EvalReport report = evaluate(db, queries, 25.0, 25);
  CHECK(report.top1pct_n == 3);
  for (size_t i = 0; i + 1 < report.recall_at_n.size(); ++i)
    CHECK(report.recall_at_n[i] <= report.recall_at_n[i + 1]);
  for (double r : report.recall_at_n) {
    CHECK(r >= 0.0);
    CHECK(r <= 100.0);
  }
  CHECK(report.recall_top1pct == report.recall_at_n[2]);

  // permuting the database (ids travel with their entries) changes nothing
  DescriptorIndex shuffled = db;
  Rng perm(5);
  shuffle(shuffled.entries, perm);
  const EvalReport other = evaluate(shuffled, queries, 25.0, 25);
  CHECK(other.recall_at_n == report.recall_at_n);
  for (size_t i = 0; i < report.queries.size(); ++i)
    CHECK(other.queries[i].retrieved == report.queries[i].retrieved);
}

TEST_CASE("report files") {
  namespace fs = std::filesystem;
  Rng rng(23);
  const DescriptorIndex db = random_index(120, 8, 60);
  std::vector<std::pair<Submap, Tensor>> queries;
  for (int i = 0; i < 10; ++i) {
    Submap s;
    s.centroid_xy = {rng.uniform(0, 500), rng.uniform(0, 500)};
    queries.emplace_back(s, random_unit(8, rng));
  }
  const EvalReport report = evaluate(db, queries, 25.0, 25);
  const fs::path dir = fs::temp_directory_path() / "pnv_report_test";
  fs::remove_all(dir);
  emit_report(report, dir / "a");
  emit_report(report, dir / "b");

  std::ifstream curve(dir / "a" / "recall_curve.tsv");
  std::string line;
  std::getline(curve, line);
  CHECK(line == "n\trecall");
  int rows = 0;
  while (std::getline(curve, line)) ++rows;
  CHECK(rows == 25);

  for (const char* name : {"recall_curve.tsv", "summary.tsv"}) {
    std::ifstream fa(dir / "a" / name, std::ios::binary);
    std::ifstream fb(dir / "b" / name, std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
    CHECK(!ba.empty());
  }

  // the summary's top-1% figure agrees with the curve at that N
  std::ifstream summary(dir / "a" / "summary.tsv");
  double top1 = -1;
  int n1 = -1;
  while (std::getline(summary, line)) {
    std::istringstream ss(line);
    std::string key, value;
    ss >> key >> value;
    if (key == "recall_top1pct") top1 = std::stod(value);
    if (key == "top1pct_n") n1 = std::stoi(value);
  }
  REQUIRE(n1 >= 1);
  CHECK(top1 == report.recall_at_n[static_cast<size_t>(n1 - 1)]);
  fs::remove_all(dir);
}

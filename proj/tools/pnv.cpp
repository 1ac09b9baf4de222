#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnv/retrieval.hpp"
#include "pnv/rng.hpp"
#include "pnv/store.hpp"
#include "pnv/synthworld.hpp"
#include "pnv/training.hpp"

namespace {

using namespace pnv;

// Flag combinations the parser cannot catch; reported with usage, exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kTau = 6.283185307179586476925286766559;

LossKind loss_from_flag(const std::string& name) {
  std::string canonical = name;
  if (name == "quad") canonical = "quadruplet";
  if (name == "lazy_quad") canonical = "lazy_quadruplet";
  try {
    return parse_loss_name(canonical);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string(e.what()) + " (quad and lazy_quad are accepted shorthands)");
  }
}

struct SynthArgs {
  uint64_t seed = 1;
  int runs = 2;
  double extent = 600.0;
  double interval = 10.0;
  int64_t landmarks = -1;  // negative: one per 150 m^2
  int64_t target_points = 256;
  double route_radius = 0.0;  // zero: route length == extent
  double spacing = 2.0;
  std::string out;
};

int cmd_synth(const SynthArgs& args) {
  WorldSpec spec;
  spec.seed = args.seed;
  spec.extent_m = args.extent;
  spec.n_landmarks = static_cast<int>(
      args.landmarks >= 0 ? args.landmarks
                          : std::llround(args.extent * args.extent / 150.0));
  const World world = generate_world(spec);

  const double radius = args.route_radius > 0 ? args.route_radius : args.extent / kTau;
  std::vector<RunSpec> runs;
  for (int i = 0; i < args.runs; ++i) {
    RunSpec run;
    run.seed = mix_seed({args.seed, static_cast<uint64_t>(i), 0x72756e73});
    run.run_id = "run" + std::to_string(i);
    // Shift each traversal 5 m along the loop: same places, distinct poses.
    run.route = circle_route({args.extent / 2.0, args.extent / 2.0}, radius, 128,
                             5.0 * static_cast<double>(i) / radius);
    run.scan_spacing_m = args.spacing;
    runs.push_back(std::move(run));
  }
  PipelineConfig pipeline;
  pipeline.interval_m = args.interval;
  pipeline.target_points = args.target_points;

  const DatasetSummary summary = emit_dataset(world, runs, pipeline, args.out);
  std::printf("world: %zu landmarks over %.17g m\n", world.landmarks.size(), spec.extent_m);
  for (const auto& [run_id, count] : summary.submap_counts)
    std::printf("%s: %d submaps\n", run_id.c_str(), count);
  if (!summary.warnings.empty())
    std::printf("%zu interval(s) skipped; see dataset warnings below\n",
                summary.warnings.size());
  for (const std::string& w : summary.warnings) std::printf("warning: %s\n", w.c_str());
  return 0;
}

struct TrainArgs {
  std::string data, out, config_path, loss;
  int64_t iters = -1;
  int64_t seed = -1;
};

RunConfig load_run_config(const std::string& path) {
  return path.empty() ? RunConfig{} : parse_run_config(path);
}

int cmd_train(const TrainArgs& args) {
  RunConfig rc = load_run_config(args.config_path);
  if (!args.loss.empty()) rc.train.loss = loss_from_flag(args.loss);
  if (args.iters >= 0) rc.train.max_iters = args.iters;
  if (args.seed >= 0) {
    rc.train.seed = static_cast<uint64_t>(args.seed);
    rc.model.seed = static_cast<uint64_t>(args.seed);
  }

  const Dataset dataset = load_dataset(args.data);
  const SplitResult split =
      split_regions(dataset.submaps, rc.test_fraction, rc.region_m, rc.split_seed);
  std::filesystem::create_directories(args.out);
  save_split(std::filesystem::path(args.out) / "split.tsv", dataset, split);

  std::vector<Submap> train_submaps;
  for (int i : split.train) train_submaps.push_back(dataset.submaps[static_cast<size_t>(i)]);
  for (const Submap& sm : train_submaps)
    if (sm.cloud.rows() != rc.model.n_points)
      throw std::runtime_error("submap has " + std::to_string(sm.cloud.rows()) +
                               " points but the model expects " +
                               std::to_string(rc.model.n_points) +
                               "; align target_points and n_points");
  const TrainingSet set = build_training_set(std::move(train_submaps),
                                             rc.pipeline.positive_max_m,
                                             rc.pipeline.negative_min_m);
  std::printf("training on %zu submaps (%zu held out), loss %s, %lld iterations\n",
              set.submaps.size(), split.test.size(), loss_name(rc.train.loss),
              static_cast<long long>(rc.train.max_iters));
  const TrainResult result = train_loop(rc.model, set, rc.train);
  for (const std::string& w : result.warnings) std::printf("warning: %s\n", w.c_str());

  const std::filesystem::path out(args.out);
  save_checkpoint(out / "checkpoint.ckpt", rc.model, result.params);
  write_trace(out / "trace.tsv", result.trace);
  if (!result.trace.empty())
    std::printf("final loss %.17g at iteration %lld\n", result.trace.back().loss,
                static_cast<long long>(result.trace.back().iter));
  std::printf("wrote %s and %s\n", (out / "checkpoint.ckpt").string().c_str(),
              (out / "trace.tsv").string().c_str());
  return 0;
}

std::vector<Submap> run_part(const Dataset& dataset, const SplitResult& split,
                             const std::string& run_id, const std::string& part) {
  std::vector<bool> wanted(dataset.submaps.size(), part == "all");
  if (part == "train")
    for (int i : split.train) wanted[static_cast<size_t>(i)] = true;
  if (part == "test")
    for (int i : split.test) wanted[static_cast<size_t>(i)] = true;
  std::vector<Submap> out;
  bool run_seen = false;
  for (size_t i = 0; i < dataset.submaps.size(); ++i) {
    if (dataset.submaps[i].run_id != run_id) continue;
    run_seen = true;
    if (wanted[i]) out.push_back(dataset.submaps[i]);
  }
  if (!run_seen) throw std::runtime_error("run '" + run_id + "' is not in the dataset");
  if (out.empty())
    throw std::runtime_error("run '" + run_id + "' has no submaps in the " + part + " part");
  return out;
}

struct IndexArgs {
  std::string checkpoint, data, db_run, out, config_path, split_path;
  std::string part = "test";
};

int cmd_index(const IndexArgs& args) {
  if (args.part != "test" && args.part != "train" && args.part != "all")
    throw UsageError("--part must be test, train or all");
  const RunConfig rc = load_run_config(args.config_path);
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  const Dataset dataset = load_dataset(args.data);
  const SplitResult split =
      args.split_path.empty()
          ? split_regions(dataset.submaps, rc.test_fraction, rc.region_m, rc.split_seed)
          : load_split(args.split_path, dataset);
  const std::vector<Submap> submaps = run_part(dataset, split, args.db_run, args.part);
  const DescriptorIndex index = build_index(ck.config, ck.params, submaps);
  save_index(args.out, index);
  std::printf("indexed %zu submaps of %s (dimension %lld) into %s\n", index.entries.size(),
              args.db_run.c_str(), static_cast<long long>(index.dim), args.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, db_run, query_run, index_path, out, config_path, split_path;
  double radius = 25.0;
  int topn = 25;
};

int cmd_eval(const EvalArgs& args) {
  if (args.db_run == args.query_run)
    throw UsageError("query run must differ from the database run (got '" + args.db_run +
                     "' for both)");
  const RunConfig rc = load_run_config(args.config_path);
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  const Dataset dataset = load_dataset(args.data);
  const SplitResult split =
      args.split_path.empty()
          ? split_regions(dataset.submaps, rc.test_fraction, rc.region_m, rc.split_seed)
          : load_split(args.split_path, dataset);

  DescriptorIndex db;
  if (args.index_path.empty()) {
    db = build_index(ck.config, ck.params, run_part(dataset, split, args.db_run, "test"));
  } else {
    db = load_index(args.index_path);
    if (db.dim != ck.config.out_dim)
      throw std::runtime_error("descriptor dimension mismatch: checkpoint produces " +
                               std::to_string(ck.config.out_dim) + ", index file holds " +
                               std::to_string(db.dim));
  }

  const std::vector<Submap> query_submaps = run_part(dataset, split, args.query_run, "test");
  const DescriptorIndex qdesc = build_index(ck.config, ck.params, query_submaps);
  std::vector<std::pair<Submap, Tensor>> queries;
  for (size_t i = 0; i < query_submaps.size(); ++i)
    queries.emplace_back(query_submaps[i], qdesc.entries[i].descriptor);

  const EvalReport report = evaluate(db, queries, args.radius, args.topn);
  emit_report(report, args.out);
  std::printf("database %lld, queries %zu, radius %.17g m\n",
              static_cast<long long>(report.database_size), report.queries.size(),
              report.radius_m);
  std::printf("recall@1 %.17g%%\n", report.recall_at_n.front());
  std::printf("recall@%d %.17g%%\n", report.max_n, report.recall_at_n.back());
  std::printf("recall@top1%%(N=%d) %.17g%%\n", report.top1pct_n, report.recall_top1pct);
  std::printf("report written to %s\n", args.out.c_str());
  return 0;
}

struct BenchArgs {
  std::string sizes = "1000,10000";
  int64_t dim = 256;
  int queries = 200;
  uint64_t seed = 1;
};

double median_ms(std::vector<double>& samples) {
  std::sort(samples.begin(), samples.end());
  const size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

int cmd_bench(const BenchArgs& args) {
  using clock = std::chrono::steady_clock;
  Rng rng(args.seed);
  auto random_unit = [&rng](int64_t dim) {
    Tensor t({dim});
    double norm = 0;
    for (auto& v : t.data) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : t.data) v /= norm > 0 ? norm : 1.0;
    return t;
  };

  std::printf("target\tparam\tmedian_ms\n");
  for (const auto& [name, config] :
       {std::pair<const char*, ModelConfig>{"desk", ModelConfig::desk()},
        std::pair<const char*, ModelConfig>{"paper", ModelConfig::paper_scale()}}) {
    const ModelParams params = init_params(config);
    Tensor cloud({config.n_points, 3});
    for (auto& v : cloud.data) v = rng.uniform(-1, 1);
    std::vector<double> times;
    const int reps = config.n_points > 1024 ? 3 : 10;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = clock::now();
      const Tensor d = describe(config, params, cloud);
      const auto t1 = clock::now();
      if (!d.all_finite()) throw std::runtime_error("bench: non-finite descriptor");
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::printf("describe\t%s\t%.3f\n", name, median_ms(times));
  }

  std::istringstream ss(args.sizes);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const int64_t size = std::stoll(token);
    if (size <= 0) throw UsageError("--sizes entries must be positive");
    DescriptorIndex index;
    index.dim = args.dim;
    for (int64_t i = 0; i < size; ++i) {
      IndexEntry e;
      e.submap_id = static_cast<int>(i);
      e.run_id = "bench";
      e.descriptor = random_unit(args.dim);
      index.entries.push_back(std::move(e));
    }
    const int k = static_cast<int>(std::min<int64_t>(25, size));
    std::vector<double> times;
    for (int q = 0; q < args.queries; ++q) {
      const Tensor query = random_unit(args.dim);
      const auto t0 = clock::now();
      const auto result = query_knn(index, query, k);
      const auto t1 = clock::now();
      if (result.empty()) throw std::runtime_error("bench: empty result");
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::printf("query\t%lld\t%.3f\n", static_cast<long long>(size), median_ms(times));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point cloud place recognition: synthesize, train, index, evaluate"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic multi-run dataset");
  synth->add_option("--seed", synth_args.seed, "world seed; run seeds derive from it");
  synth->add_option("--runs", synth_args.runs, "number of traversals")->check(CLI::Range(2, 64));
  synth->add_option("--extent", synth_args.extent, "world side length in meters");
  synth->add_option("--interval", synth_args.interval, "submap spacing in meters");
  synth->add_option("--landmarks", synth_args.landmarks,
                    "landmark count; default scales with area");
  synth->add_option("--target-points", synth_args.target_points, "points per submap");
  synth->add_option("--route-radius", synth_args.route_radius,
                    "circle route radius; default makes route length = extent");
  synth->add_option("--spacing", synth_args.spacing, "scan spacing along the route");
  synth->add_option("--out", synth_args.out, "dataset directory")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a descriptor model on a dataset");
  train->add_option("--data", train_args.data, "dataset directory")->required();
  train->add_option("--out", train_args.out, "output directory")->required();
  train->add_option("--config", train_args.config_path, "key=value run config file");
  train->add_option("--loss", train_args.loss,
                    "triplet|quadruplet|lazy_triplet|lazy_quadruplet (quad/lazy_quad ok)");
  train->add_option("--iters", train_args.iters, "training iterations");
  train->add_option("--seed", train_args.seed, "overrides model and sampling seeds");

  IndexArgs index_args;
  CLI::App* index = app.add_subcommand("index", "build and save a descriptor index");
  index->add_option("--checkpoint", index_args.checkpoint, "checkpoint file")->required();
  index->add_option("--data", index_args.data, "dataset directory")->required();
  index->add_option("--db-run", index_args.db_run, "run id to index")->required();
  index->add_option("--out", index_args.out, "index file path")->required();
  index->add_option("--config", index_args.config_path, "run config (split parameters)");
  index->add_option("--split", index_args.split_path, "split file; default recomputes");
  index->add_option("--part", index_args.part, "test|train|all (default test)");
  uint64_t index_seed = 0;
  index->add_option("--seed", index_seed, "accepted for uniformity; indexing is deterministic");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "run the retrieval evaluation protocol");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
  eval->add_option("--data", eval_args.data, "dataset directory")->required();
  eval->add_option("--db-run", eval_args.db_run, "database run id")->required();
  eval->add_option("--query-run", eval_args.query_run, "query run id")->required();
  eval->add_option("--index", eval_args.index_path, "prebuilt index file");
  eval->add_option("--radius", eval_args.radius, "success radius in meters (default 25)");
  eval->add_option("--topn", eval_args.topn, "retrievals per query (default 25)");
  eval->add_option("--config", eval_args.config_path, "run config (split parameters)");
  eval->add_option("--split", eval_args.split_path, "split file; default recomputes");
  eval->add_option("--out", eval_args.out, "report directory")->required();
  uint64_t eval_seed = 0;
  eval->add_option("--seed", eval_seed, "accepted for uniformity; evaluation is deterministic");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "measure describe and query latency");
  bench->add_option("--sizes", bench_args.sizes, "comma-separated database sizes");
  bench->add_option("--dim", bench_args.dim, "descriptor dimension");
  bench->add_option("--queries", bench_args.queries, "queries per size");
  bench->add_option("--seed", bench_args.seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\nUsage:\n" << app.help() << std::endl;
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train->parsed()) return cmd_train(train_args);
    if (index->parsed()) return cmd_index(index_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (bench->parsed()) return cmd_bench(bench_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\nUsage:\n" << app.help() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

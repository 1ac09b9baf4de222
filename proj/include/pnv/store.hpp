#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pnv/model.hpp"
#include "pnv/pipeline.hpp"
#include "pnv/retrieval.hpp"
#include "pnv/training.hpp"

namespace pnv {

// Checkpoint file: a text manifest (format tag, model config, parameter
// names/shapes/offsets) followed by one raw little-endian f64 blob. Loads
// reproduce the saved parameters bit for bit.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Descriptor index file: binary, magic "PNVIDX01", little-endian.
void save_index(const std::filesystem::path& path, const DescriptorIndex& index);
DescriptorIndex load_index(const std::filesystem::path& path);

// Everything a run reads from one flat key=value file. Unset keys keep these
// defaults; write_run_config emits every key, so a written file doubles as
// the key reference.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  PipelineConfig pipeline;
  double test_fraction = 0.3;
  double region_m = 150.0;
  uint64_t split_seed = 7;
  std::string data_dir;
  std::string out_dir;
};

RunConfig parse_run_config(const std::filesystem::path& path);
void write_run_config(const std::filesystem::path& path, const RunConfig& config);

// A dataset directory as written by emit_dataset: submaps in manifest order
// plus each submap's index within its run.
struct Dataset {
  std::vector<Submap> submaps;
  std::vector<int> per_run_index;
};

Dataset load_dataset(const std::filesystem::path& dir);

// Region split persisted as run_id, index, train|test rows.
void save_split(const std::filesystem::path& path, const Dataset& dataset,
                const SplitResult& split);
SplitResult load_split(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace pnv

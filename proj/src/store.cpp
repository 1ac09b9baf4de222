#include "pnv/store.hpp"

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pnv/pcf.hpp"

namespace pnv {

static_assert(std::endian::native == std::endian::little,
              "persisted blobs assume a little-endian host");

namespace {

std::string join_dims(const std::vector<int64_t>& dims) {
  std::string out;
  for (int64_t d : dims) out += (out.empty() ? "" : ",") + std::to_string(d);
  return out;
}

std::vector<int64_t> parse_dims(const std::string& text) {
  std::vector<int64_t> dims;
  std::istringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) dims.push_back(std::stoll(part));
  return dims;
}

int64_t numel(const std::vector<int64_t>& dims) {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

// Expected parameter shapes in named_params order, derived from the config.
std::vector<std::pair<std::string, std::vector<int64_t>>> expected_shapes(
    const ModelConfig& c) {
  std::vector<std::pair<std::string, std::vector<int64_t>>> out;
  int64_t in = 3;
  for (size_t l = 0; l < c.mlp_widths.size(); ++l) {
    const int64_t width = c.mlp_widths[l];
    out.emplace_back("mlp" + std::to_string(l) + ".weight", std::vector<int64_t>{in, width});
    out.emplace_back("mlp" + std::to_string(l) + ".bias", std::vector<int64_t>{width});
    in = width;
  }
  out.emplace_back("clusters", std::vector<int64_t>{c.n_clusters, c.feature_dim()});
  out.emplace_back("assign.weight", std::vector<int64_t>{c.feature_dim(), c.n_clusters});
  out.emplace_back("assign.bias", std::vector<int64_t>{c.n_clusters});
  out.emplace_back("head.weight", std::vector<int64_t>{c.head_in(), c.out_dim});
  out.emplace_back("head.bias", std::vector<int64_t>{c.out_dim});
  return out;
}

[[noreturn]] void file_error(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params) {
  config.validate();
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) file_error(path, "cannot open for writing");
  const auto named = named_params(params);
  std::fprintf(f, "PNVCKPT1\n");
  std::fprintf(f, "n_points=%" PRId64 "\n", config.n_points);
  std::fprintf(f, "mlp_widths=%s\n", join_dims(config.mlp_widths).c_str());
  std::fprintf(f, "n_clusters=%" PRId64 "\n", config.n_clusters);
  std::fprintf(f, "out_dim=%" PRId64 "\n", config.out_dim);
  std::fprintf(f, "variant=%s\n", config.variant == Variant::kVlad ? "vlad" : "max");
  std::fprintf(f, "intra_norm=%d\n", config.intra_norm ? 1 : 0);
  std::fprintf(f, "seed=%" PRIu64 "\n", config.seed);
  std::fprintf(f, "params=%zu\n", named.size());
  int64_t offset = 0;
  for (const auto& [name, tensor] : named) {
    std::fprintf(f, "param %s %s %" PRId64 "\n", name.c_str(),
                 join_dims(tensor->shape).c_str(), offset);
    offset += static_cast<int64_t>(tensor->data.size());
  }
  std::fprintf(f, "blob=%" PRId64 "\n", offset);
  for (const auto& [name, tensor] : named)
    if (std::fwrite(tensor->data.data(), sizeof(double), tensor->data.size(), f) !=
        tensor->data.size()) {
      std::fclose(f);
      file_error(path, "short write");
    }
  if (std::fclose(f) != 0) file_error(path, "write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) file_error(path, "cannot open");
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) file_error(path, std::string("truncated before ") + what);
    return line;
  };
  if (next_line("magic") != "PNVCKPT1") file_error(path, "not a checkpoint file");

  Checkpoint ck;
  std::map<std::string, std::string> fields;
  for (const char* key :
       {"n_points", "mlp_widths", "n_clusters", "out_dim", "variant", "intra_norm", "seed",
        "params"}) {
    next_line(key);
    const size_t eq = line.find('=');
    if (eq == std::string::npos || line.substr(0, eq) != key)
      file_error(path, "manifest line '" + line + "' where " + key + "= was expected");
    fields[key] = line.substr(eq + 1);
  }
  try {
    ck.config.n_points = std::stoll(fields["n_points"]);
    ck.config.mlp_widths = parse_dims(fields["mlp_widths"]);
    ck.config.n_clusters = std::stoll(fields["n_clusters"]);
    ck.config.out_dim = std::stoll(fields["out_dim"]);
    ck.config.seed = std::stoull(fields["seed"]);
    ck.config.intra_norm = fields["intra_norm"] == "1";
  } catch (const std::exception&) {
    file_error(path, "bad numeric field in manifest");
  }
  if (fields["variant"] == "vlad")
    ck.config.variant = Variant::kVlad;
  else if (fields["variant"] == "max")
    ck.config.variant = Variant::kMax;
  else
    file_error(path, "unknown variant '" + fields["variant"] + "'");
  ck.config.validate();

  const auto expected = expected_shapes(ck.config);
  const size_t n_params = std::stoull(fields["params"]);
  if (n_params != expected.size())
    file_error(path, "expected " + std::to_string(expected.size()) + " params, found " +
                         std::to_string(n_params));
  std::vector<std::pair<std::vector<int64_t>, int64_t>> layout;
  for (size_t i = 0; i < n_params; ++i) {
    std::istringstream ss(next_line("param table"));
    std::string tag, name, dims;
    int64_t offset = -1;
    ss >> tag >> name >> dims >> offset;
    if (tag != "param" || offset < 0) file_error(path, "bad param line '" + line + "'");
    if (name != expected[i].first)
      file_error(path, "param " + std::to_string(i) + " is '" + name + "', expected '" +
                           expected[i].first + "'");
    const std::vector<int64_t> shape = parse_dims(dims);
    if (shape != expected[i].second)
      file_error(path, "param " + name + " has shape [" + dims + "], expected [" +
                           join_dims(expected[i].second) + "]");
    layout.emplace_back(shape, offset);
  }
  const size_t eq = next_line("blob header").find('=');
  if (eq == std::string::npos || line.substr(0, eq) != "blob")
    file_error(path, "missing blob header");
  const int64_t blob_len = std::stoll(line.substr(eq + 1));
  std::vector<double> blob(static_cast<size_t>(blob_len));
  if (!in.read(reinterpret_cast<char*>(blob.data()),
               static_cast<std::streamsize>(sizeof(double) * blob.size())))
    file_error(path, "blob shorter than its header claims");

  std::vector<Tensor> flat;
  int64_t expected_offset = 0;
  for (size_t i = 0; i < layout.size(); ++i) {
    const auto& [shape, offset] = layout[i];
    const int64_t len = numel(shape);
    if (offset != expected_offset)
      file_error(path, "param " + expected[i].first + " offset " + std::to_string(offset) +
                           " does not match running total " + std::to_string(expected_offset));
    if (offset + len > blob_len) file_error(path, "param table overruns the blob");
    Tensor t(shape);
    std::copy(blob.begin() + offset, blob.begin() + offset + len, t.data.begin());
    flat.push_back(std::move(t));
    expected_offset += len;
  }
  if (expected_offset != blob_len)
    file_error(path, "blob length " + std::to_string(blob_len) + " but params cover " +
                         std::to_string(expected_offset));
  ck.params = unflatten_params(ck.config, flat);
  return ck;
}

namespace {

constexpr char kIndexMagic[8] = {'P', 'N', 'V', 'I', 'D', 'X', '0', '1'};

template <typename T>
void put(FILE* f, const T& v, const std::filesystem::path& path) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1) {
    std::fclose(f);
    file_error(path, "short write");
  }
}

template <typename T>
T take(std::ifstream& in, const std::filesystem::path& path, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    file_error(path, std::string("truncated reading ") + what);
  return v;
}

}  // namespace

void save_index(const std::filesystem::path& path, const DescriptorIndex& index) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) file_error(path, "cannot open for writing");
  if (std::fwrite(kIndexMagic, 1, 8, f) != 8) {
    std::fclose(f);
    file_error(path, "short write");
  }
  put(f, index.dim, path);
  put(f, static_cast<int64_t>(index.entries.size()), path);
  for (const IndexEntry& e : index.entries) {
    if (static_cast<int64_t>(e.descriptor.data.size()) != index.dim) {
      std::fclose(f);
      file_error(path, "entry " + std::to_string(e.submap_id) + " has dimension " +
                           std::to_string(e.descriptor.data.size()) + ", index says " +
                           std::to_string(index.dim));
    }
    put(f, static_cast<int64_t>(e.submap_id), path);
    put(f, static_cast<uint64_t>(e.run_id.size()), path);
    if (!e.run_id.empty() &&
        std::fwrite(e.run_id.data(), 1, e.run_id.size(), f) != e.run_id.size()) {
      std::fclose(f);
      file_error(path, "short write");
    }
    put(f, e.centroid_xy.x, path);
    put(f, e.centroid_xy.y, path);
    if (std::fwrite(e.descriptor.data.data(), sizeof(double), e.descriptor.data.size(), f) !=
        e.descriptor.data.size()) {
      std::fclose(f);
      file_error(path, "short write");
    }
  }
  if (std::fclose(f) != 0) file_error(path, "write failed");
}

DescriptorIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) file_error(path, "cannot open");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kIndexMagic, 8) != 0)
    file_error(path, "not an index file");
  DescriptorIndex index;
  index.dim = take<int64_t>(in, path, "dimension");
  const int64_t count = take<int64_t>(in, path, "entry count");
  if (index.dim <= 0 || count < 0 || count > (1LL << 32))
    file_error(path, "implausible header");
  for (int64_t i = 0; i < count; ++i) {
    IndexEntry e;
    e.submap_id = static_cast<int>(take<int64_t>(in, path, "entry id"));
    const uint64_t len = take<uint64_t>(in, path, "run id length");
    if (len > (1 << 20)) file_error(path, "implausible run id length");
    e.run_id.resize(len);
    if (len && !in.read(e.run_id.data(), static_cast<std::streamsize>(len)))
      file_error(path, "truncated reading run id");
    e.centroid_xy.x = take<double>(in, path, "centroid");
    e.centroid_xy.y = take<double>(in, path, "centroid");
    e.descriptor = Tensor({index.dim});
    if (!in.read(reinterpret_cast<char*>(e.descriptor.data.data()),
                 static_cast<std::streamsize>(sizeof(double) * e.descriptor.data.size())))
      file_error(path, "truncated reading descriptor " + std::to_string(i));
    index.entries.push_back(std::move(e));
  }
  return index;
}

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

int64_t to_int(const std::string& v) {
  size_t used = 0;
  const int64_t out = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing text");
  return out;
}

uint64_t to_uint(const std::string& v) {
  size_t used = 0;
  const uint64_t out = std::stoull(v, &used);
  if (used != v.size() || (!v.empty() && v[0] == '-'))
    throw std::invalid_argument("not a non-negative integer");
  return out;
}

double to_double(const std::string& v) {
  size_t used = 0;
  const double out = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing text");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("expected 0/1/true/false");
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n_points", [](RunConfig& c, const std::string& v) { c.model.n_points = to_int(v); }},
      {"mlp_widths",
       [](RunConfig& c, const std::string& v) {
         c.model.mlp_widths = parse_dims(v);
         if (c.model.mlp_widths.empty()) throw std::invalid_argument("empty width list");
       }},
      {"n_clusters", [](RunConfig& c, const std::string& v) { c.model.n_clusters = to_int(v); }},
      {"out_dim", [](RunConfig& c, const std::string& v) { c.model.out_dim = to_int(v); }},
      {"variant",
       [](RunConfig& c, const std::string& v) {
         if (v == "vlad")
           c.model.variant = Variant::kVlad;
         else if (v == "max")
           c.model.variant = Variant::kMax;
         else
           throw std::invalid_argument("expected vlad or max");
       }},
      {"intra_norm", [](RunConfig& c, const std::string& v) { c.model.intra_norm = to_bool(v); }},
      {"model_seed", [](RunConfig& c, const std::string& v) { c.model.seed = to_uint(v); }},
      {"loss", [](RunConfig& c, const std::string& v) { c.train.loss = parse_loss_name(v); }},
      {"alpha", [](RunConfig& c, const std::string& v) { c.train.margins.alpha = to_double(v); }},
      {"beta", [](RunConfig& c, const std::string& v) { c.train.margins.beta = to_double(v); }},
      {"tuples_per_batch",
       [](RunConfig& c, const std::string& v) { c.train.tuples_per_batch = (int)to_int(v); }},
      {"negatives_per_tuple",
       [](RunConfig& c, const std::string& v) { c.train.negatives_per_tuple = (int)to_int(v); }},
      {"mining_pool",
       [](RunConfig& c, const std::string& v) { c.train.mining_pool = (int)to_int(v); }},
      {"cache_refresh_iters",
       [](RunConfig& c, const std::string& v) { c.train.cache_refresh_iters = (int)to_int(v); }},
      {"positives_sampled",
       [](RunConfig& c, const std::string& v) { c.train.positives_sampled = (int)to_int(v); }},
      {"learning_rate",
       [](RunConfig& c, const std::string& v) { c.train.learning_rate = to_double(v); }},
      {"adam_beta1", [](RunConfig& c, const std::string& v) { c.train.beta1 = to_double(v); }},
      {"adam_beta2", [](RunConfig& c, const std::string& v) { c.train.beta2 = to_double(v); }},
      {"adam_eps", [](RunConfig& c, const std::string& v) { c.train.adam_eps = to_double(v); }},
      {"max_iters", [](RunConfig& c, const std::string& v) { c.train.max_iters = to_int(v); }},
      {"train_seed", [](RunConfig& c, const std::string& v) { c.train.seed = to_uint(v); }},
      {"interval_m",
       [](RunConfig& c, const std::string& v) { c.pipeline.interval_m = to_double(v); }},
      {"extent_m", [](RunConfig& c, const std::string& v) { c.pipeline.extent_m = to_double(v); }},
      {"target_points",
       [](RunConfig& c, const std::string& v) { c.pipeline.target_points = to_int(v); }},
      {"ground_inlier_tol_m",
       [](RunConfig& c, const std::string& v) { c.pipeline.ground_inlier_tol_m = to_double(v); }},
      {"ground_max_tilt_deg",
       [](RunConfig& c, const std::string& v) { c.pipeline.ground_max_tilt_deg = to_double(v); }},
      {"positive_max_m",
       [](RunConfig& c, const std::string& v) { c.pipeline.positive_max_m = to_double(v); }},
      {"negative_min_m",
       [](RunConfig& c, const std::string& v) { c.pipeline.negative_min_m = to_double(v); }},
      {"test_fraction",
       [](RunConfig& c, const std::string& v) { c.test_fraction = to_double(v); }},
      {"region_m", [](RunConfig& c, const std::string& v) { c.region_m = to_double(v); }},
      {"split_seed", [](RunConfig& c, const std::string& v) { c.split_seed = to_uint(v); }},
      {"data_dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
  };
  return table;
}

std::string trimmed(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) file_error(path, "cannot open");
  RunConfig config;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trimmed(raw);
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      file_error(path, std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end())
      file_error(path, std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second(config, value);
    } catch (const std::exception& e) {
      file_error(path, std::to_string(line_no) + ": bad value for '" + key + "': '" + value +
                           "' (" + e.what() + ")");
    }
  }
  return config;
}

void write_run_config(const std::filesystem::path& path, const RunConfig& c) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) file_error(path, "cannot open for writing");
  std::fprintf(f, "# model\n");
  std::fprintf(f, "n_points=%" PRId64 "\n", c.model.n_points);
  std::fprintf(f, "mlp_widths=%s\n", join_dims(c.model.mlp_widths).c_str());
  std::fprintf(f, "n_clusters=%" PRId64 "\n", c.model.n_clusters);
  std::fprintf(f, "out_dim=%" PRId64 "\n", c.model.out_dim);
  std::fprintf(f, "variant=%s\n", c.model.variant == Variant::kVlad ? "vlad" : "max");
  std::fprintf(f, "intra_norm=%d\n", c.model.intra_norm ? 1 : 0);
  std::fprintf(f, "model_seed=%" PRIu64 "\n", c.model.seed);
  std::fprintf(f, "# training\n");
  std::fprintf(f, "loss=%s\n", loss_name(c.train.loss));
  std::fprintf(f, "alpha=%.17g\n", c.train.margins.alpha);
  std::fprintf(f, "beta=%.17g\n", c.train.margins.beta);
  std::fprintf(f, "tuples_per_batch=%d\n", c.train.tuples_per_batch);
  std::fprintf(f, "negatives_per_tuple=%d\n", c.train.negatives_per_tuple);
  std::fprintf(f, "mining_pool=%d\n", c.train.mining_pool);
  std::fprintf(f, "cache_refresh_iters=%d\n", c.train.cache_refresh_iters);
  std::fprintf(f, "positives_sampled=%d\n", c.train.positives_sampled);
  std::fprintf(f, "learning_rate=%.17g\n", c.train.learning_rate);
  std::fprintf(f, "adam_beta1=%.17g\n", c.train.beta1);
  std::fprintf(f, "adam_beta2=%.17g\n", c.train.beta2);
  std::fprintf(f, "adam_eps=%.17g\n", c.train.adam_eps);
  std::fprintf(f, "max_iters=%" PRId64 "\n", c.train.max_iters);
  std::fprintf(f, "train_seed=%" PRIu64 "\n", c.train.seed);
  std::fprintf(f, "# pipeline\n");
  std::fprintf(f, "interval_m=%.17g\n", c.pipeline.interval_m);
  std::fprintf(f, "extent_m=%.17g\n", c.pipeline.extent_m);
  std::fprintf(f, "target_points=%" PRId64 "\n", c.pipeline.target_points);
  std::fprintf(f, "ground_inlier_tol_m=%.17g\n", c.pipeline.ground_inlier_tol_m);
  std::fprintf(f, "ground_max_tilt_deg=%.17g\n", c.pipeline.ground_max_tilt_deg);
  std::fprintf(f, "positive_max_m=%.17g\n", c.pipeline.positive_max_m);
  std::fprintf(f, "negative_min_m=%.17g\n", c.pipeline.negative_min_m);
  std::fprintf(f, "# split\n");
  std::fprintf(f, "test_fraction=%.17g\n", c.test_fraction);
  std::fprintf(f, "region_m=%.17g\n", c.region_m);
  std::fprintf(f, "split_seed=%" PRIu64 "\n", c.split_seed);
  std::fprintf(f, "# paths\n");
  std::fprintf(f, "data_dir=%s\n", c.data_dir.c_str());
  std::fprintf(f, "out_dir=%s\n", c.out_dir.c_str());
  if (std::fclose(f) != 0) file_error(path, "write failed");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.tsv";
  std::ifstream manifest(manifest_path);
  if (!manifest) file_error(manifest_path, "cannot open");
  std::string line;
  if (!std::getline(manifest, line) || line != "run_id\tindex\tx\ty")
    file_error(manifest_path, "unexpected header '" + line + "'");
  Dataset dataset;
  int line_no = 1;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    std::istringstream ss(line);
    std::string run_id;
    int index = -1;
    double x = 0, y = 0;
    if (!(ss >> run_id >> index >> x >> y))
      file_error(manifest_path, std::to_string(line_no) + ": bad row '" + line + "'");
    Submap sm;
    sm.run_id = run_id;
    sm.centroid_xy = {x, y};
    sm.cloud =
        read_pcf(dir / "runs" / run_id / ("submap_" + std::to_string(index) + ".pcf"));
    dataset.submaps.push_back(std::move(sm));
    dataset.per_run_index.push_back(index);
  }
  if (dataset.submaps.empty()) file_error(manifest_path, "no submap rows");
  return dataset;
}

void save_split(const std::filesystem::path& path, const Dataset& dataset,
                const SplitResult& split) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) file_error(path, "cannot open for writing");
  std::fprintf(f, "run_id\tindex\tpart\n");
  std::vector<const char*> part(dataset.submaps.size(), nullptr);
  for (int i : split.train) part[static_cast<size_t>(i)] = "train";
  for (int i : split.test) part[static_cast<size_t>(i)] = "test";
  for (size_t i = 0; i < dataset.submaps.size(); ++i) {
    if (!part[i]) {
      std::fclose(f);
      file_error(path, "submap " + std::to_string(i) + " is in neither part");
    }
    std::fprintf(f, "%s\t%d\t%s\n", dataset.submaps[i].run_id.c_str(),
                 dataset.per_run_index[i], part[i]);
  }
  if (std::fclose(f) != 0) file_error(path, "write failed");
}

SplitResult load_split(const std::filesystem::path& path, const Dataset& dataset) {
  std::ifstream in(path);
  if (!in) file_error(path, "cannot open");
  std::map<std::pair<std::string, int>, int> position;
  for (size_t i = 0; i < dataset.submaps.size(); ++i)
    position[{dataset.submaps[i].run_id, dataset.per_run_index[i]}] = static_cast<int>(i);
  std::string line;
  if (!std::getline(in, line) || line != "run_id\tindex\tpart")
    file_error(path, "unexpected header '" + line + "'");
  SplitResult split;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    std::istringstream ss(line);
    std::string run_id, part;
    int index = -1;
    if (!(ss >> run_id >> index >> part) || (part != "train" && part != "test"))
      file_error(path, std::to_string(line_no) + ": bad row '" + line + "'");
    const auto it = position.find({run_id, index});
    if (it == position.end())
      file_error(path, std::to_string(line_no) + ": submap " + run_id + "/" +
                           std::to_string(index) + " is not in the dataset");
    (part == "train" ? split.train : split.test).push_back(it->second);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace pnv

#include "pnv/pcf.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pnv {

static_assert(std::endian::native == std::endian::little,
              "point cloud files are little-endian; add byte swapping for this platform");

namespace {

constexpr char kBinaryMagic[8] = {'P', 'C', 'F', 'B', '0', '0', '0', '1'};

void check_cloud(const Tensor& cloud) {
  if (cloud.rank() != 2 || cloud.cols() != 3)
    throw std::invalid_argument("pcf: cloud must be [N,3], got " + cloud.shape_str());
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error("pcf: " + path.string() + ": " + why);
}

}  // namespace

void write_pcf_text(const std::filesystem::path& path, const Tensor& cloud) {
  check_cloud(cloud);
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) fail(path, "cannot open for writing");
  std::fprintf(f, "PCF1 %" PRId64 "\n", cloud.rows());
  for (int64_t r = 0; r < cloud.rows(); ++r)
    std::fprintf(f, "%.17g %.17g %.17g\n", cloud.at(r, 0), cloud.at(r, 1), cloud.at(r, 2));
  std::fclose(f);
}

void write_pcf_binary(const std::filesystem::path& path, const Tensor& cloud) {
  check_cloud(cloud);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open for writing");
  f.write(kBinaryMagic, sizeof(kBinaryMagic));
  const uint64_t count = static_cast<uint64_t>(cloud.rows());
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  f.write(reinterpret_cast<const char*>(cloud.data.data()),
          static_cast<std::streamsize>(cloud.data.size() * sizeof(double)));
  if (!f) fail(path, "short write");
}

Tensor read_pcf(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open");
  char head[8] = {};
  f.read(head, sizeof(head));
  if (f.gcount() == 8 && std::memcmp(head, kBinaryMagic, 8) == 0) {
    uint64_t count = 0;
    f.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!f) fail(path, "truncated header");
    if (count == 0 || count > (1ULL << 32)) fail(path, "implausible point count");
    Tensor cloud({static_cast<int64_t>(count), 3});
    f.read(reinterpret_cast<char*>(cloud.data.data()),
           static_cast<std::streamsize>(cloud.data.size() * sizeof(double)));
    if (static_cast<size_t>(f.gcount()) != cloud.data.size() * sizeof(double))
      fail(path, "truncated point data");
    return cloud;
  }
  f.clear();
  f.seekg(0);
  std::string magic;
  int64_t count = 0;
  if (!(f >> magic >> count) || magic != "PCF1" || count <= 0)
    fail(path, "not a point cloud file (bad magic)");
  Tensor cloud({count, 3});
  for (int64_t r = 0; r < count; ++r)
    if (!(f >> cloud.at(r, 0) >> cloud.at(r, 1) >> cloud.at(r, 2)))
      fail(path, "truncated at point " + std::to_string(r));
  return cloud;
}

}  // namespace pnv

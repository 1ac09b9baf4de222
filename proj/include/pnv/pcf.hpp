#pragma once

// Point cloud files. Text form: "PCF1 <count>" then one "x y z" line per
// point. Binary form: magic "PCFB0001", little-endian u64 count, then
// count*3 little-endian f64. read_pcf sniffs the magic.

#include <filesystem>

#include "pnv/tensor.hpp"

namespace pnv {

void write_pcf_text(const std::filesystem::path& path, const Tensor& cloud);
void write_pcf_binary(const std::filesystem::path& path, const Tensor& cloud);
Tensor read_pcf(const std::filesystem::path& path);

}  // namespace pnv

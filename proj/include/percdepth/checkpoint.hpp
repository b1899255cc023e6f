#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "percdepth/tensor.hpp"

// Named-tensor archive: "PDGC", u32 version, u32 record count, then per record
// u32 name length, name bytes, u32 rank, rank x u32 dims, float32 payload.
// All integers and floats are little-endian.
namespace percdepth::checkpoint {

namespace fs = std::filesystem;

constexpr std::uint32_t kVersion = 1;

using Archive = std::map<std::string, Tensor>;

void write_archive(const fs::path& path, const Archive& records);
Archive read_archive(const fs::path& path);

}  // namespace percdepth::checkpoint

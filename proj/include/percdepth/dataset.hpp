#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"
#include "percdepth/data.hpp"

// On-disk layout: <root>/rgb/*.png, <root>/depth/*.pfm, optional
// <root>/eval/{rgb,depth}/ with matching stems, and <root>/dataset.json
// carrying the preset name and sampling spec.
namespace percdepth::dataset {

namespace fs = std::filesystem;

// `extra` is merged into dataset.json (e.g. the synth generator settings).
void save(const fs::path& root, const data::Dataset& ds, const nlohmann::json& extra = {});

// Files are read in lexicographic order. Without dataset.json the fallback
// sampling spec is used; with neither a ConfigError is thrown.
data::Dataset load(const fs::path& root, const std::optional<data::SamplingSpec>& fallback = {});

// Reads <dir>/rgb/<stem>.png and <dir>/depth/<stem>.pfm pairs.
data::EvalPairs load_eval(const fs::path& dir);

}  // namespace percdepth::dataset

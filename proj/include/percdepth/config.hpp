#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "percdepth/data.hpp"
#include "percdepth/filters.hpp"
#include "percdepth/network.hpp"
#include "percdepth/training.hpp"

// JSON forms of the configuration structs. Readers start from a base value,
// override the keys present and reject unknown keys with ConfigError.
namespace percdepth::config {

using nlohmann::json;

json to_json(const nn::NetScale& s);
json to_json(const data::ScalingSpec& s);
json to_json(const data::AugmentSpec& s);
json to_json(const data::SamplingSpec& s);
json to_json(const data::SynthConfig& s);
json to_json(const filters::FilterConfig& s);
json to_json(const training::TrainConfig& s);

nn::NetScale read(const json& j, nn::NetScale base);
data::ScalingSpec read(const json& j, data::ScalingSpec base);
data::AugmentSpec read(const json& j, data::AugmentSpec base);
data::SamplingSpec read(const json& j, data::SamplingSpec base);
data::SynthConfig read(const json& j, data::SynthConfig base);
filters::FilterConfig read(const json& j, filters::FilterConfig base);
training::TrainConfig read(const json& j, training::TrainConfig base);

// Parses a file; syntax errors become ParseError with the byte offset.
json load_file(const std::filesystem::path& path);
void save_file(const std::filesystem::path& path, const json& j);

}  // namespace percdepth::config

#include "percdepth/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "percdepth/config.hpp"
#include "percdepth/io.hpp"

namespace percdepth::dataset {

namespace {

std::vector<fs::path> list(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu", prefix, i);
  return buf;
}

void write_eval(const fs::path& dir, const data::EvalPairs& eval) {
  for (std::size_t i = 0; i < eval.size(); ++i) {
    io::write_png(dir / "rgb" / (eval.stems[i] + ".png"), eval.rgb[i]);
    io::write_pfm(dir / "depth" / (eval.stems[i] + ".pfm"), eval.depth[i]);
  }
}

}  // namespace

void save(const fs::path& root, const data::Dataset& ds, const nlohmann::json& extra) {
  fs::create_directories(root / "rgb");
  fs::create_directories(root / "depth");
  for (std::size_t i = 0; i < ds.pools.rgb.size(); ++i) {
    io::write_png(root / "rgb" / (numbered("rgb", i) + ".png"), ds.pools.rgb[i]);
  }
  for (std::size_t i = 0; i < ds.pools.depth.size(); ++i) {
    io::write_pfm(root / "depth" / (numbered("depth", i) + ".pfm"), ds.pools.depth[i]);
  }
  if (ds.eval.size() > 0) write_eval(root / "eval", ds.eval);
  nlohmann::json j = {{"preset", ds.preset},
                      {"sampling", config::to_json(ds.sampling)},
                      {"counts",
                       {{"rgb", ds.pools.rgb.size()},
                        {"depth", ds.pools.depth.size()},
                        {"eval", ds.eval.size()}}}};
  if (!extra.is_null()) j.update(extra);
  config::save_file(root / "dataset.json", j);
}

data::EvalPairs load_eval(const fs::path& dir) {
  data::EvalPairs out;
  for (const auto& rgb : list(dir / "rgb", ".png")) {
    const std::string stem = rgb.stem().string();
    const fs::path depth = dir / "depth" / (stem + ".pfm");
    if (!fs::exists(depth)) throw ConfigError("eval pair '" + stem + "' has no depth map " + depth.string());
    out.stems.push_back(stem);
    out.rgb.push_back(io::read_png(rgb));
    out.depth.push_back(io::read_pfm(depth));
  }
  if (out.size() == 0) throw ConfigError("no eval pairs under " + dir.string());
  out.validate();
  return out;
}

data::Dataset load(const fs::path& root, const std::optional<data::SamplingSpec>& fallback) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " does not exist");
  data::Dataset ds;
  const fs::path meta = root / "dataset.json";
  if (fs::exists(meta)) {
    const auto j = config::load_file(meta);
    if (!j.is_object()) throw ConfigError(meta.string() + ": expected an object");
    ds.preset = j.value("preset", std::string("custom"));
    ds.sampling = config::read(j.at("sampling"), fallback.value_or(data::SamplingSpec{}));
  } else if (fallback) {
    ds.preset = "custom";
    ds.sampling = *fallback;
  } else {
    throw ConfigError("no dataset.json in " + root.string() + " and no preset given");
  }
  for (const auto& p : list(root / "rgb", ".png")) {
    Tensor t = io::read_png(p);
    if (t.c() == 1) {
      // Gray images are replicated to three channels.
      Tensor rgb(1, 3, t.h(), t.w());
      for (int c = 0; c < 3; ++c) std::copy(t.plane(0, 0), t.plane(0, 0) + t.shape().plane(), rgb.plane(0, c));
      t = std::move(rgb);
    }
    ds.pools.rgb.push_back(std::move(t));
  }
  for (const auto& p : list(root / "depth", ".pfm")) {
    Tensor t = io::read_pfm(p);
    if (t.c() != 1) throw ShapeError(p.string() + ": depth maps must have one channel");
    ds.pools.depth.push_back(std::move(t));
  }
  if (ds.pools.rgb.empty() || ds.pools.depth.empty()) {
    throw ConfigError("dataset at " + root.string() + " needs rgb/*.png and depth/*.pfm");
  }
  if (fs::is_directory(root / "eval")) ds.eval = load_eval(root / "eval");
  return ds;
}

}  // namespace percdepth::dataset

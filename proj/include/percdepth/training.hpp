#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>

#include "percdepth/data.hpp"
#include "percdepth/losses.hpp"
#include "percdepth/network.hpp"
#include "percdepth/optim.hpp"

// Alternating critic / generator optimization of the four networks.
namespace percdepth::training {

namespace fs = std::filesystem;

struct TrainConfig {
  std::int64_t n_g = 10000;
  int n_f_initial = 24;
  std::int64_t n_f_halve_at = 1000;
  int b = 8;
  double p = 100.0;
  double alpha_f = 5e-5;
  double alpha_g = 1e-4;
  double lambda_rec = 10.0;
  double sigma = 4.0;
  std::uint64_t seed = 0;
  nn::NetScale net_scale{1.0, 256};
  std::int64_t checkpoint_every = 500;
  bool zero_head = true;

  void validate() const;
};

// Defaults with the per-dataset reconstruction weight: surface 10, face 10,
// body 1, synth 10 (synth also runs at width 0.125 on 64 x 64 inputs).
TrainConfig preset_config(std::string_view preset);

struct MetricsRow {
  std::int64_t step = 0;
  double r_cri_y = 0;  // critic risks averaged over the n_f critic iterations
  double r_cri_x = 0;
  double r_adv_y = 0;
  double r_adv_x = 0;
  double r_rec = 0;
  double gamma = 0;  // value used during this step
  int n_f = 0;
  double gp_y = 0;  // penalty parts of r_cri_y / r_cri_x
  double gp_x = 0;
};

std::string metrics_header();
std::string format_metrics(const MetricsRow& row);

struct Models {
  nn::Network gen_y;     // RGB -> depth
  nn::Network gen_x;     // depth -> RGB
  nn::Network critic_y;  // on depth
  nn::Network critic_x;  // on RGB

  static Models build(const TrainConfig& cfg);
  losses::Networks refs() const { return {gen_y, gen_x, critic_y, critic_x}; }
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, data::Dataset data);
  // Restores networks, Adam moments, RNG, step and gamma from `checkpoint`.
  static Trainer resume(const fs::path& checkpoint, data::Dataset data);

  // Runs iteration k = step() + 1: n_f critic updates, then one generator update.
  MetricsRow iterate();

  std::int64_t step() const { return step_; }
  double gamma() const { return gamma_; }
  bool done() const { return step_ >= cfg_.n_g; }
  const TrainConfig& config() const { return cfg_; }
  const Models& models() const { return models_; }
  const data::Dataset& dataset() const { return data_; }

  // Writes the tensor archive and its JSON sidecar (same stem, .json).
  void save_checkpoint(const fs::path& path) const;

 private:
  TrainConfig cfg_;
  data::Dataset data_;
  Models models_;
  optim::AdamState adam_gy_, adam_gx_, adam_cy_, adam_cx_;
  std::mt19937_64 rng_;
  std::int64_t step_ = 0;
  double gamma_ = 0;
};

struct RunHooks {
  std::function<void(const MetricsRow&)> on_step;
  std::function<void(const fs::path&)> on_checkpoint;
};

// Trains to n_G, writing <out>/metrics.csv, <out>/config.resolved.json and
// <out>/checkpoints/step_<k>.pdgc every checkpoint_every steps and at the end.
// A resumed trainer keeps the metrics rows up to its step and appends.
void run(Trainer& trainer, const fs::path& out_dir, const RunHooks& hooks = {});

fs::path checkpoint_path(const fs::path& out_dir, std::int64_t step);
fs::path sidecar_path(const fs::path& checkpoint);

struct Deployed {
  nn::Network gen_y;
  data::SamplingSpec sampling;
  std::int64_t step = 0;
};

// Only the RGB -> depth generator is loaded.
Deployed load_generator(const fs::path& checkpoint);
// RGB image in [0, 255] (resized to the network input when needed) -> depth
// map in physical units.
Tensor infer(const nn::Network& gen_y, const Tensor& rgb, const data::SamplingSpec& sampling);

}  // namespace percdepth::training

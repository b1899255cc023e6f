#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "percdepth/data.hpp"
#include "percdepth/network.hpp"

// RMSE / MAE on the physical depth scale over registered evaluation pairs.
namespace percdepth::eval {

namespace fs = std::filesystem;

// Optional mask: pixels where mask is false are skipped.
double rmse(const Tensor& pred, const Tensor& gt, const std::vector<bool>* mask = nullptr);
double mae(const Tensor& pred, const Tensor& gt, const std::vector<bool>* mask = nullptr);

struct ImageMetrics {
  std::string stem;
  double rmse = 0;
  double mae = 0;
};

struct EvalReport {
  std::vector<ImageMetrics> images;
  data::Unit unit = data::Unit::unitless;
  double rmse_mean = 0;
  double rmse_std = 0;  // population std across images
  double mae_mean = 0;
  double mae_std = 0;

  std::size_t n_images() const { return images.size(); }
  // Recomputes the aggregates from the per-image rows.
  void aggregate();
  bool all_finite() const;
  void write_csv(const fs::path& path) const;
  std::string summary(const std::string& label) const;
};

struct EvalOptions {
  // Skip ground-truth pixels equal to the scaling's background value.
  bool mask_background = false;
};

// Predictions are produced per image by `predict` (physical units).
EvalReport evaluate(const data::EvalPairs& pairs, const data::ScalingSpec& depth,
                    const std::function<Tensor(const Tensor& rgb)>& predict,
                    const EvalOptions& opts = {});
// Runs the RGB -> depth generator through training::infer.
EvalReport evaluate(const nn::Network& gen_y, const data::EvalPairs& pairs,
                    const data::SamplingSpec& sampling, const EvalOptions& opts = {});
// Constant predictor, e.g. the median of the training depth pool.
EvalReport evaluate_constant(double value, const data::EvalPairs& pairs,
                             const data::ScalingSpec& depth, const EvalOptions& opts = {});

// Median over every pixel of the depth pool, in physical units.
double pool_median(const std::vector<Tensor>& depth_pool);

}  // namespace percdepth::eval
